#include "otn/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <set>

namespace otn {

namespace {

using Phrase = std::vector<std::string>;

std::vector<Phrase> phrases(std::initializer_list<const char*> list) {
  std::vector<Phrase> out;
  for (const char* entry : list) {
    Phrase words;
    std::string word;
    for (const char* c = entry;; ++c) {
      if (*c == ' ' || *c == '\0') {
        if (!word.empty()) words.push_back(word);
        word.clear();
        if (*c == '\0') break;
      } else {
        word += *c;
      }
    }
    out.push_back(words);
  }
  return out;
}

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
  return items[d(rng)];
}

struct Clause {
  AspectSpan aspect;
  AspectSpan opinion;
  Sentiment polarity;
};

class SentenceBuilder {
 public:
  explicit SentenceBuilder(const Lexicon& lexicon) : lexicon_(lexicon) {}

  std::vector<std::string> tokens;

  AspectSpan append(const Phrase& phrase) {
    const std::size_t start = tokens.size();
    tokens.insert(tokens.end(), phrase.begin(), phrase.end());
    return {start, tokens.size()};
  }
  void word(const std::string& w) { tokens.push_back(w); }

  // "<aspect> <linker> <opinion>" or "<opinion> <aspect>".
  Clause clause(const Phrase& aspect, Rng& rng) {
    const auto polarity = static_cast<Sentiment>(std::uniform_int_distribution<int>(0, 2)(rng));
    const auto& opinion = pick(pool(polarity), rng);
    Clause c{};
    c.polarity = polarity;
    if (std::bernoulli_distribution(0.7)(rng)) {
      c.aspect = append(aspect);
      word(pick(lexicon_.linkers, rng));
      c.opinion = append(opinion);
    } else {
      c.opinion = append(opinion);
      c.aspect = append(aspect);
    }
    return c;
  }

 private:
  const std::vector<Phrase>& pool(Sentiment s) const {
    switch (s) {
      case Sentiment::positive: return lexicon_.positive;
      case Sentiment::neutral: return lexicon_.neutral;
      case Sentiment::negative: return lexicon_.negative;
    }
    return lexicon_.neutral;
  }

  const Lexicon& lexicon_;
};

std::optional<SyntheticSentence> try_sentence(const Lexicon& lexicon, Rng& rng) {
  SentenceBuilder b(lexicon);
  if (std::bernoulli_distribution(0.5)(rng)) b.word(pick(lexicon.openers, rng));

  const std::size_t clause_count = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
  std::vector<Clause> clauses;
  std::vector<const Phrase*> used;
  for (std::size_t k = 0; k < clause_count; ++k) {
    if (k > 0) b.word(pick(lexicon.joiners, rng));
    const Phrase* aspect = &pick(lexicon.aspects, rng);
    while (std::find(used.begin(), used.end(), aspect) != used.end()) {
      aspect = &pick(lexicon.aspects, rng);
    }
    used.push_back(aspect);
    clauses.push_back(b.clause(*aspect, rng));
  }
  if (std::bernoulli_distribution(0.5)(rng)) b.word(pick(lexicon.fillers, rng));

  const Clause& target = pick(clauses, rng);
  std::vector<std::size_t> gaps;
  for (const auto& c : clauses) gaps.push_back(span_gap(target.aspect, c.opinion));
  const auto nearest = static_cast<std::size_t>(
      std::min_element(gaps.begin(), gaps.end()) - gaps.begin());
  if (std::count(gaps.begin(), gaps.end(), gaps[nearest]) > 1) return std::nullopt;

  SyntheticSentence s;
  s.tokens = std::move(b.tokens);
  s.aspect = target.aspect;
  s.label = clauses[nearest].polarity;
  s.tags.assign(s.tokens.size(), Tag::O);
  const auto& op = clauses[nearest].opinion;
  s.tags[op.start] = Tag::B;
  for (std::size_t i = op.start + 1; i < op.end; ++i) s.tags[i] = Tag::I;
  return s;
}

}  // namespace

const Lexicon& Lexicon::restaurant() {
  static const Lexicon lexicon{
      .aspects = phrases({"food", "service", "waiters", "pasta", "wine list", "staff", "decor",
                          "fish tacos", "prices", "dessert menu", "sushi", "music"}),
      .positive = phrases({"great", "delicious", "friendly", "excellent", "wonderful",
                           "really good", "top notch"}),
      .neutral = phrases({"okay", "average", "ordinary", "so so", "nothing special"}),
      .negative = phrases({"terrible", "rude", "bland", "awful", "unfriendly", "overpriced",
                           "far too slow"}),
      .openers = {"honestly", "overall", "tonight", "yesterday"},
      .linkers = {"was", "is", "seemed", "felt"},
      .joiners = {"but", "and", "while", "although"},
      .fillers = {"again", "sadly", "today", "there"},
  };
  return lexicon;
}

std::vector<std::string> Lexicon::words() const {
  std::set<std::string> all;
  for (const auto* group : {&aspects, &positive, &neutral, &negative}) {
    for (const auto& phrase : *group) all.insert(phrase.begin(), phrase.end());
  }
  for (const auto* group : {&openers, &linkers, &joiners, &fillers}) {
    all.insert(group->begin(), group->end());
  }
  return {all.begin(), all.end()};
}

std::size_t span_gap(const AspectSpan& a, const AspectSpan& b) {
  if (b.start >= a.end) return b.start - a.end + 1;
  if (a.start >= b.end) return a.start - b.end + 1;
  return 0;
}

std::vector<SyntheticSentence> generate_sentences(std::size_t count, std::uint64_t seed,
                                                  const Lexicon& lexicon) {
  Rng rng(seed);
  std::vector<SyntheticSentence> out;
  out.reserve(count);
  while (out.size() < count) {
    if (auto s = try_sentence(lexicon, rng)) out.push_back(std::move(*s));
  }
  return out;
}

SyntheticBenchmark make_benchmark(std::size_t train_count, std::size_t test_count,
                                  std::uint64_t seed) {
  const auto train = generate_sentences(train_count, seed);
  const auto test = generate_sentences(test_count, seed + 1);
  SyntheticBenchmark b;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (i < train.size() / 2) {
      b.alsc_train.push_back(train[i].alsc());
    } else {
      b.aowe_train.push_back(train[i].aowe());
    }
  }
  for (const auto& s : test) {
    b.alsc_test.push_back(s.alsc());
    b.aowe_test.push_back(s.aowe());
  }
  return b;
}

void write_lexicon_embeddings(const std::filesystem::path& path, const Lexicon& lexicon,
                              std::size_t dim, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  auto centroid = [&] {
    std::vector<double> c(dim);
    for (double& v : c) v = u(rng);
    return c;
  };
  std::map<std::string, std::size_t> category;
  const std::vector<const std::vector<Phrase>*> groups = {&lexicon.aspects, &lexicon.positive,
                                                          &lexicon.neutral, &lexicon.negative};
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const auto& phrase : *groups[g]) {
      for (const auto& w : phrase) category.emplace(w, g);
    }
  }
  std::vector<std::vector<double>> centroids;
  for (std::size_t g = 0; g <= groups.size(); ++g) centroids.push_back(centroid());

  out << std::setprecision(6);
  for (const auto& w : lexicon.words()) {
    const auto it = category.find(w);
    const auto& c = centroids[it == category.end() ? groups.size() : it->second];
    out << w;
    for (std::size_t k = 0; k < dim; ++k) out << ' ' << c[k] + u(rng);
    out << '\n';
  }
}

}  // namespace otn
