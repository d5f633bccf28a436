#include "otn/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string_view>

#include "json.hpp"

namespace otn {

using nlohmann::json;

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

std::string to_string(Sentiment s) {
  switch (s) {
    case Sentiment::positive: return "positive";
    case Sentiment::neutral: return "neutral";
    case Sentiment::negative: return "negative";
  }
  return "neutral";
}

std::optional<Sentiment> parse_sentiment(const std::string& s) {
  if (s == "positive") return Sentiment::positive;
  if (s == "neutral") return Sentiment::neutral;
  if (s == "negative") return Sentiment::negative;
  return std::nullopt;
}

char to_char(Tag t) {
  switch (t) {
    case Tag::O: return 'O';
    case Tag::B: return 'B';
    case Tag::I: return 'I';
  }
  return 'O';
}

std::optional<Tag> parse_tag(const std::string& s) {
  if (s == "O") return Tag::O;
  if (s == "B") return Tag::B;
  if (s == "I") return Tag::I;
  return std::nullopt;
}

void validate_span(const AspectSpan& span, std::size_t length) {
  if (!(span.start < span.end && span.end <= length)) {
    throw std::invalid_argument("aspect span [" + std::to_string(span.start) + ", " +
                                std::to_string(span.end) + ") invalid for sentence of length " +
                                std::to_string(length));
  }
}

namespace {

// Common part of both record kinds: tokens and a validated aspect.
struct RecordHead {
  std::vector<std::string> tokens;
  AspectSpan aspect;
};

RecordHead read_head(const json& record) {
  RecordHead head;
  head.tokens = record.at("tokens").get<std::vector<std::string>>();
  const auto& aspect = record.at("aspect");
  if (!aspect.is_array() || aspect.size() != 2) {
    throw std::invalid_argument("\"aspect\" must be [start, end]");
  }
  const auto start = aspect[0].get<long long>();
  const auto end = aspect[1].get<long long>();
  if (start < 0 || end < 0) throw std::invalid_argument("negative aspect bound");
  head.aspect = {static_cast<std::size_t>(start), static_cast<std::size_t>(end)};
  validate_span(head.aspect, head.tokens.size());
  return head;
}

template <typename Parse>
auto parse_lines(std::istream& in, const std::string& source, Parse parse) {
  std::vector<decltype(parse(json{}))> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(source, number, e.what());
    }
  }
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

std::vector<AlscInstance> parse_alsc_lines(std::istream& in, const std::string& source) {
  return parse_lines(in, source, [](const json& record) {
    RecordHead head = read_head(record);
    const auto label = parse_sentiment(record.at("label").get<std::string>());
    if (!label) throw std::invalid_argument("unknown label " + record.at("label").dump());
    return AlscInstance{std::move(head.tokens), head.aspect, *label};
  });
}

std::vector<AoweInstance> parse_aowe_lines(std::istream& in, const std::string& source,
                                           std::size_t* bio_warnings) {
  std::size_t warnings = 0;
  auto out = parse_lines(in, source, [&warnings](const json& record) {
    RecordHead head = read_head(record);
    std::vector<Tag> tags;
    for (const auto& t : record.at("tags")) {
      const auto tag = parse_tag(t.get<std::string>());
      if (!tag) throw std::invalid_argument("unknown tag " + t.dump());
      tags.push_back(*tag);
    }
    if (tags.size() != head.tokens.size()) {
      throw std::invalid_argument(std::to_string(tags.size()) + " tags for " +
                                  std::to_string(head.tokens.size()) + " tokens");
    }
    for (std::size_t i = 0; i < tags.size(); ++i) {
      if (tags[i] == Tag::I && (i == 0 || tags[i - 1] == Tag::O)) ++warnings;
    }
    return AoweInstance{std::move(head.tokens), head.aspect, std::move(tags)};
  });
  if (warnings > 0) {
    std::clog << "warning: " << source << ": " << warnings << " I tag(s) without an open span\n";
  }
  if (bio_warnings) *bio_warnings = warnings;
  return out;
}

std::vector<AlscInstance> load_alsc_dataset(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_alsc_lines(in, path.string());
}

std::vector<AoweInstance> load_aowe_dataset(const std::filesystem::path& path,
                                            std::size_t* bio_warnings) {
  auto in = open_input(path);
  return parse_aowe_lines(in, path.string(), bio_warnings);
}

std::string to_json_line(const AlscInstance& instance) {
  json record;
  record["tokens"] = instance.tokens;
  record["aspect"] = {instance.aspect.start, instance.aspect.end};
  record["label"] = to_string(instance.label);
  return record.dump();
}

std::string to_json_line(const AoweInstance& instance) {
  json record;
  record["tokens"] = instance.tokens;
  record["aspect"] = {instance.aspect.start, instance.aspect.end};
  std::vector<std::string> tags;
  for (Tag t : instance.tags) tags.emplace_back(1, to_char(t));
  record["tags"] = tags;
  return record.dump();
}

namespace {

template <typename Instance>
void save_lines(const std::filesystem::path& path, const std::vector<Instance>& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& instance : data) out << to_json_line(instance) << '\n';
}

}  // namespace

void save_alsc_dataset(const std::filesystem::path& path, const std::vector<AlscInstance>& data) {
  save_lines(path, data);
}

void save_aowe_dataset(const std::filesystem::path& path, const std::vector<AoweInstance>& data) {
  save_lines(path, data);
}

// -- vocabulary -------------------------------------------------------------

Vocabulary::Vocabulary() {
  add(kPadToken);
  add(kUnkToken);
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  if (tokens.size() < 2 || tokens[kPad] != kPadToken || tokens[kUnk] != kUnkToken) {
    throw std::invalid_argument("vocabulary must start with the reserved entries");
  }
  for (const auto& t : tokens) {
    if (index_.contains(t)) throw std::invalid_argument("duplicate vocabulary entry " + t);
    add(t);
  }
}

std::size_t Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.try_emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::size_t Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(index(t));
  return ids;
}

Vocabulary build_vocab(const std::vector<const std::vector<AlscInstance>*>& alsc,
                       const std::vector<const std::vector<AoweInstance>*>& aowe) {
  Vocabulary vocab;
  for (const auto* dataset : alsc) {
    for (const auto& instance : *dataset) {
      for (const auto& t : instance.tokens) vocab.add(t);
    }
  }
  for (const auto* dataset : aowe) {
    for (const auto& instance : *dataset) {
      for (const auto& t : instance.tokens) vocab.add(t);
    }
  }
  return vocab;
}

// -- embeddings -------------------------------------------------------------

double EmbeddingCoverage::random_fraction() const {
  const std::size_t total = found + random;
  return total == 0 ? 0.0 : static_cast<double>(random) / static_cast<double>(total);
}

namespace {

void fill_uniform(std::span<double> values, Rng& rng) {
  std::uniform_real_distribution<double> uniform(-0.01, 0.01);
  for (double& v : values) v = uniform(rng);
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

EmbeddingTable random_embeddings(const Vocabulary& vocab, const EmbeddingSpec& spec, Rng& rng) {
  EmbeddingTable table;
  table.word = Tensor(Shape{vocab.size(), spec.word_dim});
  fill_uniform(table.word.values().subspan(spec.word_dim), rng);
  table.position = random_position_table(spec, rng);
  return table;
}

Tensor random_position_table(const EmbeddingSpec& spec, Rng& rng) {
  Tensor position(Shape{spec.max_distance, spec.position_dim}, true);
  fill_uniform(position.values(), rng);
  return position;
}

EmbeddingTable load_pretrained_embeddings(const std::filesystem::path& path,
                                          const Vocabulary& vocab, const EmbeddingSpec& spec,
                                          Rng& rng, EmbeddingCoverage* coverage) {
  EmbeddingTable table = random_embeddings(vocab, spec, rng);
  const std::size_t dim = spec.word_dim;

  // Exact matches win over lowercased ones.
  std::unordered_map<std::string, std::vector<std::size_t>> wanted;
  for (std::size_t i = 2; i < vocab.size(); ++i) {
    wanted[vocab.token(i)].push_back(i);
    const std::string lower = lowercase(vocab.token(i));
    if (lower != vocab.token(i)) wanted[lower].push_back(i);
  }
  std::vector<int> match(vocab.size(), 0);  // 0 none, 1 lowercased, 2 exact

  auto in = open_input(path);
  std::string line;
  std::size_t number = 0;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++number;
    fields.clear();
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
      const std::size_t begin = pos;
      while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
      if (pos > begin) fields.emplace_back(line.data() + begin, pos - begin);
    }
    if (fields.empty()) continue;
    if (fields.size() < dim + 1) {
      throw ParseError(path.string(), number,
                       "expected a token and " + std::to_string(dim) + " values, got " +
                           std::to_string(fields.size()) + " fields");
    }
    const std::size_t token_fields = fields.size() - dim;
    std::string token(fields[0]);
    for (std::size_t k = 1; k < token_fields; ++k) token += " " + std::string(fields[k]);
    auto it = wanted.find(token);
    if (it == wanted.end() || it->second.empty()) continue;

    std::vector<double> vec(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      const std::string_view f = fields[token_fields + k];
      try {
        std::size_t used = 0;
        vec[k] = std::stod(std::string(f), &used);
        if (used != f.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ParseError(path.string(), number, "bad number '" + std::string(f) + "'");
      }
    }
    for (std::size_t index : it->second) {
      const int quality = vocab.token(index) == token ? 2 : 1;
      if (quality <= match[index]) continue;
      match[index] = quality;
      std::copy(vec.begin(), vec.end(), table.word.values().begin() + index * dim);
    }
  }

  EmbeddingCoverage stats;
  for (std::size_t i = 1; i < vocab.size(); ++i) {
    if (match[i]) {
      ++stats.found;
    } else {
      ++stats.random;
    }
  }
  std::clog << "embeddings: " << stats.found << " of " << (stats.found + stats.random)
            << " vocabulary entries found in " << path.filename().string() << " ("
            << 100.0 * stats.random_fraction() << "% randomly initialized)\n";
  if (coverage) *coverage = stats;
  return table;
}

std::vector<std::size_t> position_distances(std::size_t length, const AspectSpan& aspect,
                                            std::size_t max_distance) {
  validate_span(aspect, length);
  std::vector<std::size_t> out(length, 0);
  bool clamped = false;
  for (std::size_t i = 0; i < length; ++i) {
    std::size_t d = 0;
    if (i < aspect.start) {
      d = aspect.start - i;
    } else if (i >= aspect.end) {
      d = i - (aspect.end - 1);
    }
    if (d >= max_distance) {
      d = max_distance - 1;
      clamped = true;
    }
    out[i] = d;
  }
  if (clamped) {
    std::clog << "warning: position distance clamped to " << (max_distance - 1) << '\n';
  }
  return out;
}

// -- batching ---------------------------------------------------------------

std::vector<std::size_t> shuffled_order(std::size_t count, Rng* rng) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (rng) std::shuffle(order.begin(), order.end(), *rng);
  return order;
}

Batch make_batch(const std::vector<const std::vector<std::string>*>& sentences,
                 std::vector<std::size_t> members, const Vocabulary& vocab) {
  Batch batch;
  batch.members = std::move(members);
  for (const auto* s : sentences) batch.length = std::max(batch.length, s->size());
  for (const auto* s : sentences) {
    auto ids = vocab.encode(*s);
    Mask mask(batch.length, 0);
    std::fill_n(mask.begin(), ids.size(), std::uint8_t{1});
    ids.resize(batch.length, Vocabulary::kPad);
    batch.ids.push_back(std::move(ids));
    batch.masks.push_back(std::move(mask));
  }
  return batch;
}

}  // namespace otn
