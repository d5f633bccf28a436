#include "otn/evaluation.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace otn {

using nlohmann::json;

std::vector<Span> decode_bio_spans(const std::vector<Tag>& tags, BioDecoding mode) {
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<Span> spans;
  std::size_t open = kNone;
  auto close = [&](std::size_t end) {
    if (open != kNone) spans.push_back({open, end});
    open = kNone;
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    switch (tags[i]) {
      case Tag::O:
        close(i);
        break;
      case Tag::B:
        close(i);
        open = i;
        break;
      case Tag::I:
        if (open == kNone && mode == BioDecoding::lenient) open = i;
        break;
    }
  }
  close(tags.size());
  return spans;
}

std::vector<Tag> encode_bio_spans(const std::vector<Span>& spans, std::size_t length) {
  std::vector<Tag> tags(length, Tag::O);
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > length) throw std::invalid_argument("span out of range");
    tags[s.start] = Tag::B;
    std::fill(tags.begin() + static_cast<std::ptrdiff_t>(s.start) + 1,
              tags.begin() + static_cast<std::ptrdiff_t>(s.end), Tag::I);
  }
  return tags;
}

namespace {

double ratio(std::size_t num, std::size_t den, std::size_t other_den) {
  if (den == 0) return other_den == 0 ? 1.0 : 0.0;
  return static_cast<double>(num) / static_cast<double>(den);
}

// Harmonic mean of tp/predicted and tp/gold, straight from the counts.
double f1_from_counts(std::size_t tp, std::size_t predicted, std::size_t gold) {
  if (tp == 0) return 0.0;
  return static_cast<double>(2 * tp) / static_cast<double>(predicted + gold);
}

void require_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(a) + " gold vs " +
                                std::to_string(b) + " predicted");
  }
}

}  // namespace

PrfScore prf_from_counts(const SpanCounts& counts) {
  PrfScore s;
  s.counts = counts;
  s.precision = ratio(counts.true_positive, counts.predicted, counts.gold);
  s.recall = ratio(counts.true_positive, counts.gold, counts.predicted);
  // Nothing predicted and nothing to find counts as perfect.
  s.f1 = counts.predicted == 0 && counts.gold == 0
             ? 1.0
             : f1_from_counts(counts.true_positive, counts.predicted, counts.gold);
  return s;
}

PrfScore span_prf(const std::vector<std::vector<Span>>& gold,
                  const std::vector<std::vector<Span>>& pred) {
  require_aligned(gold.size(), pred.size(), "span_prf");
  SpanCounts counts;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    // Both lists are sorted and duplicate-free coming out of the decoder;
    // sort copies so arbitrary callers get set semantics too.
    auto g = gold[i];
    auto p = pred[i];
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    std::vector<Span> common;
    std::set_intersection(g.begin(), g.end(), p.begin(), p.end(), std::back_inserter(common));
    counts.true_positive += common.size();
    counts.gold += g.size();
    counts.predicted += p.size();
  }
  return prf_from_counts(counts);
}

double alsc_accuracy(const std::vector<Sentiment>& gold, const std::vector<Sentiment>& pred) {
  require_aligned(gold.size(), pred.size(), "alsc_accuracy");
  if (gold.empty()) throw std::invalid_argument("alsc_accuracy: no instances");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i];
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

std::array<ClassScore, kNumSentiments> per_class_scores(const std::vector<Sentiment>& gold,
                                                        const std::vector<Sentiment>& pred) {
  require_aligned(gold.size(), pred.size(), "macro_f1");
  if (gold.empty()) throw std::invalid_argument("macro_f1: no instances");
  std::array<std::size_t, kNumSentiments> tp{}, gold_count{}, pred_count{};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = static_cast<std::size_t>(gold[i]);
    const auto p = static_cast<std::size_t>(pred[i]);
    ++gold_count[g];
    ++pred_count[p];
    if (g == p) ++tp[g];
  }
  std::array<ClassScore, kNumSentiments> scores{};
  for (std::size_t c = 0; c < kNumSentiments; ++c) {
    auto& s = scores[c];
    s.precision = pred_count[c] ? static_cast<double>(tp[c]) / static_cast<double>(pred_count[c]) : 0.0;
    s.recall = gold_count[c] ? static_cast<double>(tp[c]) / static_cast<double>(gold_count[c]) : 0.0;
    s.f1 = f1_from_counts(tp[c], pred_count[c], gold_count[c]);
  }
  return scores;
}

double macro_f1(const std::vector<Sentiment>& gold, const std::vector<Sentiment>& pred) {
  const auto scores = per_class_scores(gold, pred);
  double total = 0.0;
  for (const auto& s : scores) total += s.f1;
  return total / static_cast<double>(kNumSentiments);
}

AlscReport make_alsc_report(const std::vector<Sentiment>& gold, const std::vector<Sentiment>& pred) {
  AlscReport r;
  r.count = gold.size();
  r.accuracy = alsc_accuracy(gold, pred);
  r.per_class = per_class_scores(gold, pred);
  r.macro_f1 = macro_f1(gold, pred);
  return r;
}

json to_json(const EvalReport& report) {
  json out = json::object();
  if (report.alsc) {
    const auto& a = *report.alsc;
    json classes = json::object();
    for (std::size_t c = 0; c < kNumSentiments; ++c) {
      classes[to_string(static_cast<Sentiment>(c))] = {{"precision", a.per_class[c].precision},
                                                      {"recall", a.per_class[c].recall},
                                                      {"f1", a.per_class[c].f1}};
    }
    out["alsc"] = {{"count", a.count},
                   {"accuracy", a.accuracy},
                   {"macro_f1", a.macro_f1},
                   {"per_class", classes}};
  }
  if (report.aowe) {
    const auto& o = *report.aowe;
    out["aowe"] = {{"precision", o.precision},
                   {"recall", o.recall},
                   {"f1", o.f1},
                   {"true_positive", o.counts.true_positive},
                   {"predicted", o.counts.predicted},
                   {"gold", o.counts.gold}};
  }
  return out;
}

std::string format_table(const EvalReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  if (report.alsc) {
    const auto& a = *report.alsc;
    out << "ALSC (" << a.count << " instances)\n"
        << "  accuracy  " << 100.0 * a.accuracy << "\n"
        << "  macro-F1  " << 100.0 * a.macro_f1 << "\n";
    for (std::size_t c = 0; c < kNumSentiments; ++c) {
      out << "  " << std::left << std::setw(9) << to_string(static_cast<Sentiment>(c)) << std::right
          << " P " << std::setw(6) << 100.0 * a.per_class[c].precision << "  R " << std::setw(6)
          << 100.0 * a.per_class[c].recall << "  F1 " << std::setw(6) << 100.0 * a.per_class[c].f1
          << "\n";
    }
  }
  if (report.aowe) {
    const auto& o = *report.aowe;
    out << "AOWE (" << o.counts.gold << " gold spans, " << o.counts.predicted << " predicted, "
        << o.counts.true_positive << " exact matches)\n"
        << "  precision " << 100.0 * o.precision << "\n"
        << "  recall    " << 100.0 * o.recall << "\n"
        << "  F1        " << 100.0 * o.f1 << "\n";
  }
  return out.str();
}

}  // namespace otn
