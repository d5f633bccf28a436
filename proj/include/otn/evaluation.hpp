#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "otn/data.hpp"

namespace otn {

// Opinion span [start, end) over token positions.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  auto operator<=>(const Span&) const = default;
};

enum class BioDecoding {
  lenient,  // an I with no open span opens one
  strict,   // an I with no open span is dropped
};

// Spans come out sorted and disjoint.
std::vector<Span> decode_bio_spans(const std::vector<Tag>& tags,
                                   BioDecoding mode = BioDecoding::lenient);
std::vector<Tag> encode_bio_spans(const std::vector<Span>& spans, std::size_t length);

struct SpanCounts {
  std::size_t true_positive = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;

  bool operator==(const SpanCounts&) const = default;
};

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  SpanCounts counts;
};

// P, R, F1 from counts. With nothing predicted P is 1 if there is no gold
// either and 0 otherwise (R mirrors this). F1 is 2 tp / (predicted + gold),
// 0 without true positives and 1 when there is nothing to predict or find.
PrfScore prf_from_counts(const SpanCounts& counts);

// Exact-boundary span matching, micro-averaged over instances.
PrfScore span_prf(const std::vector<std::vector<Span>>& gold,
                  const std::vector<std::vector<Span>>& pred);

double alsc_accuracy(const std::vector<Sentiment>& gold, const std::vector<Sentiment>& pred);

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Per-class scores; a class with no gold and no predictions scores 0.
std::array<ClassScore, kNumSentiments> per_class_scores(const std::vector<Sentiment>& gold,
                                                        const std::vector<Sentiment>& pred);
double macro_f1(const std::vector<Sentiment>& gold, const std::vector<Sentiment>& pred);

struct AlscReport {
  std::size_t count = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<ClassScore, kNumSentiments> per_class{};
};

struct EvalReport {
  std::optional<AlscReport> alsc;
  std::optional<PrfScore> aowe;
};

AlscReport make_alsc_report(const std::vector<Sentiment>& gold, const std::vector<Sentiment>& pred);

nlohmann::json to_json(const EvalReport& report);
std::string format_table(const EvalReport& report);

}  // namespace otn
