#include <gtest/gtest.h>

#include "component_checks.hpp"
#include "otn/evaluation.hpp"

using namespace otn;

namespace {

std::vector<Tag> tags(const std::string& s) {
  std::vector<Tag> out;
  for (char c : s) out.push_back(*parse_tag(std::string(1, c)));
  return out;
}

using S = Sentiment;

}  // namespace

TEST(Decode, LenientAndStrict) {
  EXPECT_EQ(decode_bio_spans(tags("OBIOBOI")), (std::vector<Span>{{1, 3}, {4, 5}, {6, 7}}));
  EXPECT_EQ(decode_bio_spans(tags("OBIOBOI"), BioDecoding::strict), (std::vector<Span>{{1, 3}, {4, 5}}));
  EXPECT_EQ(decode_bio_spans(tags("IIBB")), (std::vector<Span>{{0, 2}, {2, 3}, {3, 4}}));
  EXPECT_EQ(decode_bio_spans(tags("IIBB"), BioDecoding::strict), (std::vector<Span>{{2, 3}, {3, 4}}));
  EXPECT_TRUE(decode_bio_spans(tags("OOO")).empty());
  EXPECT_TRUE(decode_bio_spans({}).empty());
  EXPECT_EQ(decode_bio_spans(tags("BIII")), (std::vector<Span>{{0, 4}}));
}

TEST(Decode, OpinionSpanOfPastaExample) {
  EXPECT_EQ(decode_bio_spans(tags("OOOOOOOOBIIIO")), (std::vector<Span>{{8, 12}}));
}

TEST(Encode, RoundTripsAndRejectsBadSpans) {
  const std::vector<Span> spans{{0, 1}, {2, 5}};
  EXPECT_EQ(encode_bio_spans(spans, 6), tags("BOBIIO"));
  EXPECT_EQ(decode_bio_spans(encode_bio_spans(spans, 6)), spans);
  EXPECT_THROW(encode_bio_spans({{3, 3}}, 5), std::invalid_argument);
  EXPECT_THROW(encode_bio_spans({{3, 6}}, 5), std::invalid_argument);
}

TEST(Prf, EdgeCases) {
  auto none = prf_from_counts({0, 0, 4});
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
  auto empty = prf_from_counts({0, 0, 0});
  EXPECT_EQ(empty.precision, 1.0);
  EXPECT_EQ(empty.recall, 1.0);
  EXPECT_EQ(empty.f1, 1.0);
  auto spurious = prf_from_counts({0, 3, 0});
  EXPECT_EQ(spurious.precision, 0.0);
  EXPECT_EQ(spurious.recall, 0.0);
  EXPECT_EQ(spurious.f1, 0.0);
  auto half = prf_from_counts({1, 2, 2});
  EXPECT_EQ(half.precision, 0.5);
  EXPECT_EQ(half.recall, 0.5);
  EXPECT_EQ(half.f1, 0.5);
}

TEST(Prf, ExactBoundariesOnly) {
  auto s = span_prf({{{1, 3}}, {{0, 1}, {4, 6}}}, {{{1, 2}}, {{0, 1}, {4, 6}, {7, 8}}});
  EXPECT_EQ(s.counts, (SpanCounts{2, 4, 3}));
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.f1, 4.0 / 7.0);
  EXPECT_THROW(span_prf({{}}, {}), std::invalid_argument);
}

TEST(Oracle, SpanMetricsAgreeExactly) { EXPECT_EQ(checks::span_metric_mismatches(1000), 0u); }
TEST(Oracle, SentimentMetricsAgreeExactly) { EXPECT_EQ(checks::sentiment_metric_mismatches(1000), 0u); }

TEST(Sentiment, AccuracyAndMacroF1) {
  const std::vector<S> gold{S::positive, S::positive, S::negative, S::neutral};
  const std::vector<S> pred{S::positive, S::negative, S::negative, S::positive};
  EXPECT_DOUBLE_EQ(alsc_accuracy(gold, pred), 0.5);
  const auto pc = per_class_scores(gold, pred);
  EXPECT_DOUBLE_EQ(pc[0].precision, 0.5);
  EXPECT_DOUBLE_EQ(pc[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(pc[2].f1, 2.0 / 3.0);
  EXPECT_EQ(pc[1].f1, 0.0);
  EXPECT_DOUBLE_EQ(macro_f1(gold, pred), (0.5 + 0.0 + 2.0 / 3.0) / 3.0);
}

TEST(Sentiment, AbsentClassScoresZero) {
  const std::vector<S> all{S::positive, S::positive};
  const auto pc = per_class_scores(all, all);
  EXPECT_EQ(pc[0].f1, 1.0);
  EXPECT_EQ(pc[1].f1, 0.0);
  EXPECT_EQ(pc[1].precision, 0.0);
  EXPECT_DOUBLE_EQ(macro_f1(all, all), 1.0 / 3.0);
}

TEST(Sentiment, InputValidation) {
  EXPECT_THROW(alsc_accuracy({}, {}), std::invalid_argument);
  EXPECT_THROW(macro_f1({}, {}), std::invalid_argument);
  EXPECT_THROW(alsc_accuracy({S::positive}, {S::positive, S::neutral}), std::invalid_argument);
}

TEST(Report, JsonAndTable) {
  EvalReport r;
  r.alsc = make_alsc_report({S::positive, S::negative}, {S::positive, S::positive});
  r.aowe = span_prf({{{0, 1}}}, {{{0, 1}}});
  const auto j = to_json(r);
  EXPECT_DOUBLE_EQ(j["alsc"]["accuracy"].get<double>(), 0.5);
  EXPECT_EQ(j["alsc"]["count"], 2);
  EXPECT_DOUBLE_EQ(j["aowe"]["f1"].get<double>(), 1.0);
  const auto table = format_table(r);
  EXPECT_NE(table.find("accuracy  50.00"), std::string::npos);
  EXPECT_NE(table.find("F1        100.00"), std::string::npos);

  EvalReport only_aowe;
  only_aowe.aowe = r.aowe;
  EXPECT_FALSE(to_json(only_aowe).contains("alsc"));
  EXPECT_EQ(format_table(only_aowe).find("ALSC"), std::string::npos);
}
