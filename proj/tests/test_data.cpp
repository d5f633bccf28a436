#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "otn/data.hpp"
#include "otn/training.hpp"

using namespace otn;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kPastaSentence = {"Waiters", "are", "very", "friendly", "and", "the", "pasta",
                                          "is",      "out", "of",   "this",     "world", "."};

fs::path temp_file(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / ("otn_test_" + name);
  std::ofstream(p) << content;
  return p;
}

}  // namespace

TEST(Data, ParsesAlscLines) {
  std::istringstream in(
      R"({"tokens": ["the", "food", "was", "great"], "aspect": [1, 2], "label": "positive"})"
      "\n\n"
      R"({"tokens": ["slow", "service"], "aspect": [1, 2], "label": "negative"})"
      "\n");
  auto data = parse_alsc_lines(in, "mem");
  ASSERT_EQ(data.size(), 2u);
  EXPECT_EQ(data[0].aspect, (AspectSpan{1, 2}));
  EXPECT_EQ(data[0].label, Sentiment::positive);
  EXPECT_EQ(data[1].tokens[0], "slow");
}

TEST(Data, EmptyFileGivesEmptyList) {
  EXPECT_TRUE(load_alsc_dataset(temp_file("empty.jsonl", "")).empty());
}

TEST(Data, AspectPastEndIsRejectedWithLineNumber) {
  std::istringstream in(
      R"({"tokens": ["a"], "aspect": [0, 1], "label": "neutral"})"
      "\n"
      R"({"tokens": ["a", "b"], "aspect": [1, 3], "label": "neutral"})"
      "\n");
  try {
    parse_alsc_lines(in, "mem");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Data, MalformedJsonAndUnknownLabelAreParseErrors) {
  std::istringstream broken(R"({"tokens": ["a"], "aspect": [0, 1)");
  EXPECT_THROW(parse_alsc_lines(broken, "mem"), ParseError);
  std::istringstream label(R"({"tokens": ["a"], "aspect": [0, 1], "label": "mixed"})");
  EXPECT_THROW(parse_alsc_lines(label, "mem"), ParseError);
  std::istringstream empty_span(R"({"tokens": ["a"], "aspect": [0, 0], "label": "neutral"})");
  EXPECT_THROW(parse_alsc_lines(empty_span, "mem"), ParseError);
}

TEST(Data, PastaSentenceTags) {
  AoweInstance inst{kPastaSentence, {6, 7}, {}};
  for (int i = 0; i < 8; ++i) inst.tags.push_back(Tag::O);
  inst.tags.insert(inst.tags.end(), {Tag::B, Tag::I, Tag::I, Tag::I, Tag::O});
  std::istringstream in(to_json_line(inst));
  auto parsed = parse_aowe_lines(in, "mem");
  ASSERT_EQ(parsed.size(), 1u);
  EXPECT_EQ(parsed[0], inst);
  std::string tags;
  for (Tag t : parsed[0].tags) tags += to_char(t);
  EXPECT_EQ(tags, "OOOOOOOOBIIIO");
}

TEST(Data, TagCountMismatchIsRejected) {
  std::istringstream in(R"({"tokens": ["a", "b"], "aspect": [0, 1], "tags": ["O"]})");
  EXPECT_THROW(parse_aowe_lines(in, "mem"), ParseError);
}

TEST(Data, IAfterOIsAWarningNotAnError) {
  std::istringstream in(
      R"({"tokens": ["a", "b", "c"], "aspect": [0, 1], "tags": ["O", "O", "I"]})"
      "\n"
      R"({"tokens": ["a", "b"], "aspect": [0, 1], "tags": ["I", "O"]})"
      "\n");
  std::size_t warnings = 0;
  auto data = parse_aowe_lines(in, "mem", &warnings);
  EXPECT_EQ(data.size(), 2u);
  EXPECT_EQ(warnings, 2u);
}

TEST(Data, RoundTripThroughFiles) {
  std::vector<AlscInstance> alsc = {{{"x", "y"}, {0, 2}, Sentiment::neutral}, {{"z"}, {0, 1}, Sentiment::negative}};
  std::vector<AoweInstance> aowe = {{{"p", "q", "r"}, {2, 3}, {Tag::B, Tag::I, Tag::O}}};
  const fs::path a = fs::temp_directory_path() / "otn_test_rt_alsc.jsonl";
  const fs::path b = fs::temp_directory_path() / "otn_test_rt_aowe.jsonl";
  save_alsc_dataset(a, alsc);
  save_aowe_dataset(b, aowe);
  EXPECT_EQ(load_alsc_dataset(a), alsc);
  EXPECT_EQ(load_aowe_dataset(b), aowe);
}

TEST(Data, BundledFixturesLoad) {
  const auto dir = testing_util::data_dir();
  EXPECT_EQ(load_alsc_dataset(dir / "overfit_alsc.jsonl").size(), 20u);
  EXPECT_EQ(load_aowe_dataset(dir / "overfit_aowe.jsonl").size(), 20u);
  EXPECT_EQ(load_alsc_dataset(dir / "synth_alsc_train.jsonl").size(), 250u);
  EXPECT_EQ(load_aowe_dataset(dir / "synth_aowe_train.jsonl").size(), 250u);
  EXPECT_EQ(load_alsc_dataset(dir / "synth_alsc_test.jsonl").size(), 200u);
}

TEST(Vocab, ReservedEntriesAndFirstOccurrenceOrder) {
  std::vector<AlscInstance> data = {{{"a", "b", "a"}, {0, 1}, Sentiment::positive}};
  Vocabulary v = build_vocab({&data}, {});
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<pad>", "<unk>", "a", "b"}));
  EXPECT_EQ(v.index("zzz"), Vocabulary::kUnk);
  EXPECT_EQ(v.encode({"b", "q"}), (std::vector<std::size_t>{3, 1}));
}

TEST(Vocab, UnionOfDatasetsIsDeterministic) {
  std::vector<AlscInstance> a = {{{"x", "y"}, {0, 1}, Sentiment::positive}};
  std::vector<AoweInstance> b = {{{"y", "z"}, {0, 1}, {Tag::O, Tag::B}}};
  Vocabulary v1 = build_vocab({&a}, {&b});
  Vocabulary v2 = build_vocab({&a}, {&b});
  EXPECT_EQ(v1.tokens(), v2.tokens());
  EXPECT_EQ(v1.size(), 5u);
  EXPECT_TRUE(v1.contains("z"));
}

TEST(Vocab, RebuildFromTokenList) {
  Vocabulary v(std::vector<std::string>{"<pad>", "<unk>", "k"});
  EXPECT_EQ(v.index("k"), 2u);
  EXPECT_THROW(Vocabulary(std::vector<std::string>{"k"}), std::invalid_argument);
  EXPECT_THROW(Vocabulary(std::vector<std::string>{"<pad>", "<unk>", "k", "k"}), std::invalid_argument);
}

TEST(Embeddings, FileRowsCopiedExactlyAndPaddingZero) {
  Vocabulary v(std::vector<std::string>{"<pad>", "<unk>", "Food", "great", "new york", "missing"});
  const fs::path p = temp_file("emb.txt",
                               "food 0.125 -0.5 3\n"
                               "Food 1.5 2.5 -3.25\n"
                               "great 0.1 0.2 0.3\n"
                               "new york 7 8 9\n");
  Rng rng(1);
  EmbeddingCoverage cov;
  auto table = load_pretrained_embeddings(p, v, {3, 2, 8}, rng, &cov);
  auto row = [&](std::size_t i) {
    return std::vector<double>(table.word.values().begin() + 3 * i, table.word.values().begin() + 3 * i + 3);
  };
  EXPECT_EQ(row(0), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(row(2), (std::vector<double>{1.5, 2.5, -3.25}));  // exact match beats lowercase
  EXPECT_EQ(row(3), (std::vector<double>{0.1, 0.2, 0.3}));
  EXPECT_EQ(row(4), (std::vector<double>{7, 8, 9}));
  for (double x : row(5)) EXPECT_LE(std::abs(x), 0.01);
  for (double x : row(1)) EXPECT_LE(std::abs(x), 0.01);
  EXPECT_EQ(cov.found, 3u);
  EXPECT_EQ(cov.random, 2u);
  EXPECT_FALSE(table.word.requires_grad());
  EXPECT_TRUE(table.position.requires_grad());
  EXPECT_EQ(table.position.shape(), (Shape{8, 2}));
  for (double x : table.position.values()) EXPECT_LE(std::abs(x), 0.01);
}

TEST(Embeddings, LowercaseFallback) {
  Vocabulary v(std::vector<std::string>{"<pad>", "<unk>", "Pasta"});
  const fs::path p = temp_file("emb_lower.txt", "pasta 1 2\n");
  Rng rng(1);
  auto table = load_pretrained_embeddings(p, v, {2, 2, 4}, rng);
  EXPECT_EQ(table.word.at(2, 0), 1.0);
  EXPECT_EQ(table.word.at(2, 1), 2.0);
}

TEST(Embeddings, ShortLineIsParseErrorWithLineNumber) {
  Vocabulary v(std::vector<std::string>{"<pad>", "<unk>", "a"});
  const fs::path p = temp_file("emb_bad.txt", "a 1 2 3\nb 1 2\n");
  Rng rng(1);
  try {
    load_pretrained_embeddings(p, v, {3, 2, 4}, rng);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Positions, SpanDistances) {
  EXPECT_EQ(position_distances(5, {2, 3}), (std::vector<std::size_t>{2, 1, 0, 1, 2}));
  EXPECT_EQ(position_distances(6, {2, 4}), (std::vector<std::size_t>{2, 1, 0, 0, 1, 2}));
  EXPECT_EQ(position_distances(3, {0, 3}), (std::vector<std::size_t>{0, 0, 0}));
}

TEST(Positions, MatchExhaustiveMinimumOverSpan) {
  for (std::size_t n = 1; n <= 9; ++n)
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t e = s + 1; e <= n; ++e) {
        auto d = position_distances(n, {s, e});
        for (std::size_t i = 0; i < n; ++i) {
          std::size_t best = n;
          for (std::size_t a = s; a < e; ++a) best = std::min(best, i > a ? i - a : a - i);
          EXPECT_EQ(d[i], best);
        }
      }
}

TEST(Positions, ClampAtTableSize) {
  auto d = position_distances(10, {0, 1}, 4);
  EXPECT_EQ(d.back(), 3u);
  EXPECT_EQ(d[2], 2u);
}

TEST(Batching, SizesPaddingAndMasks) {
  std::vector<AlscInstance> data;
  for (std::size_t i = 0; i < 33; ++i) {
    data.push_back({std::vector<std::string>(1 + i % 4, "w"), {0, 1}, Sentiment::neutral});
  }
  Vocabulary v = build_vocab({&data}, {});
  Rng rng(5);
  auto batches = batchify(data, v, 16, &rng);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].members.size(), 16u);
  EXPECT_EQ(batches[1].members.size(), 16u);
  EXPECT_EQ(batches[2].members.size(), 1u);
  std::set<std::size_t> seen;
  for (const auto& b : batches) {
    for (std::size_t k = 0; k < b.members.size(); ++k) {
      const auto& inst = data[b.members[k]];
      seen.insert(b.members[k]);
      ASSERT_EQ(b.ids[k].size(), b.length);
      for (std::size_t i = 0; i < b.length; ++i) {
        EXPECT_EQ(b.masks[k][i] != 0, i < inst.tokens.size());
        if (i >= inst.tokens.size()) EXPECT_EQ(b.ids[k][i], Vocabulary::kPad);
      }
    }
  }
  EXPECT_EQ(seen.size(), 33u);
}

TEST(Batching, SeededOrderIsReproducible) {
  std::vector<AlscInstance> data(20, {{"w"}, {0, 1}, Sentiment::neutral});
  Vocabulary v = build_vocab({&data}, {});
  Rng a(3), b(3);
  auto x = batchify(data, v, 4, &a);
  auto y = batchify(data, v, 4, &b);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i].members, y[i].members);
  EXPECT_THROW(batchify(data, v, 0, &a), ConfigError);
}

TEST(Split, SizesAndPartition) {
  EXPECT_EQ(split_sizes(10, 0.2), (std::pair<std::size_t, std::size_t>{8, 2}));
  EXPECT_EQ(split_sizes(7, 0.2), (std::pair<std::size_t, std::size_t>{6, 1}));
  std::vector<AlscInstance> data;
  for (std::size_t i = 0; i < 10; ++i) data.push_back({{"t" + std::to_string(i)}, {0, 1}, Sentiment::neutral});
  Rng a(8), b(8);
  auto [train, valid] = split_validation(data, 0.2, a);
  auto [train2, valid2] = split_validation(data, 0.2, b);
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(valid.size(), 2u);
  EXPECT_EQ(train, train2);
  EXPECT_EQ(valid, valid2);
  std::set<std::string> all;
  for (const auto& x : train) all.insert(x.tokens[0]);
  for (const auto& x : valid) all.insert(x.tokens[0]);
  EXPECT_EQ(all.size(), 10u);
  EXPECT_THROW(split_validation(data, 1.0, a), ConfigError);
}
