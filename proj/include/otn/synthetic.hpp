#pragma once
// Lexicon-generated restaurant sentences labeled for both tasks. The target
// aspect's polarity is that of the opinion phrase nearest to it (never tied),
// and that phrase is its only gold opinion span.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "otn/data.hpp"

namespace otn {

struct SyntheticSentence {
  std::vector<std::string> tokens;
  AspectSpan aspect;
  Sentiment label = Sentiment::neutral;
  std::vector<Tag> tags;

  AlscInstance alsc() const { return {tokens, aspect, label}; }
  AoweInstance aowe() const { return {tokens, aspect, tags}; }
};

struct Lexicon {
  std::vector<std::vector<std::string>> aspects;
  std::vector<std::vector<std::string>> positive;
  std::vector<std::vector<std::string>> neutral;
  std::vector<std::vector<std::string>> negative;
  std::vector<std::string> openers;   // sentence starts
  std::vector<std::string> linkers;   // between aspect and a following opinion
  std::vector<std::string> joiners;   // between clauses
  std::vector<std::string> fillers;   // sentence ends

  static const Lexicon& restaurant();
  // Every distinct word, sorted.
  std::vector<std::string> words() const;
};

// Distance in tokens between the closest members of two spans.
std::size_t span_gap(const AspectSpan& a, const AspectSpan& b);

std::vector<SyntheticSentence> generate_sentences(std::size_t count, std::uint64_t seed,
                                                  const Lexicon& lexicon = Lexicon::restaurant());

struct SyntheticBenchmark {
  std::vector<AlscInstance> alsc_train;
  std::vector<AoweInstance> aowe_train;
  std::vector<AlscInstance> alsc_test;
  std::vector<AoweInstance> aowe_test;
};

// Splits train_count sentences into an ALSC-only half and an AOWE-only half;
// the test sentences carry both labels.
SyntheticBenchmark make_benchmark(std::size_t train_count, std::size_t test_count,
                                  std::uint64_t seed);

// Text embedding file ("word v1 ... vD" per line). Words of one lexicon
// category (aspects, each polarity, everything else) scatter around a shared
// random centroid, so similar words get similar vectors.
void write_lexicon_embeddings(const std::filesystem::path& path, const Lexicon& lexicon,
                              std::size_t dim, std::uint64_t seed);

}  // namespace otn
