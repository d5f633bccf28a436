#pragma once

// Datasets for the two tasks, vocabulary, pretrained embeddings and
// aspect-relative positions.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "otn/tensor.hpp"

namespace otn {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Tokens [start, end) of a sentence.
struct AspectSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool operator==(const AspectSpan&) const = default;
};

enum class Sentiment : std::uint8_t { positive = 0, neutral = 1, negative = 2 };
inline constexpr std::size_t kNumSentiments = 3;

// Integer values are the class labels of the tagging loss.
enum class Tag : std::uint8_t { O = 0, B = 1, I = 2 };
inline constexpr std::size_t kNumTags = 3;

std::string to_string(Sentiment s);
std::optional<Sentiment> parse_sentiment(const std::string& s);
char to_char(Tag t);
std::optional<Tag> parse_tag(const std::string& s);

struct AlscInstance {
  std::vector<std::string> tokens;
  AspectSpan aspect;
  Sentiment label = Sentiment::neutral;

  bool operator==(const AlscInstance&) const = default;
};

struct AoweInstance {
  std::vector<std::string> tokens;
  AspectSpan aspect;
  std::vector<Tag> tags;

  bool operator==(const AoweInstance&) const = default;
};

// Throws std::invalid_argument unless 0 <= start < end <= length.
void validate_span(const AspectSpan& span, std::size_t length);

// JSON-lines readers. Malformed lines raise ParseError carrying the 1-based
// line number; blank lines are skipped. An I tag after O (or at position 0)
// is accepted but counted in `bio_warnings` when given.
std::vector<AlscInstance> load_alsc_dataset(const std::filesystem::path& path);
std::vector<AoweInstance> load_aowe_dataset(const std::filesystem::path& path,
                                            std::size_t* bio_warnings = nullptr);
std::vector<AlscInstance> parse_alsc_lines(std::istream& in, const std::string& source);
std::vector<AoweInstance> parse_aowe_lines(std::istream& in, const std::string& source,
                                           std::size_t* bio_warnings = nullptr);

std::string to_json_line(const AlscInstance& instance);
std::string to_json_line(const AoweInstance& instance);
void save_alsc_dataset(const std::filesystem::path& path, const std::vector<AlscInstance>& data);
void save_aowe_dataset(const std::filesystem::path& path, const std::vector<AoweInstance>& data);

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens);  // includes reserved entries

  std::size_t add(const std::string& token);
  // Unknown tokens map to kUnk.
  std::size_t index(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.contains(token); }
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Tokens in first-occurrence order over ALSC data, then AOWE data.
Vocabulary build_vocab(const std::vector<const std::vector<AlscInstance>*>& alsc,
                       const std::vector<const std::vector<AoweInstance>*>& aowe);

struct EmbeddingSpec {
  std::size_t word_dim = 300;
  std::size_t position_dim = 100;
  std::size_t max_distance = 128;
};

// Frozen word vectors and trainable position vectors.
struct EmbeddingTable {
  Tensor word;      // |V| x word_dim, never requires gradients
  Tensor position;  // max_distance x position_dim, trainable
};

struct EmbeddingCoverage {
  std::size_t found = 0;
  std::size_t random = 0;  // vocabulary entries (minus padding) absent from the file

  double random_fraction() const;
};

// Random table: word rows U(-0.01, 0.01) except the zero padding row;
// position rows U(-0.01, 0.01).
EmbeddingTable random_embeddings(const Vocabulary& vocab, const EmbeddingSpec& spec, Rng& rng);
Tensor random_position_table(const EmbeddingSpec& spec, Rng& rng);

// Reads `token v1 ... vD` lines. Vocabulary tokens are matched exactly, then
// lowercased. Lines with fewer than D+1 fields raise ParseError; extra
// leading fields are taken as part of a multi-word token.
EmbeddingTable load_pretrained_embeddings(const std::filesystem::path& path,
                                          const Vocabulary& vocab, const EmbeddingSpec& spec,
                                          Rng& rng, EmbeddingCoverage* coverage = nullptr);

// Distance of each token to the nearest aspect token, clamped to
// max_distance - 1.
std::vector<std::size_t> position_distances(std::size_t length, const AspectSpan& aspect,
                                            std::size_t max_distance = 128);

struct Batch {
  std::vector<std::size_t> members;  // indices into the instance list
  std::size_t length = 0;            // longest member
  std::vector<std::vector<std::size_t>> ids;  // padded with Vocabulary::kPad
  std::vector<Mask> masks;
};

// Shuffles with rng (when non-null), chunks into batches of batch_size and
// pads each batch to its longest sentence. The last batch may be short.
template <typename Instance>
std::vector<Batch> batchify(const std::vector<Instance>& instances, const Vocabulary& vocab,
                            std::size_t batch_size, Rng* rng);

std::vector<std::size_t> shuffled_order(std::size_t count, Rng* rng);
Batch make_batch(const std::vector<const std::vector<std::string>*>& sentences,
                 std::vector<std::size_t> members, const Vocabulary& vocab);

template <typename Instance>
std::vector<Batch> batchify(const std::vector<Instance>& instances, const Vocabulary& vocab,
                            std::size_t batch_size, Rng* rng) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  const auto order = shuffled_order(instances.size(), rng);
  std::vector<Batch> batches;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t end = std::min(order.size(), begin + batch_size);
    std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<const std::vector<std::string>*> sentences;
    for (std::size_t m : members) sentences.push_back(&instances[m].tokens);
    batches.push_back(make_batch(sentences, std::move(members), vocab));
  }
  return batches;
}

}  // namespace otn
