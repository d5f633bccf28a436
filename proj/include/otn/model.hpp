#pragma once

// Opinion Transmission Network: an attention BiLSTM sentiment classifier and
// a CNN opinion tagger coupled by two transmission paths.
//
//   ALSC  e -> BiLSTM -> H;  h^a_i = W_e [e_i; e_a];  u_i = v_u . tanh(h^a_i + b_u)
//         alpha = softmax(u);  r_a = H^T alpha
//   AOWE  e -> CNN -> C;  r^o_i = [c_i; word(aspect)]  (++ h^a_i with ALSC->AOWE)
//         y_i = softmax(W_o1 relu(W_o2 r^o_i) + b_o)
//   AOWE->ALSC  p = softmax(Y W_trans);  r_opinion = H^T p
//         y = softmax(W_a [r_a; r_opinion] + b_a)   (base: W_c r_a + b_c)
//
// Weight matrices are stored input-major (in x out) so a row vector times
// the matrix is the layer.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "otn/data.hpp"
#include "otn/encoders.hpp"
#include "otn/tensor.hpp"

namespace otn {

struct ModelDims {
  EmbeddingSpec embedding;
  std::size_t lstm_hidden = 200;  // per direction
  std::size_t attention_dim = 400;
  CnnSpec cnn;
  std::size_t tagger_hidden = 300;

  std::size_t token_dim() const { return embedding.word_dim + embedding.position_dim; }
  std::size_t context_dim() const { return 2 * lstm_hidden; }
  std::size_t tagger_input_dim(bool enriched) const {
    return cnn.output_channels() + embedding.word_dim + (enriched ? attention_dim : 0);
  }
};

struct ModelConfig {
  bool enable_aowe2alsc = true;
  bool enable_alsc2aowe = true;
  bool enable_alsc_task = true;
  bool enable_aowe_task = true;
  double dropout = 0.5;
  ModelDims dims;

  // Throws ConfigError when no task is enabled or a value is out of range.
  void validate() const;
};

// Compact widths for tests and quick experiments.
ModelDims small_dims(std::size_t word_dim = 16);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct OtnParams {
  EmbeddingTable embeddings;
  BiLstmParams lstm;
  CnnStackParams cnn;
  Tensor attention_weight;  // W_e: 2*token_dim x attention_dim
  Tensor attention_bias;    // b_u
  Tensor attention_vector;  // v_u
  Tensor joint_classifier_weight;  // W_a: 2*context_dim x 3
  Tensor joint_classifier_bias;    // b_a
  Tensor base_classifier_weight;   // W_c: context_dim x 3
  Tensor base_classifier_bias;     // b_c
  Tensor tagger_hidden_weight;     // W_o2: tagger_input_dim x tagger_hidden
  Tensor tagger_output_weight;     // W_o1: tagger_hidden x 3
  Tensor tagger_bias;              // b_o
  Tensor transmission_weight;      // W_trans: 3 x 1

  // Every tensor, frozen word table first, in checkpoint order.
  std::vector<NamedTensor> all() const;
  // Tensors updated by the optimizer (all but the word table).
  std::vector<NamedTensor> trainable() const;
};

OtnParams init_params(const ModelConfig& config, EmbeddingTable embeddings, Rng& rng);

// Values of every trainable tensor, for best-epoch bookkeeping.
using ParamSnapshot = std::vector<std::vector<double>>;
ParamSnapshot snapshot(const OtnParams& params);
void restore(const OtnParams& params, const ParamSnapshot& snap);

// -- components ---------------------------------------------------------------

struct SentenceInput {
  std::vector<std::size_t> ids;
  AspectSpan aspect;
  Mask mask;
};

SentenceInput make_input(const Vocabulary& vocab, const std::vector<std::string>& tokens,
                         const AspectSpan& aspect);

struct AlscAttention {
  Tensor alpha;     // n
  Tensor features;  // n x attention_dim, the h^a_i rows
};

// h^a_i for every position.
Tensor attention_features(Tape& tape, const Tensor& tokens, const Tensor& aspect,
                          const OtnParams& params);
AlscAttention alsc_attention(Tape& tape, const Tensor& tokens, const Tensor& aspect,
                             const Mask& mask, const OtnParams& params);
// Attention weights from precomputed features.
Tensor attention_scores_softmax(Tape& tape, const Tensor& features, const Mask& mask,
                                const OtnParams& params);

// H^T w; w must sum to one.
Tensor alsc_context_pool(Tape& tape, const Tensor& context, const Tensor& weights);

Tensor aowe_word_repr(Tape& tape, const Tensor& cnn_features, const Tensor& aspect_word);
Tensor alsc2aowe_enrich(Tape& tape, const Tensor& word_repr, const Tensor& attention_features);
Tensor aowe_classify(Tape& tape, const Tensor& word_repr, const OtnParams& params);

struct OpinionAttention {
  Tensor p;                     // n
  Tensor opinion_representation;  // context_dim
};
OpinionAttention aowe2alsc_attention(Tape& tape, const Tensor& tag_probs,
                                     const Tensor& transmission_weight, const Mask& mask,
                                     const Tensor& context);

// Output dropout, then the joint classifier when r_opinion is given and the
// base classifier otherwise.
Tensor alsc_classify(Tape& tape, const Tensor& r_a, const std::optional<Tensor>& r_opinion,
                     const OtnParams& params, double dropout_p, Mode mode, Rng& rng);

// -- whole network --------------------------------------------------------------

// Independent dropout streams per module, so the joint network and the
// two base modules consume identical random numbers.
struct DropoutStreams {
  Rng alsc;
  Rng aowe;

  explicit DropoutStreams(std::uint64_t seed = 0);
};

struct ForwardRequest {
  bool alsc = true;
  bool aowe = true;
};

struct OtnOutput {
  Tensor alsc_probs;  // 3; undefined unless requested
  Tensor tag_probs;   // n x 3; undefined unless requested or needed by AOWE->ALSC
  Tensor alpha;       // undefined unless the ALSC head ran
  Tensor p;           // undefined unless AOWE->ALSC ran
};

OtnOutput forward_joint(Tape& tape, const SentenceInput& input, const OtnParams& params,
                        const ModelConfig& config, Mode mode, DropoutStreams& streams,
                        ForwardRequest request = {});

struct BaseAlscOutput {
  Tensor probs;
  Tensor alpha;
};
BaseAlscOutput base_alsc_forward(Tape& tape, const SentenceInput& input,
                                 const OtnParams& params, double dropout_p, Mode mode,
                                 Rng& rng);
Tensor base_aowe_forward(Tape& tape, const SentenceInput& input, const OtnParams& params,
                         double dropout_p, Mode mode, Rng& rng);

// -- inference ----------------------------------------------------------------

struct Prediction {
  std::optional<Sentiment> sentiment;
  std::vector<double> sentiment_probs;
  std::vector<Tag> tags;
  std::vector<double> alpha;
  std::vector<double> p;
};

// Eval-mode forward on one sentence; argmax decisions.
Prediction predict(const SentenceInput& input, const OtnParams& params, const ModelConfig& config,
                   ForwardRequest request = {});

// -- checkpoints ----------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ModelConfig config;
  Vocabulary vocab;
  OtnParams params;
  nlohmann::json extra;  // free-form run metadata
};

// Layout: "OTN-CHECKPOINT <version>\n", the byte length of a JSON header on
// its own line, the header (config, vocabulary, tensor names and shapes,
// extra), then every tensor's values as little-endian float64 in header
// order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace otn
