#include "otn/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace otn {

using nlohmann::json;

void ModelConfig::validate() const {
  if (!enable_alsc_task && !enable_aowe_task) throw ConfigError("at least one task must be enabled");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  const auto& d = dims;
  if (d.embedding.word_dim == 0 || d.embedding.position_dim == 0 || d.embedding.max_distance == 0 ||
      d.lstm_hidden == 0 || d.attention_dim == 0 || d.tagger_hidden == 0 ||
      d.cnn.first_channels == 0 || d.cnn.first_kernel == 0) {
    throw ConfigError("model widths must be positive");
  }
  if (d.cnn.parallel_kernels.empty() || d.cnn.parallel_channels == 0 ||
      std::find(d.cnn.parallel_kernels.begin(), d.cnn.parallel_kernels.end(), 0u) !=
          d.cnn.parallel_kernels.end()) {
    throw ConfigError("the second CNN layer needs at least one positive kernel");
  }
  if (d.cnn.upper_layers > 0 && (d.cnn.upper_kernel == 0 || d.cnn.upper_channels == 0)) {
    throw ConfigError("upper CNN layers need positive kernel and width");
  }
}

ModelDims small_dims(std::size_t word_dim) {
  ModelDims d;
  d.embedding = {word_dim, 8, 32};
  d.lstm_hidden = 8;
  d.attention_dim = 12;
  d.cnn.first_channels = 12;
  d.cnn.parallel_channels = 4;
  d.cnn.upper_channels = 12;
  d.cnn.upper_layers = 3;
  d.tagger_hidden = 10;
  return d;
}

json to_json(const ModelConfig& c) {
  const auto& d = c.dims;
  return json{{"model.aowe2alsc", c.enable_aowe2alsc},
              {"model.alsc2aowe", c.enable_alsc2aowe},
              {"model.alsc_task", c.enable_alsc_task},
              {"model.aowe_task", c.enable_aowe_task},
              {"model.dropout", c.dropout},
              {"model.word_dim", d.embedding.word_dim},
              {"model.position_dim", d.embedding.position_dim},
              {"model.max_distance", d.embedding.max_distance},
              {"model.lstm_hidden", d.lstm_hidden},
              {"model.attention_dim", d.attention_dim},
              {"model.cnn_first_kernel", d.cnn.first_kernel},
              {"model.cnn_first_channels", d.cnn.first_channels},
              {"model.cnn_parallel_kernels", d.cnn.parallel_kernels},
              {"model.cnn_parallel_channels", d.cnn.parallel_channels},
              {"model.cnn_upper_kernel", d.cnn.upper_kernel},
              {"model.cnn_upper_channels", d.cnn.upper_channels},
              {"model.cnn_upper_layers", d.cnn.upper_layers},
              {"model.tagger_hidden", d.tagger_hidden}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  auto& d = c.dims;
  auto read = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  read("model.aowe2alsc", c.enable_aowe2alsc);
  read("model.alsc2aowe", c.enable_alsc2aowe);
  read("model.alsc_task", c.enable_alsc_task);
  read("model.aowe_task", c.enable_aowe_task);
  read("model.dropout", c.dropout);
  read("model.word_dim", d.embedding.word_dim);
  read("model.position_dim", d.embedding.position_dim);
  read("model.max_distance", d.embedding.max_distance);
  read("model.lstm_hidden", d.lstm_hidden);
  read("model.attention_dim", d.attention_dim);
  read("model.cnn_first_kernel", d.cnn.first_kernel);
  read("model.cnn_first_channels", d.cnn.first_channels);
  read("model.cnn_parallel_kernels", d.cnn.parallel_kernels);
  read("model.cnn_parallel_channels", d.cnn.parallel_channels);
  read("model.cnn_upper_kernel", d.cnn.upper_kernel);
  read("model.cnn_upper_channels", d.cnn.upper_channels);
  read("model.cnn_upper_layers", d.cnn.upper_layers);
  read("model.tagger_hidden", d.tagger_hidden);
  return c;
}

// -- parameters -----------------------------------------------------------------

namespace {

void append_lstm(std::vector<NamedTensor>& out, const std::string& prefix,
                 const LstmCellParams& cell) {
  out.push_back({prefix + ".W_x", cell.input_weight});
  out.push_back({prefix + ".W_h", cell.recurrent_weight});
  out.push_back({prefix + ".b", cell.bias});
}

void append_conv(std::vector<NamedTensor>& out, const std::string& prefix, const ConvLayer& layer) {
  out.push_back({prefix + ".W", layer.weight});
  out.push_back({prefix + ".b", layer.bias});
}

}  // namespace

std::vector<NamedTensor> OtnParams::all() const {
  std::vector<NamedTensor> out{{"E_word", embeddings.word}, {"E_pos", embeddings.position}};
  append_lstm(out, "lstm.fwd", lstm.forward);
  append_lstm(out, "lstm.bwd", lstm.backward);
  append_conv(out, "cnn.1", cnn.first);
  for (const auto& layer : cnn.parallel) {
    append_conv(out, "cnn.2.k" + std::to_string(layer.kernel), layer);
  }
  for (std::size_t i = 0; i < cnn.upper.size(); ++i) {
    append_conv(out, "cnn." + std::to_string(i + 3), cnn.upper[i]);
  }
  out.push_back({"W_e", attention_weight});
  out.push_back({"b_u", attention_bias});
  out.push_back({"v_u", attention_vector});
  out.push_back({"W_a", joint_classifier_weight});
  out.push_back({"b_a", joint_classifier_bias});
  out.push_back({"W_c", base_classifier_weight});
  out.push_back({"b_c", base_classifier_bias});
  out.push_back({"W_o2", tagger_hidden_weight});
  out.push_back({"W_o1", tagger_output_weight});
  out.push_back({"b_o", tagger_bias});
  out.push_back({"W_trans", transmission_weight});
  return out;
}

std::vector<NamedTensor> OtnParams::trainable() const {
  auto out = all();
  out.erase(out.begin());
  return out;
}

OtnParams init_params(const ModelConfig& config, EmbeddingTable embeddings, Rng& rng) {
  config.validate();
  const ModelDims& d = config.dims;
  if (embeddings.word.dim(1) != d.embedding.word_dim ||
      embeddings.position.dim(0) != d.embedding.max_distance ||
      embeddings.position.dim(1) != d.embedding.position_dim) {
    throw ConfigError("embedding table " + shape_string(embeddings.word.shape()) + " / " +
                      shape_string(embeddings.position.shape()) +
                      " does not match the configured widths");
  }
  embeddings.word.set_requires_grad(false);
  embeddings.position.set_requires_grad(true);

  OtnParams p;
  p.embeddings = std::move(embeddings);
  const std::size_t token = d.token_dim();
  const std::size_t context = d.context_dim();
  p.lstm = init_bilstm(token, d.lstm_hidden, rng);
  p.cnn = init_cnn(token, d.cnn, rng);
  p.attention_weight = glorot_uniform(Shape{2 * token, d.attention_dim}, 2 * token, d.attention_dim, rng);
  p.attention_bias = Tensor(Shape{d.attention_dim}, true);
  p.attention_vector = glorot_uniform(Shape{d.attention_dim}, d.attention_dim, 1, rng);
  p.joint_classifier_weight = glorot_uniform(Shape{2 * context, kNumSentiments}, 2 * context, kNumSentiments, rng);
  p.joint_classifier_bias = Tensor(Shape{kNumSentiments}, true);
  p.base_classifier_weight = glorot_uniform(Shape{context, kNumSentiments}, context, kNumSentiments, rng);
  p.base_classifier_bias = Tensor(Shape{kNumSentiments}, true);
  const std::size_t tagger_in = d.tagger_input_dim(config.enable_alsc2aowe);
  p.tagger_hidden_weight = glorot_uniform(Shape{tagger_in, d.tagger_hidden}, tagger_in, d.tagger_hidden, rng);
  p.tagger_output_weight = glorot_uniform(Shape{d.tagger_hidden, kNumTags}, d.tagger_hidden, kNumTags, rng);
  p.tagger_bias = Tensor(Shape{kNumTags}, true);
  p.transmission_weight = glorot_uniform(Shape{kNumTags, 1}, kNumTags, 1, rng);
  return p;
}

ParamSnapshot snapshot(const OtnParams& params) {
  ParamSnapshot snap;
  for (const auto& p : params.trainable()) {
    snap.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  }
  return snap;
}

void restore(const OtnParams& params, const ParamSnapshot& snap) {
  auto tensors = params.trainable();
  if (tensors.size() != snap.size()) throw std::invalid_argument("snapshot does not match parameters");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto values = tensors[i].tensor.values();
    if (values.size() != snap[i].size()) throw std::invalid_argument("snapshot shape mismatch");
    std::copy(snap[i].begin(), snap[i].end(), values.begin());
  }
}

// -- components -----------------------------------------------------------------

SentenceInput make_input(const Vocabulary& vocab, const std::vector<std::string>& tokens,
                         const AspectSpan& aspect) {
  validate_span(aspect, tokens.size());
  return {vocab.encode(tokens), aspect, Mask(tokens.size(), 1)};
}

Tensor attention_features(Tape& tape, const Tensor& tokens, const Tensor& aspect,
                          const OtnParams& params) {
  const std::size_t n = tokens.dim(0);
  Tensor paired = concat(tape, {tokens, broadcast_rows(tape, aspect, n)});
  return matmul(tape, paired, params.attention_weight);
}

Tensor attention_scores_softmax(Tape& tape, const Tensor& features, const Mask& mask,
                                const OtnParams& params) {
  const std::size_t n = features.dim(0);
  const std::size_t width = params.attention_vector.size();
  Tensor hidden = tanh(tape, add_bias(tape, features, params.attention_bias));
  Tensor scores = matmul(tape, hidden, reshape(tape, params.attention_vector, Shape{width, 1}));
  return masked_softmax(tape, reshape(tape, scores, Shape{n}), mask);
}

AlscAttention alsc_attention(Tape& tape, const Tensor& tokens, const Tensor& aspect,
                             const Mask& mask, const OtnParams& params) {
  AlscAttention out;
  out.features = attention_features(tape, tokens, aspect, params);
  out.alpha = attention_scores_softmax(tape, out.features, mask, params);
  return out;
}

Tensor alsc_context_pool(Tape& tape, const Tensor& context, const Tensor& weights) {
  if (context.rank() != 2 || weights.rank() != 1 || weights.size() != context.dim(0)) {
    throw DimensionError("alsc_context_pool: context " + shape_string(context.shape()) +
                         " with weights " + shape_string(weights.shape()));
  }
  const auto w = weights.values();
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("alsc_context_pool: weights sum to " + std::to_string(total));
  }
  Tensor pooled = matmul(tape, reshape(tape, weights, Shape{1, weights.size()}), context);
  return reshape(tape, pooled, Shape{context.dim(1)});
}

Tensor aowe_word_repr(Tape& tape, const Tensor& cnn_features, const Tensor& aspect_word) {
  return concat(tape, {cnn_features, broadcast_rows(tape, aspect_word, cnn_features.dim(0))});
}

Tensor alsc2aowe_enrich(Tape& tape, const Tensor& word_repr, const Tensor& attention_features) {
  if (word_repr.rank() != 2 || attention_features.rank() != 2 ||
      word_repr.dim(0) != attention_features.dim(0)) {
    throw DimensionError("alsc2aowe_enrich: " + shape_string(word_repr.shape()) + " vs " +
                         shape_string(attention_features.shape()));
  }
  return concat(tape, {word_repr, attention_features});
}

Tensor aowe_classify(Tape& tape, const Tensor& word_repr, const OtnParams& params) {
  if (word_repr.rank() != 2 || word_repr.dim(1) != params.tagger_hidden_weight.dim(0)) {
    throw DimensionError("aowe_classify: representation " + shape_string(word_repr.shape()) +
                         " for W_o2 " + shape_string(params.tagger_hidden_weight.shape()));
  }
  Tensor hidden = relu(tape, matmul(tape, word_repr, params.tagger_hidden_weight));
  Tensor logits = add_bias(tape, matmul(tape, hidden, params.tagger_output_weight), params.tagger_bias);
  return softmax_rows(tape, logits);
}

OpinionAttention aowe2alsc_attention(Tape& tape, const Tensor& tag_probs,
                                     const Tensor& transmission_weight, const Mask& mask,
                                     const Tensor& context) {
  const std::size_t n = tag_probs.dim(0);
  Tensor scores = reshape(tape, matmul(tape, tag_probs, transmission_weight), Shape{n});
  OpinionAttention out;
  out.p = masked_softmax(tape, scores, mask);
  out.opinion_representation = alsc_context_pool(tape, context, out.p);
  return out;
}

Tensor alsc_classify(Tape& tape, const Tensor& r_a, const std::optional<Tensor>& r_opinion,
                     const OtnParams& params, double dropout_p, Mode mode, Rng& rng) {
  const bool joint = r_opinion.has_value();
  Tensor features = joint ? concat(tape, {r_a, *r_opinion}) : r_a;
  features = dropout(tape, features, dropout_p, mode, rng);
  const Tensor& weight = joint ? params.joint_classifier_weight : params.base_classifier_weight;
  const Tensor& bias = joint ? params.joint_classifier_bias : params.base_classifier_bias;
  Tensor logits = matmul(tape, reshape(tape, features, Shape{1, features.size()}), weight);
  return softmax(tape, add_bias(tape, reshape(tape, logits, Shape{bias.size()}), bias));
}

// -- whole network ----------------------------------------------------------------

DropoutStreams::DropoutStreams(std::uint64_t seed) {
  std::seed_seq alsc_seed{seed, std::uint64_t{0xa15c}};
  std::seed_seq aowe_seed{seed, std::uint64_t{0xa0e}};
  alsc.seed(alsc_seed);
  aowe.seed(aowe_seed);
}

OtnOutput forward_joint(Tape& tape, const SentenceInput& input, const OtnParams& params,
                        const ModelConfig& config, Mode mode, DropoutStreams& streams,
                        ForwardRequest request) {
  const bool run_alsc = request.alsc;
  const bool run_tagger = request.aowe || (run_alsc && config.enable_aowe2alsc);
  const bool need_features = run_alsc || (run_tagger && config.enable_alsc2aowe);
  const double p_drop = config.dropout;

  OtnOutput out;
  Tensor context;
  Tensor features;
  if (need_features) {
    EmbeddedSentence e = embed_tokens(tape, input.ids, input.aspect, params.embeddings, p_drop,
                                      mode, streams.alsc);
    if (run_alsc) context = bilstm_forward(tape, e.tokens, input.mask, params.lstm);
    features = attention_features(tape, e.tokens, e.aspect, params);
  }

  if (run_tagger) {
    EmbeddedSentence e = embed_tokens(tape, input.ids, input.aspect, params.embeddings, p_drop,
                                      mode, streams.aowe);
    Tensor cnn = cnn_stack_forward(tape, e.tokens, input.mask, params.cnn);
    Tensor repr = aowe_word_repr(tape, cnn, e.aspect_word);
    if (config.enable_alsc2aowe) repr = alsc2aowe_enrich(tape, repr, features);
    repr = dropout(tape, repr, p_drop, mode, streams.aowe);
    out.tag_probs = aowe_classify(tape, repr, params);
  }

  if (run_alsc) {
    out.alpha = attention_scores_softmax(tape, features, input.mask, params);
    Tensor r_a = alsc_context_pool(tape, context, out.alpha);
    std::optional<Tensor> r_opinion;
    if (config.enable_aowe2alsc) {
      OpinionAttention opinion = aowe2alsc_attention(tape, out.tag_probs, params.transmission_weight,
                                                     input.mask, context);
      out.p = opinion.p;
      r_opinion = opinion.opinion_representation;
    }
    out.alsc_probs = alsc_classify(tape, r_a, r_opinion, params, p_drop, mode, streams.alsc);
  }
  return out;
}

BaseAlscOutput base_alsc_forward(Tape& tape, const SentenceInput& input,
                                 const OtnParams& params, double dropout_p, Mode mode,
                                 Rng& rng) {
  EmbeddedSentence e = embed_tokens(tape, input.ids, input.aspect, params.embeddings, dropout_p,
                                    mode, rng);
  Tensor context = bilstm_forward(tape, e.tokens, input.mask, params.lstm);
  AlscAttention attention = alsc_attention(tape, e.tokens, e.aspect, input.mask, params);
  Tensor r_a = alsc_context_pool(tape, context, attention.alpha);
  return {alsc_classify(tape, r_a, std::nullopt, params, dropout_p, mode, rng), attention.alpha};
}

Tensor base_aowe_forward(Tape& tape, const SentenceInput& input, const OtnParams& params,
                         double dropout_p, Mode mode, Rng& rng) {
  EmbeddedSentence e = embed_tokens(tape, input.ids, input.aspect, params.embeddings, dropout_p,
                                    mode, rng);
  Tensor cnn = cnn_stack_forward(tape, e.tokens, input.mask, params.cnn);
  Tensor repr = dropout(tape, aowe_word_repr(tape, cnn, e.aspect_word), dropout_p, mode, rng);
  return aowe_classify(tape, repr, params);
}

// -- inference ----------------------------------------------------------------

namespace {

template <typename It>
std::size_t argmax(It begin, It end) {
  return static_cast<std::size_t>(std::max_element(begin, end) - begin);
}

}  // namespace

Prediction predict(const SentenceInput& input, const OtnParams& params, const ModelConfig& config,
                   ForwardRequest request) {
  Tape tape;
  DropoutStreams streams;
  OtnOutput out = forward_joint(tape, input, params, config, Mode::eval, streams, request);
  Prediction pred;
  if (out.alsc_probs.defined()) {
    auto probs = out.alsc_probs.values();
    pred.sentiment_probs.assign(probs.begin(), probs.end());
    pred.sentiment = static_cast<Sentiment>(argmax(probs.begin(), probs.end()));
    pred.alpha.assign(out.alpha.values().begin(), out.alpha.values().end());
  }
  if (out.p.defined()) pred.p.assign(out.p.values().begin(), out.p.values().end());
  if (request.aowe && out.tag_probs.defined()) {
    auto probs = out.tag_probs.values();
    for (std::size_t i = 0; i < input.ids.size(); ++i) {
      auto row_begin = probs.begin() + static_cast<std::ptrdiff_t>(i * kNumTags);
      pred.tags.push_back(static_cast<Tag>(argmax(row_begin, row_begin + kNumTags)));
    }
  }
  return pred;
}

// -- checkpoints ----------------------------------------------------------------

namespace {

constexpr const char* kMagic = "OTN-CHECKPOINT";

void write_doubles(std::ostream& out, std::span<const double> values) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  json header;
  header["version"] = kCheckpointVersion;
  header["config"] = to_json(checkpoint.config);
  header["vocab"] = checkpoint.vocab.tokens();
  header["extra"] = checkpoint.extra;
  json tensors = json::array();
  const auto all = checkpoint.params.all();
  for (const auto& t : all) tensors.push_back({{"name", t.name}, {"shape", t.tensor.shape()}});
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << kMagic << ' ' << kCheckpointVersion << '\n' << text.size() << '\n' << text;
  for (const auto& t : all) write_doubles(out, t.tensor.values());
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string magic;
  int version = 0;
  std::size_t header_size = 0;
  in >> magic >> version >> header_size;
  if (!in || magic != kMagic) throw CheckpointError(path.string() + " is not an OTN checkpoint");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  in.get();  // newline after the size
  std::string text(header_size, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_size));
  if (!in) throw CheckpointError("truncated checkpoint header");

  Checkpoint ck;
  try {
    const json header = json::parse(text);
    ck.config = model_config_from_json(header.at("config"));
    ck.config.validate();
    ck.vocab = Vocabulary(header.at("vocab").get<std::vector<std::string>>());
    ck.extra = header.value("extra", json::object());

    const auto& d = ck.config.dims;
    EmbeddingTable shell{Tensor(Shape{ck.vocab.size(), d.embedding.word_dim}),
                         Tensor(Shape{d.embedding.max_distance, d.embedding.position_dim}, true)};
    Rng rng(0);
    ck.params = init_params(ck.config, shell, rng);
    const auto expected = ck.params.all();
    const auto& listed = header.at("tensors");
    if (listed.size() != expected.size()) {
      throw CheckpointError("checkpoint lists " + std::to_string(listed.size()) +
                            " tensors, configuration implies " + std::to_string(expected.size()));
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const auto name = listed[i].at("name").get<std::string>();
      const auto shape = listed[i].at("shape").get<Shape>();
      if (name != expected[i].name || shape != expected[i].tensor.shape()) {
        throw CheckpointError("tensor " + name + " " + shape_string(shape) +
                              " does not match expected " + expected[i].name + " " +
                              shape_string(expected[i].tensor.shape()));
      }
      Tensor t = expected[i].tensor;
      auto values = t.values();
      in.read(reinterpret_cast<char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
      if (!in) throw CheckpointError("truncated tensor data for " + name);
    }
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError("malformed checkpoint header: " + std::string(e.what()));
  }
  return ck;
}

}  // namespace otn
