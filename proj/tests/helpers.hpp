#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "otn/model.hpp"
#include "otn/tensor.hpp"

namespace testing_util {

inline std::filesystem::path data_dir() { return OTN_TEST_DATA_DIR; }

inline otn::Tensor leaf(otn::Shape shape, std::vector<double> values) {
  return otn::Tensor(std::move(shape), std::move(values), true);
}

inline std::vector<double> values_of(const otn::Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

// Compact model over a random vocabulary of `words` tokens.
struct TinyModel {
  otn::ModelConfig config;
  otn::Vocabulary vocab;
  otn::OtnParams params;

  explicit TinyModel(std::uint64_t seed = 3, std::size_t words = 12) {
    config.dims = otn::small_dims(6);
    config.dims.lstm_hidden = 4;
    config.dims.attention_dim = 5;
    config.dims.embedding.position_dim = 3;
    config.dims.cnn.first_channels = 4;
    config.dims.cnn.parallel_channels = 2;
    config.dims.cnn.upper_channels = 5;
    config.dims.cnn.upper_layers = 2;
    config.dims.tagger_hidden = 4;
    for (std::size_t i = 0; i < words; ++i) vocab.add("w" + std::to_string(i));
    rebuild(seed);
  }

  void rebuild(std::uint64_t seed) {
    otn::Rng rng(seed);
    auto table = otn::random_embeddings(vocab, config.dims.embedding, rng);
    // Stronger word vectors than the default initialization, so forward
    // values are not all near zero.
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : table.word.values()) v = v == 0.0 ? 0.0 : u(rng);
    for (double& v : table.position.values()) v = u(rng);
    params = otn::init_params(config, table, rng);
    for (const auto& p : params.all()) {
      if (p.name.starts_with("E_") || p.name.find(".b") != std::string::npos || p.name.starts_with("b_")) {
        otn::Tensor t = p.tensor;
        for (double& v : t.values()) v += 0.1 * u(rng);
      }
    }
  }

  otn::SentenceInput input(std::vector<std::size_t> ids, otn::AspectSpan aspect, std::size_t padding = 0) {
    otn::SentenceInput in;
    in.ids = std::move(ids);
    in.aspect = aspect;
    in.mask.assign(in.ids.size(), 1);
    for (std::size_t k = 0; k < padding; ++k) {
      in.ids.push_back(otn::Vocabulary::kPad);
      in.mask.push_back(0);
    }
    return in;
  }
};

}  // namespace testing_util
