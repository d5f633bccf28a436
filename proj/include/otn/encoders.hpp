#pragma once

#include <cstddef>
#include <vector>

#include "otn/data.hpp"
#include "otn/tensor.hpp"

namespace otn {

// U(-r, r) with r = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// -- embeddings ---------------------------------------------------------------

struct EmbeddedSentence {
  Tensor tokens;       // n x (word_dim + position_dim), dropout applied in train mode
  Tensor aspect;       // mean aspect word vector ++ position vector of distance 0
  Tensor aspect_word;  // mean aspect word vector alone
};

// e_i = [word(w_i); position(l_i)] for every (possibly padded) position.
EmbeddedSentence embed_tokens(Tape& tape, const std::vector<std::size_t>& ids,
                              const AspectSpan& aspect, const EmbeddingTable& table,
                              double dropout_p, Mode mode, Rng& rng);

// -- LSTM ---------------------------------------------------------------------

// Gate blocks are laid out [input | forget | output | candidate].
struct LstmCellParams {
  Tensor input_weight;      // in x 4h
  Tensor recurrent_weight;  // h x 4h
  Tensor bias;              // 4h

  std::size_t hidden() const { return recurrent_weight.dim(0); }
};

struct LstmState {
  Tensor h;
  Tensor c;
};

LstmState zero_state(std::size_t hidden);

// i, f, o = sigmoid, g = tanh, c = f*c_prev + i*g, h = o*tanh(c).
LstmState lstm_cell(Tape& tape, const Tensor& x, const LstmState& prev,
                    const LstmCellParams& params);

struct BiLstmParams {
  LstmCellParams forward;
  LstmCellParams backward;
};

// Glorot weights, zero biases except the forget gate at 1.
LstmCellParams init_lstm_cell(std::size_t input, std::size_t hidden, Rng& rng);
BiLstmParams init_bilstm(std::size_t input, std::size_t hidden, Rng& rng);

// n x in -> n x 2h, rows [forward_i; backward_i]. Masked steps emit zero rows
// and leave the recurrent state untouched.
Tensor bilstm_forward(Tape& tape, const Tensor& inputs, const Mask& mask,
                      const BiLstmParams& params);

// -- CNN ----------------------------------------------------------------------

struct ConvLayer {
  std::size_t kernel = 1;
  Tensor weight;  // (kernel * in) x out, row block j weighs input offset j - (kernel-1)/2
  Tensor bias;    // out
};

struct CnnSpec {
  std::size_t first_kernel = 1;
  std::size_t first_channels = 600;
  std::vector<std::size_t> parallel_kernels{2, 3, 4};
  std::size_t parallel_channels = 200;
  std::size_t upper_kernel = 5;
  std::size_t upper_channels = 600;
  std::size_t upper_layers = 3;

  std::size_t output_channels() const { return upper_layers ? upper_channels : parallel_width(); }
  std::size_t parallel_width() const { return parallel_kernels.size() * parallel_channels; }
};

struct CnnStackParams {
  ConvLayer first;
  std::vector<ConvLayer> parallel;  // branches over the first layer's output, concatenated
  std::vector<ConvLayer> upper;
};

ConvLayer init_conv(std::size_t kernel, std::size_t in, std::size_t out, Rng& rng);
CnnStackParams init_cnn(std::size_t input, const CnnSpec& spec, Rng& rng);

// Same-padded convolution without activation: n x in -> n x out.
Tensor conv1d_same(Tape& tape, const Tensor& x, const ConvLayer& layer);

// Every layer is followed by ReLU and zeroing of masked rows; the input is
// masked first so padding never reaches real positions.
Tensor cnn_stack_forward(Tape& tape, const Tensor& inputs, const Mask& mask,
                         const CnnStackParams& params);

}  // namespace otn
