#include "otn/encoders.hpp"

#include <cmath>

namespace otn {

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> uniform(-r, r);
  Tensor t(std::move(shape), true);
  for (double& v : t.values()) v = uniform(rng);
  return t;
}

EmbeddedSentence embed_tokens(Tape& tape, const std::vector<std::size_t>& ids,
                              const AspectSpan& aspect, const EmbeddingTable& table,
                              double dropout_p, Mode mode, Rng& rng) {
  const std::size_t max_distance = table.position.dim(0);
  const auto distances = position_distances(ids.size(), aspect, max_distance);
  Tensor words = gather_rows(tape, table.word, ids);
  Tensor positions = gather_rows(tape, table.position, distances);

  EmbeddedSentence out;
  out.tokens = dropout(tape, concat(tape, {words, positions}), dropout_p, mode, rng);
  out.aspect_word = mean_rows(tape, words, aspect.start, aspect.end);
  out.aspect = concat(tape, {out.aspect_word, row(tape, table.position, 0)});
  return out;
}

LstmState zero_state(std::size_t hidden) {
  return {Tensor(Shape{hidden}), Tensor(Shape{hidden})};
}

namespace {

// One recurrence step given the already projected input x W + b.
LstmState lstm_step(Tape& tape, const Tensor& projected, const LstmState& prev,
                    const LstmCellParams& params) {
  const std::size_t h = params.hidden();
  Tensor recurrent = reshape(
      tape, matmul(tape, reshape(tape, prev.h, Shape{1, h}), params.recurrent_weight),
      Shape{4 * h});
  Tensor gates = add(tape, projected, recurrent);
  Tensor input_gate = sigmoid(tape, slice_last(tape, gates, 0, h));
  Tensor forget_gate = sigmoid(tape, slice_last(tape, gates, h, h));
  Tensor output_gate = sigmoid(tape, slice_last(tape, gates, 2 * h, h));
  Tensor candidate = tanh(tape, slice_last(tape, gates, 3 * h, h));
  Tensor c = add(tape, mul(tape, forget_gate, prev.c), mul(tape, input_gate, candidate));
  Tensor hidden = mul(tape, output_gate, tanh(tape, c));
  return {hidden, c};
}

std::vector<Tensor> run_direction(Tape& tape, const Tensor& projected, const Mask& mask,
                                  const LstmCellParams& params, bool reverse) {
  const std::size_t n = projected.dim(0);
  const std::size_t h = params.hidden();
  std::vector<Tensor> rows(n);
  LstmState state = zero_state(h);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    if (!mask[t]) {
      rows[t] = Tensor(Shape{h});
      continue;
    }
    state = lstm_step(tape, row(tape, projected, t), state, params);
    rows[t] = state.h;
  }
  return rows;
}

}  // namespace

LstmState lstm_cell(Tape& tape, const Tensor& x, const LstmState& prev,
                    const LstmCellParams& params) {
  const std::size_t in = params.input_weight.dim(0);
  if (x.rank() != 1 || x.size() != in) {
    throw DimensionError("lstm_cell: input " + shape_string(x.shape()) + " for weight " +
                         shape_string(params.input_weight.shape()));
  }
  Tensor projected = add_bias(
      tape,
      reshape(tape, matmul(tape, reshape(tape, x, Shape{1, in}), params.input_weight),
              Shape{4 * params.hidden()}),
      params.bias);
  return lstm_step(tape, projected, prev, params);
}

LstmCellParams init_lstm_cell(std::size_t input, std::size_t hidden, Rng& rng) {
  LstmCellParams p;
  p.input_weight = glorot_uniform(Shape{input, 4 * hidden}, input, 4 * hidden, rng);
  p.recurrent_weight = glorot_uniform(Shape{hidden, 4 * hidden}, hidden, 4 * hidden, rng);
  p.bias = Tensor(Shape{4 * hidden}, true);
  for (std::size_t i = hidden; i < 2 * hidden; ++i) p.bias.values()[i] = 1.0;
  return p;
}

BiLstmParams init_bilstm(std::size_t input, std::size_t hidden, Rng& rng) {
  BiLstmParams p;
  p.forward = init_lstm_cell(input, hidden, rng);
  p.backward = init_lstm_cell(input, hidden, rng);
  return p;
}

Tensor bilstm_forward(Tape& tape, const Tensor& inputs, const Mask& mask,
                      const BiLstmParams& params) {
  if (inputs.rank() != 2 || mask.size() != inputs.dim(0)) {
    throw DimensionError("bilstm_forward: inputs " + shape_string(inputs.shape()) +
                         " with mask of length " + std::to_string(mask.size()));
  }
  auto project = [&](const LstmCellParams& cell) {
    return add_bias(tape, matmul(tape, inputs, cell.input_weight), cell.bias);
  };
  auto forward_rows = run_direction(tape, project(params.forward), mask, params.forward, false);
  auto backward_rows = run_direction(tape, project(params.backward), mask, params.backward, true);
  return concat(tape, {stack_rows(tape, forward_rows), stack_rows(tape, backward_rows)});
}

ConvLayer init_conv(std::size_t kernel, std::size_t in, std::size_t out, Rng& rng) {
  ConvLayer layer;
  layer.kernel = kernel;
  layer.weight = glorot_uniform(Shape{kernel * in, out}, kernel * in, out, rng);
  layer.bias = Tensor(Shape{out}, true);
  return layer;
}

CnnStackParams init_cnn(std::size_t input, const CnnSpec& spec, Rng& rng) {
  CnnStackParams p;
  p.first = init_conv(spec.first_kernel, input, spec.first_channels, rng);
  for (std::size_t k : spec.parallel_kernels) {
    p.parallel.push_back(init_conv(k, spec.first_channels, spec.parallel_channels, rng));
  }
  std::size_t width = spec.parallel_width();
  for (std::size_t i = 0; i < spec.upper_layers; ++i) {
    p.upper.push_back(init_conv(spec.upper_kernel, width, spec.upper_channels, rng));
    width = spec.upper_channels;
  }
  return p;
}

Tensor conv1d_same(Tape& tape, const Tensor& x, const ConvLayer& layer) {
  if (x.rank() != 2 || layer.kernel * x.dim(1) != layer.weight.dim(0)) {
    throw DimensionError("conv1d_same: input " + shape_string(x.shape()) + " for kernel " +
                         std::to_string(layer.kernel) + " weight " +
                         shape_string(layer.weight.shape()));
  }
  Tensor windows = layer.kernel == 1 ? x : unfold_same(tape, x, layer.kernel);
  return add_bias(tape, matmul(tape, windows, layer.weight), layer.bias);
}

Tensor cnn_stack_forward(Tape& tape, const Tensor& inputs, const Mask& mask,
                         const CnnStackParams& params) {
  if (inputs.rank() != 2 || inputs.dim(0) == 0) {
    throw DimensionError("cnn_stack_forward: bad input " + shape_string(inputs.shape()));
  }
  auto activate = [&](const Tensor& t) { return mask_rows(tape, relu(tape, t), mask); };
  Tensor x = mask_rows(tape, inputs, mask);
  x = activate(conv1d_same(tape, x, params.first));
  if (!params.parallel.empty()) {
    std::vector<Tensor> branches;
    for (const auto& layer : params.parallel) {
      branches.push_back(activate(conv1d_same(tape, x, layer)));
    }
    x = concat(tape, branches);
  }
  for (const auto& layer : params.upper) x = activate(conv1d_same(tape, x, layer));
  return x;
}

}  // namespace otn
