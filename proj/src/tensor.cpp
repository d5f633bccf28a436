#include "otn/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace otn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_string(x.shape()));
  }
}

bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

// Shared body of unary elementwise ops: forward value and local derivative
// expressed through input and output values.
template <typename Fwd, typename Deriv>
Tensor unary(Tape& tape, const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  Tensor result(x.shape(), std::move(out), x.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [x, result, deriv] {
      auto g = result.grad();
      auto gx = x.grad();
      auto xv = x.values();
      auto yv = result.values();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xv[i], yv[i]);
    });
  }
  return result;
}

void check_finite(const char* op, std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

// Softmax Jacobian-vector product: gx = y * (g - <g, y>).
void softmax_pullback(std::span<const double> y, std::span<const double> g,
                      std::span<double> gx) {
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
  for (std::size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (g[i] - dot);
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

// -- Tensor -----------------------------------------------------------------

Tensor::Tensor(Shape shape, bool requires_grad)
    : Tensor(shape, std::vector<double>(shape_size(shape), 0.0), requires_grad) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : data_(std::make_shared<Storage>()) {
  if (shape.size() > 3) throw DimensionError("tensor rank above 3: " + shape_string(shape));
  if (shape_size(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_string(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  data_->shape = std::move(shape);
  data_->values = std::move(values);
  data_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw DimensionError("axis out of range for " + shape_string(shape()));
  return data_->shape[axis];
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on non-scalar " + shape_string(shape()));
  return data_->values[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return data_->values[row * data_->shape.back() + col];
}

std::span<double> Tensor::grad() const {
  if (data_->grad.empty()) data_->grad.assign(data_->values.size(), 0.0);
  return data_->grad;
}

void Tensor::zero_grad() const {
  std::fill(data_->grad.begin(), data_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  return Tensor(data_->shape, data_->values, data_->requires_grad);
}

// -- Tape -------------------------------------------------------------------

void Tape::record(const Tensor& output, Pullback pullback) {
  entries_.push_back(Entry{output, std::move(pullback)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw DimensionError("backward() needs a scalar loss, got " + shape_string(loss.shape()));
  }
  for (auto& entry : entries_) {
    if (entry.output.has_grad()) entry.output.zero_grad();
  }
  loss.grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output.has_grad()) it->pullback();
  }
}

// -- primitives -------------------------------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  std::vector<double> out(static_cast<std::size_t>(m * n));
  MutMap(out.data(), m, n).noalias() =
      ConstMap(a.values().data(), m, k) * ConstMap(b.values().data(), k, n);
  Tensor result(Shape{a.dim(0), b.dim(1)}, std::move(out), any_requires_grad({&a, &b}));
  if (result.requires_grad()) {
    tape.record(result, [a, b, result, m, k, n] {
      ConstMap g(result.grad().data(), m, n);
      if (a.requires_grad()) {
        MutMap(a.grad().data(), m, k).noalias() += g * ConstMap(b.values().data(), k, n).transpose();
      }
      if (b.requires_grad()) {
        MutMap(b.grad().data(), k, n).noalias() += ConstMap(a.values().data(), m, k).transpose() * g;
      }
    });
  }
  return result;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  Tensor result(a.shape(), std::move(out), any_requires_grad({&a, &b}));
  if (result.requires_grad()) {
    tape.record(result, [a, b, result] {
      auto g = result.grad();
      for (const Tensor* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto gt = t->grad();
        for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
      }
    });
  }
  return result;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Tensor result(a.shape(), std::move(out), any_requires_grad({&a, &b}));
  if (result.requires_grad()) {
    tape.record(result, [a, b, result] {
      auto g = result.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        auto bv = b.values();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        auto av = a.values();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
      }
    });
  }
  return result;
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  return unary(
      tape, x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias) {
  require_rank("add_bias", bias, 1);
  if (x.rank() == 0 || x.shape().back() != bias.dim(0)) {
    throw DimensionError("add_bias: shape mismatch " + shape_string(x.shape()) + " vs " +
                         shape_string(bias.shape()));
  }
  const std::size_t width = bias.size();
  std::vector<double> out(x.values().begin(), x.values().end());
  auto bv = bias.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % width];
  Tensor result(x.shape(), std::move(out), any_requires_grad({&x, &bias}));
  if (result.requires_grad()) {
    tape.record(result, [x, bias, result, width] {
      auto g = result.grad();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (bias.requires_grad()) {
        auto gb = bias.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % width] += g[i];
      }
    });
  }
  return result;
}

Tensor tanh(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  return unary(
      tape, x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor concat(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat: no operands");
  const Shape& first = parts.front().shape();
  if (first.empty()) throw DimensionError("concat: scalar operand");
  const std::size_t rows = parts.front().size() / first.back();
  std::size_t width = 0;
  bool requires_grad = false;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(s.begin(), s.end() - 1, first.begin())) {
      throw DimensionError("concat: incompatible shapes " + shape_string(first) + " and " +
                           shape_string(s));
    }
    width += s.back();
    requires_grad = requires_grad || p.requires_grad();
  }
  std::vector<double> out(rows * width);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape().back();
    auto pv = p.values();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.begin() + r * w, w, out.begin() + r * width + offset);
    }
    offsets.push_back(offset);
    offset += w;
  }
  Shape shape = first;
  shape.back() = width;
  Tensor result(std::move(shape), std::move(out), requires_grad);
  if (requires_grad) {
    tape.record(result, [parts, offsets, result, rows, width] {
      auto g = result.grad();
      for (std::size_t k = 0; k < parts.size(); ++k) {
        if (!parts[k].requires_grad()) continue;
        const std::size_t w = parts[k].shape().back();
        auto gp = parts[k].grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < w; ++c) gp[r * w + c] += g[r * width + offsets[k] + c];
        }
      }
    });
  }
  return result;
}

Tensor softmax(Tape& tape, const Tensor& v) {
  return masked_softmax(tape, v, Mask(v.size(), 1));
}

Tensor masked_softmax(Tape& tape, const Tensor& v, const Mask& mask) {
  require_rank("softmax", v, 1);
  if (v.size() == 0) throw DimensionError("softmax: empty input");
  if (mask.size() != v.size()) {
    throw DimensionError("masked_softmax: mask length " + std::to_string(mask.size()) +
                         " vs " + shape_string(v.shape()));
  }
  check_finite("softmax", v.values());
  auto vv = v.values();
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < vv.size(); ++i) {
    if (mask[i]) peak = std::max(peak, vv[i]);
  }
  if (!std::isfinite(peak)) throw DegenerateInputError("softmax: every position is masked");
  std::vector<double> out(vv.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < vv.size(); ++i) {
    if (mask[i]) total += out[i] = std::exp(vv[i] - peak);
  }
  for (double& o : out) o /= total;
  Tensor result(v.shape(), std::move(out), v.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [v, result] {
      softmax_pullback(result.values(), result.grad(), v.grad());
    });
  }
  return result;
}

Tensor softmax_rows(Tape& tape, const Tensor& x) {
  require_rank("softmax_rows", x, 2);
  check_finite("softmax_rows", x.values());
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  auto xv = x.values();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * cols;
    double* o = out.data() + r * cols;
    const double peak = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += o[c] = std::exp(in[c] - peak);
    for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
  }
  Tensor result(x.shape(), std::move(out), x.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [x, result, rows, cols] {
      auto y = result.values();
      auto g = result.grad();
      auto gx = x.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        softmax_pullback(y.subspan(r * cols, cols), g.subspan(r * cols, cols),
                         gx.subspan(r * cols, cols));
      }
    });
  }
  return result;
}

Tensor dropout(Tape& tape, const Tensor& x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must lie in [0, 1)");
  if (mode == Mode::eval || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::bernoulli_distribution keep(1.0 - p);
  std::vector<double> factors(x.size());
  for (double& f : factors) f = keep(rng) ? keep_scale : 0.0;
  auto xv = x.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factors[i];
  Tensor result(x.shape(), std::move(out), x.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [x, result, factors = std::move(factors)] {
      auto g = result.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factors[i];
    });
  }
  return result;
}

Tensor sum(Tape& tape, const Tensor& x) {
  auto xv = x.values();
  Tensor result = Tensor::scalar(std::accumulate(xv.begin(), xv.end(), 0.0), x.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [x, result] {
      const double g = result.grad()[0];
      for (double& gx : x.grad()) gx += g;
    });
  }
  return result;
}

Tensor log(Tape& tape, const Tensor& x, double floor) {
  return unary(
      tape, x, [floor](double v) { return std::log(std::max(v, floor)); },
      [floor](double v, double) { return v > floor ? 1.0 / v : 0.0; });
}

Tensor select(Tape& tape, const Tensor& x, const std::vector<std::size_t>& flat_indices) {
  std::vector<double> out(flat_indices.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (flat_indices[i] >= xv.size()) throw DimensionError("select: index out of range");
    out[i] = xv[flat_indices[i]];
  }
  const std::size_t count = out.size();
  Tensor result(Shape{count}, std::move(out), x.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [x, result, flat_indices] {
      auto g = result.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[flat_indices[i]] += g[i];
    });
  }
  return result;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  Tensor result(std::move(shape), std::vector<double>(x.values().begin(), x.values().end()),
                x.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [x, result] {
      auto g = result.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return result;
}

Tensor row(Tape& tape, const Tensor& x, std::size_t index) {
  require_rank("row", x, 2);
  if (index >= x.dim(0)) throw DimensionError("row: index out of range");
  const std::size_t width = x.dim(1);
  auto begin = x.values().begin() + static_cast<std::ptrdiff_t>(index * width);
  Tensor result(Shape{width}, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(width)),
                x.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [x, result, index, width] {
      auto g = result.grad();
      auto gx = x.grad();
      for (std::size_t c = 0; c < width; ++c) gx[index * width + c] += g[c];
    });
  }
  return result;
}

Tensor stack_rows(Tape& tape, const std::vector<Tensor>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  const std::size_t width = rows.front().size();
  std::vector<double> out;
  out.reserve(rows.size() * width);
  bool requires_grad = false;
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.size() != width) {
      throw DimensionError("stack_rows: row shape " + shape_string(r.shape()) +
                           " differs from [" + std::to_string(width) + "]");
    }
    out.insert(out.end(), r.values().begin(), r.values().end());
    requires_grad = requires_grad || r.requires_grad();
  }
  Tensor result(Shape{rows.size(), width}, std::move(out), requires_grad);
  if (requires_grad) {
    tape.record(result, [rows, result, width] {
      auto g = result.grad();
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!rows[r].requires_grad()) continue;
        auto gr = rows[r].grad();
        for (std::size_t c = 0; c < width; ++c) gr[c] += g[r * width + c];
      }
    });
  }
  return result;
}

Tensor slice_last(Tape& tape, const Tensor& x, std::size_t start, std::size_t length) {
  if (x.rank() == 0 || start + length > x.shape().back()) {
    throw DimensionError("slice_last: range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") outside " + shape_string(x.shape()));
  }
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  auto xv = x.values();
  std::vector<double> out(rows * length);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.begin() + r * width + start, length, out.begin() + r * length);
  }
  Shape shape = x.shape();
  shape.back() = length;
  Tensor result(std::move(shape), std::move(out), x.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [x, result, start, length, width, rows] {
      auto g = result.grad();
      auto gx = x.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < length; ++c) gx[r * width + start + c] += g[r * length + c];
      }
    });
  }
  return result;
}

Tensor gather_rows(Tape& tape, const Tensor& table, const std::vector<std::size_t>& indices) {
  require_rank("gather_rows", table, 2);
  const std::size_t width = table.dim(1);
  auto tv = table.values();
  std::vector<double> out(indices.size() * width);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= table.dim(0)) {
      throw DimensionError("gather_rows: index " + std::to_string(indices[r]) +
                           " outside table " + shape_string(table.shape()));
    }
    std::copy_n(tv.begin() + indices[r] * width, width, out.begin() + r * width);
  }
  Tensor result(Shape{indices.size(), width}, std::move(out), table.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [table, result, indices, width] {
      auto g = result.grad();
      auto gt = table.grad();
      for (std::size_t r = 0; r < indices.size(); ++r) {
        for (std::size_t c = 0; c < width; ++c) gt[indices[r] * width + c] += g[r * width + c];
      }
    });
  }
  return result;
}

Tensor mean_rows(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank("mean_rows", x, 2);
  if (begin >= end || end > x.dim(0)) throw DimensionError("mean_rows: empty or invalid range");
  const std::size_t width = x.dim(1);
  const double inv = 1.0 / static_cast<double>(end - begin);
  auto xv = x.values();
  std::vector<double> out(width, 0.0);
  for (std::size_t r = begin; r < end; ++r) {
    for (std::size_t c = 0; c < width; ++c) out[c] += xv[r * width + c];
  }
  for (double& o : out) o *= inv;
  Tensor result(Shape{width}, std::move(out), x.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [x, result, begin, end, width, inv] {
      auto g = result.grad();
      auto gx = x.grad();
      for (std::size_t r = begin; r < end; ++r) {
        for (std::size_t c = 0; c < width; ++c) gx[r * width + c] += g[c] * inv;
      }
    });
  }
  return result;
}

Tensor broadcast_rows(Tape& tape, const Tensor& v, std::size_t rows) {
  require_rank("broadcast_rows", v, 1);
  const std::size_t width = v.size();
  std::vector<double> out(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(v.values().begin(), v.values().end(), out.begin() + r * width);
  }
  Tensor result(Shape{rows, width}, std::move(out), v.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [v, result, rows, width] {
      auto g = result.grad();
      auto gv = v.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < width; ++c) gv[c] += g[r * width + c];
      }
    });
  }
  return result;
}

Tensor mask_rows(Tape& tape, const Tensor& x, const Mask& mask) {
  require_rank("mask_rows", x, 2);
  if (mask.size() != x.dim(0)) throw DimensionError("mask_rows: mask length mismatch");
  if (std::all_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) return x;
  const std::size_t width = x.dim(1);
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (!mask[r]) std::fill_n(out.begin() + r * width, width, 0.0);
  }
  Tensor result(x.shape(), std::move(out), x.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [x, result, mask, width] {
      auto g = result.grad();
      auto gx = x.grad();
      for (std::size_t r = 0; r < mask.size(); ++r) {
        if (!mask[r]) continue;
        for (std::size_t c = 0; c < width; ++c) gx[r * width + c] += g[r * width + c];
      }
    });
  }
  return result;
}

Tensor unfold_same(Tape& tape, const Tensor& x, std::size_t kernel) {
  require_rank("unfold_same", x, 2);
  if (kernel == 0) throw DimensionError("unfold_same: kernel size 0");
  const std::size_t n = x.dim(0);
  const std::size_t channels = x.dim(1);
  const std::size_t left = (kernel - 1) / 2;
  const std::size_t width = kernel * channels;
  auto xv = x.values();
  std::vector<double> out(n * width, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < kernel; ++j) {
      // Source row i - left + j, skipped when it falls in the zero padding.
      if (i + j < left || i + j - left >= n) continue;
      const std::size_t src = i + j - left;
      std::copy_n(xv.begin() + src * channels, channels,
                  out.begin() + i * width + j * channels);
    }
  }
  Tensor result(Shape{n, width}, std::move(out), x.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [x, result, n, channels, kernel, left, width] {
      auto g = result.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < kernel; ++j) {
          if (i + j < left || i + j - left >= n) continue;
          const std::size_t src = i + j - left;
          for (std::size_t c = 0; c < channels; ++c) {
            gx[src * channels + c] += g[i * width + j * channels + c];
          }
        }
      }
    });
  }
  return result;
}

}  // namespace otn
