#pragma once

// Dense rank<=3 tensors of doubles with define-by-run reverse-mode
// differentiation. Every op takes the Tape it records onto; parameters are
// leaf tensors that outlive any single tape and accumulate gradients.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace otn {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when an attention distribution has no admissible position.
class DegenerateInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;
// One byte per sequence position, nonzero for real tokens.
using Mask = std::vector<std::uint8_t>;
using Rng = std::mt19937_64;

enum class Mode { train, eval };

std::string shape_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_->values.size(); }

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool flag) { data_->requires_grad = flag; }

  std::span<double> values() { return data_->values; }
  std::span<const double> values() const { return data_->values; }
  double item() const;
  double at(std::size_t i) const { return data_->values[i]; }
  double at(std::size_t row, std::size_t col) const;

  // The gradient slot belongs to the tensor's identity rather than its
  // value, so it is reachable through const handles. Allocated on demand.
  std::span<double> grad() const;
  bool has_grad() const { return !data_->grad.empty(); }
  void zero_grad() const;

  // Deep copy of shape and values; the copy has no gradient slot.
  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return data_ == other.data_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> data_;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Ordered record of the differentiable primitives of one forward pass.
class Tape {
 public:
  using Pullback = std::function<void()>;

  void record(const Tensor& output, Pullback pullback);
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  // Seeds d(loss)=1 and replays pullbacks newest-first. Intermediate
  // gradients are reset on every call; leaf gradients accumulate.
  void backward(const Tensor& loss);

 private:
  struct Entry {
    Tensor output;
    Pullback pullback;
  };
  std::vector<Entry> entries_;
};

inline void backward(Tape& tape, const Tensor& loss) { tape.backward(loss); }

// -- primitives -------------------------------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& x, double factor);
// x is m x n (or n), bias is n; bias is added to every row.
Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);
// Concatenates along the last axis; all other extents must agree.
Tensor concat(Tape& tape, const std::vector<Tensor>& parts);

Tensor softmax(Tape& tape, const Tensor& v);
// Masked positions get probability exactly 0.
Tensor masked_softmax(Tape& tape, const Tensor& v, const Mask& mask);
Tensor softmax_rows(Tape& tape, const Tensor& x);

// Inverted dropout; eval mode and p == 0 return x itself.
Tensor dropout(Tape& tape, const Tensor& x, double p, Mode mode, Rng& rng);

Tensor sum(Tape& tape, const Tensor& x);
// log(max(x, floor)); the pullback is zero where the floor is active.
Tensor log(Tape& tape, const Tensor& x, double floor);
// Picks flat elements of x into a rank-1 tensor.
Tensor select(Tape& tape, const Tensor& x, const std::vector<std::size_t>& flat_indices);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

Tensor row(Tape& tape, const Tensor& x, std::size_t index);
Tensor stack_rows(Tape& tape, const std::vector<Tensor>& rows);
Tensor slice_last(Tape& tape, const Tensor& x, std::size_t start, std::size_t length);
Tensor gather_rows(Tape& tape, const Tensor& table, const std::vector<std::size_t>& indices);
Tensor mean_rows(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end);
Tensor broadcast_rows(Tape& tape, const Tensor& v, std::size_t rows);
Tensor mask_rows(Tape& tape, const Tensor& x, const Mask& mask);
// n x c -> n x (k*c): row i holds input rows i-left .. i-left+k-1, zero
// outside [0, n), with left = (k-1)/2. Feeds same-padded 1-d convolution.
Tensor unfold_same(Tape& tape, const Tensor& x, std::size_t kernel);

}  // namespace otn
