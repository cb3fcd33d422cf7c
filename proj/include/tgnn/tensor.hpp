#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tgnn/rng.hpp"

namespace tgnn {

using Shape = std::vector<int>;

int numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Primitive operations understood by the tape. Everything the network needs
// is composed from these.
enum class OpKind {
  kMatmul,     // [batch..., m, k] x [k, n] -> [batch..., m, n]
  kAdd,        // elementwise, equal shapes
  kSub,
  kMul,
  kDiv,
  kScale,      // x * alpha
  kAddConst,   // x + alpha
  kRelu,
  kLeakyRelu,  // slope in attrs.alpha
  kTanh,
  kExp,
  kLog,
  kPowConst,   // x ^ alpha, elementwise
  kSoftmax,    // over attrs.axis, max-subtracted
  kConcat,     // along attrs.axis
  kNarrow,     // slice attrs.axis, [attrs.start, attrs.start + attrs.len)
  kReshape,    // to attrs.shape
  kPermute,    // axes order attrs.axes
  kSumAxis,    // drops attrs.axis
  kMeanAxis,   // drops attrs.axis
  kSumAll,     // -> [1]
  kMeanAll,    // -> [1]
  kSqNorm,     // sum of squares -> [1]
};

constexpr int kNumOpKinds = static_cast<int>(OpKind::kSqNorm) + 1;

const char* op_name(OpKind kind);

struct OpAttrs {
  double alpha = 0.0;
  int axis = 0;
  int start = 0;
  int len = 0;
  Shape shape;
  std::vector<int> axes;
};

struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until backward materializes it
  bool requires_grad = false;
};

// Cheap handle onto shared storage. Copies alias the same data.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  static Tensor identity(int n);
  // Leaf with requires_grad set; entries uniform in [-bound, bound] where
  // bound = sqrt(1 / fan_in) and fan_in = product of all dims but the last.
  static Tensor param_uniform(Shape shape, Rng& rng);
  static Tensor param(Shape shape, std::vector<double> values);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  int size() const { return numel(data_->shape); }
  int dim(int axis) const { return data_->shape[static_cast<size_t>(axis)]; }
  int rank() const { return static_cast<int>(data_->shape.size()); }
  bool requires_grad() const { return data_->requires_grad; }

  std::span<const double> values() const { return data_->values; }
  std::span<double> mutable_values() { return data_->values; }
  double value() const;  // scalar only
  double at(std::initializer_list<int> idx) const;

  std::span<const double> grad() const;  // materializes zeros if absent
  void clear_grad() { data_->grad.clear(); }

  std::shared_ptr<TensorData> data() const { return data_; }

 private:
  explicit Tensor(std::shared_ptr<TensorData> d) : data_(std::move(d)) {}
  std::shared_ptr<TensorData> data_;
  friend class Tape;
};

struct TapeRecord {
  OpKind kind;
  OpAttrs attrs;
  std::vector<std::shared_ptr<TensorData>> inputs;
  std::shared_ptr<TensorData> output;
};

// Reverse-mode tape. Records in execution order; records' inputs always
// precede them, so one reverse sweep visits each exactly once. Not for
// concurrent writers; evaluation code can disable recording entirely.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tensor apply(OpKind kind, std::span<const Tensor> inputs,
               const OpAttrs& attrs = {});

  // Seeds d(loss)/d(loss) = 1 and sweeps the records in reverse, resetting
  // and then accumulating the grad of every tensor the tape has seen. Leaves
  // not on the loss path end up with zeros.
  void backward(const Tensor& loss);

  std::size_t size() const { return records_.size(); }
  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }
  bool used(OpKind kind) const {
    return used_[static_cast<size_t>(static_cast<int>(kind))];
  }
  void clear();

 private:
  std::vector<TapeRecord> records_;
  std::array<bool, kNumOpKinds> used_{};
  bool recording_ = true;
};

// Convenience wrappers over Tape::apply.
Tensor matmul(Tape& t, const Tensor& a, const Tensor& b);
Tensor add(Tape& t, const Tensor& a, const Tensor& b);
Tensor sub(Tape& t, const Tensor& a, const Tensor& b);
Tensor mul(Tape& t, const Tensor& a, const Tensor& b);
Tensor div(Tape& t, const Tensor& a, const Tensor& b);
Tensor scale(Tape& t, const Tensor& a, double alpha);
Tensor add_const(Tape& t, const Tensor& a, double alpha);
Tensor relu(Tape& t, const Tensor& a);
Tensor leaky_relu(Tape& t, const Tensor& a, double slope);
Tensor tanh_op(Tape& t, const Tensor& a);
Tensor exp_op(Tape& t, const Tensor& a);
Tensor log_op(Tape& t, const Tensor& a);
Tensor pow_const(Tape& t, const Tensor& a, double exponent);
Tensor softmax(Tape& t, const Tensor& a, int axis);
Tensor concat(Tape& t, std::span<const Tensor> inputs, int axis);
Tensor narrow(Tape& t, const Tensor& a, int axis, int start, int len);
Tensor reshape(Tape& t, const Tensor& a, Shape shape);
Tensor permute(Tape& t, const Tensor& a, std::vector<int> axes);
Tensor sum_axis(Tape& t, const Tensor& a, int axis);
Tensor mean_axis(Tape& t, const Tensor& a, int axis);
Tensor sum_all(Tape& t, const Tensor& a);
Tensor mean_all(Tape& t, const Tensor& a);
Tensor sqnorm(Tape& t, const Tensor& a);

}  // namespace tgnn
