#include "tgnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "tgnn/error.hpp"

namespace tgnn {

int numel(const Shape& shape) {
  int n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kScale: return "scale";
    case OpKind::kAddConst: return "add_const";
    case OpKind::kRelu: return "relu";
    case OpKind::kLeakyRelu: return "leaky_relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kPowConst: return "pow_const";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kConcat: return "concat";
    case OpKind::kNarrow: return "narrow";
    case OpKind::kReshape: return "reshape";
    case OpKind::kPermute: return "permute";
    case OpKind::kSumAxis: return "sum_axis";
    case OpKind::kMeanAxis: return "mean_axis";
    case OpKind::kSumAll: return "sum_all";
    case OpKind::kMeanAll: return "mean_all";
    case OpKind::kSqNorm: return "sqnorm";
  }
  return "?";
}

namespace {

std::vector<int> strides_of(const Shape& shape) {
  std::vector<int> s(shape.size());
  int acc = 1;
  for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
    s[static_cast<size_t>(i)] = acc;
    acc *= shape[static_cast<size_t>(i)];
  }
  return s;
}

[[noreturn]] void shape_fail(OpKind kind, const std::string& detail) {
  throw ShapeError(std::string(op_name(kind)) + ": " + detail);
}

void check_same_shape(OpKind kind, const Shape& a, const Shape& b) {
  if (a != b)
    shape_fail(kind, "operand shapes " + shape_str(a) + " and " +
                         shape_str(b) + " differ");
}

void check_axis(OpKind kind, const Shape& shape, int axis) {
  if (axis < 0 || axis >= static_cast<int>(shape.size()))
    shape_fail(kind, "axis " + std::to_string(axis) + " out of range for " +
                         shape_str(shape));
}

// Decomposes a shape around an axis: outer x len x inner.
struct AxisView {
  int outer, len, inner;
};
AxisView axis_view(const Shape& shape, int axis) {
  AxisView v{1, shape[static_cast<size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) v.outer *= shape[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i)
    v.inner *= shape[i];
  return v;
}

void matmul_acc(const double* a, const double* b, double* out, int m, int k,
                int n) {
  // out (m x n) += a (m x k) * b (k x n), ikj order
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<ptrdiff_t>(i) * k;
    double* orow = out + static_cast<ptrdiff_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<ptrdiff_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

void matmul_at_b_acc(const double* a, const double* b, double* out, int m,
                     int k, int n) {
  // out (k x n) += a^T (k x m) * b (m x n), a given as (m x k)
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<ptrdiff_t>(i) * k;
    const double* brow = b + static_cast<ptrdiff_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* orow = out + static_cast<ptrdiff_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

void matmul_a_bt_acc(const double* a, const double* b, double* out, int m,
                     int k, int n) {
  // out (m x k) += a (m x n) * b^T (n x k), b given as (k x n)
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<ptrdiff_t>(i) * n;
    double* orow = out + static_cast<ptrdiff_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double* brow = b + static_cast<ptrdiff_t>(p) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += arow[j] * brow[j];
      orow[p] += acc;
    }
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape) {
  auto d = std::make_shared<TensorData>();
  d->values.assign(static_cast<size_t>(numel(shape)), 0.0);
  d->shape = std::move(shape);
  return Tensor(std::move(d));
}

Tensor Tensor::full(Shape shape, double value) {
  auto d = std::make_shared<TensorData>();
  d->values.assign(static_cast<size_t>(numel(shape)), value);
  d->shape = std::move(shape);
  return Tensor(std::move(d));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (static_cast<int>(values.size()) != numel(shape))
    throw ShapeError("tensor: " + std::to_string(values.size()) +
                     " values for shape " + shape_str(shape));
  auto d = std::make_shared<TensorData>();
  d->shape = std::move(shape);
  d->values = std::move(values);
  return Tensor(std::move(d));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::identity(int n) {
  Tensor t = zeros({n, n});
  for (int i = 0; i < n; ++i)
    t.data_->values[static_cast<size_t>(i * n + i)] = 1.0;
  return t;
}

Tensor Tensor::param_uniform(Shape shape, Rng& rng) {
  int fan_in = 1;
  if (shape.size() == 1) {
    fan_in = shape[0];
  } else {
    for (size_t i = 0; i + 1 < shape.size(); ++i) fan_in *= shape[i];
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(static_cast<size_t>(numel(shape)));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  Tensor t = from(std::move(shape), std::move(v));
  t.data_->requires_grad = true;
  return t;
}

Tensor Tensor::param(Shape shape, std::vector<double> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.data_->requires_grad = true;
  return t;
}

double Tensor::value() const {
  if (size() != 1)
    throw ContractError("Tensor::value: tensor " + shape_str(shape()) +
                        " is not scalar");
  return data_->values[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
  const auto st = strides_of(data_->shape);
  int off = 0;
  size_t i = 0;
  for (int v : idx) off += v * st[i++];
  return data_->values[static_cast<size_t>(off)];
}

std::span<const double> Tensor::grad() const {
  if (data_->grad.size() != data_->values.size())
    data_->grad.assign(data_->values.size(), 0.0);
  return data_->grad;
}

void Tape::clear() {
  records_.clear();
  used_.fill(false);
}

Tensor Tape::apply(OpKind kind, std::span<const Tensor> inputs,
                   const OpAttrs& attrs) {
  auto arity = [&](size_t n) {
    if (inputs.size() != n)
      throw ContractError(std::string(op_name(kind)) + ": expected " +
                          std::to_string(n) + " inputs, got " +
                          std::to_string(inputs.size()));
  };

  Shape out_shape;
  std::vector<double> out;

  switch (kind) {
    case OpKind::kMatmul: {
      arity(2);
      const auto& a = inputs[0];
      const auto& b = inputs[1];
      if (a.rank() < 2 || b.rank() != 2)
        shape_fail(kind, "lhs " + shape_str(a.shape()) + " rhs " +
                             shape_str(b.shape()) +
                             " (need lhs rank >= 2, rhs rank 2)");
      const int k = a.dim(a.rank() - 1);
      const int m = a.dim(a.rank() - 2);
      if (k != b.dim(0))
        shape_fail(kind, "lhs " + shape_str(a.shape()) +
                             " incompatible with rhs " + shape_str(b.shape()));
      const int n = b.dim(1);
      out_shape = a.shape();
      out_shape[out_shape.size() - 1] = n;
      const int batch = numel(out_shape) / (m * n);
      out.assign(static_cast<size_t>(numel(out_shape)), 0.0);
      for (int bi = 0; bi < batch; ++bi)
        matmul_acc(a.values().data() + static_cast<ptrdiff_t>(bi) * m * k,
                   b.values().data(),
                   out.data() + static_cast<ptrdiff_t>(bi) * m * n, m, k, n);
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul:
    case OpKind::kDiv: {
      arity(2);
      check_same_shape(kind, inputs[0].shape(), inputs[1].shape());
      out_shape = inputs[0].shape();
      const auto a = inputs[0].values();
      const auto b = inputs[1].values();
      out.resize(a.size());
      switch (kind) {
        case OpKind::kAdd:
          for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
          break;
        case OpKind::kSub:
          for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
          break;
        case OpKind::kMul:
          for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
          break;
        default:
          for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] / b[i];
          break;
      }
      break;
    }
    case OpKind::kScale:
    case OpKind::kAddConst:
    case OpKind::kRelu:
    case OpKind::kLeakyRelu:
    case OpKind::kTanh:
    case OpKind::kExp:
    case OpKind::kLog:
    case OpKind::kPowConst: {
      arity(1);
      out_shape = inputs[0].shape();
      const auto a = inputs[0].values();
      out.resize(a.size());
      const double c = attrs.alpha;
      switch (kind) {
        case OpKind::kScale:
          for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * c;
          break;
        case OpKind::kAddConst:
          for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + c;
          break;
        case OpKind::kRelu:
          for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] > 0 ? a[i] : 0;
          break;
        case OpKind::kLeakyRelu:
          for (size_t i = 0; i < a.size(); ++i)
            out[i] = a[i] > 0 ? a[i] : c * a[i];
          break;
        case OpKind::kTanh:
          for (size_t i = 0; i < a.size(); ++i) out[i] = std::tanh(a[i]);
          break;
        case OpKind::kExp:
          for (size_t i = 0; i < a.size(); ++i) out[i] = std::exp(a[i]);
          break;
        case OpKind::kLog:
          for (size_t i = 0; i < a.size(); ++i) out[i] = std::log(a[i]);
          break;
        default:
          for (size_t i = 0; i < a.size(); ++i) out[i] = std::pow(a[i], c);
          break;
      }
      break;
    }
    case OpKind::kSoftmax: {
      arity(1);
      check_axis(kind, inputs[0].shape(), attrs.axis);
      out_shape = inputs[0].shape();
      const auto a = inputs[0].values();
      out.resize(a.size());
      const auto v = axis_view(out_shape, attrs.axis);
      for (int o = 0; o < v.outer; ++o) {
        for (int in = 0; in < v.inner; ++in) {
          const auto idx = [&](int j) {
            return static_cast<size_t>((o * v.len + j) * v.inner + in);
          };
          double mx = a[idx(0)];
          for (int j = 1; j < v.len; ++j) mx = std::max(mx, a[idx(j)]);
          double sum = 0.0;
          for (int j = 0; j < v.len; ++j) {
            const double e = std::exp(a[idx(j)] - mx);
            out[idx(j)] = e;
            sum += e;
          }
          for (int j = 0; j < v.len; ++j) out[idx(j)] /= sum;
        }
      }
      break;
    }
    case OpKind::kConcat: {
      if (inputs.empty())
        throw ContractError("concat: needs at least one input");
      const int rank = inputs[0].rank();
      check_axis(kind, inputs[0].shape(), attrs.axis);
      out_shape = inputs[0].shape();
      int total = 0;
      for (const auto& t : inputs) {
        if (t.rank() != rank)
          shape_fail(kind, "rank mismatch " + shape_str(t.shape()) + " vs " +
                               shape_str(inputs[0].shape()));
        for (int d = 0; d < rank; ++d) {
          if (d != attrs.axis && t.dim(d) != inputs[0].dim(d))
            shape_fail(kind, "shape " + shape_str(t.shape()) +
                                 " not concatenable with " +
                                 shape_str(inputs[0].shape()));
        }
        total += t.dim(attrs.axis);
      }
      out_shape[static_cast<size_t>(attrs.axis)] = total;
      out.resize(static_cast<size_t>(numel(out_shape)));
      const auto v = axis_view(out_shape, attrs.axis);
      int pos = 0;
      for (const auto& t : inputs) {
        const int len = t.dim(attrs.axis);
        const auto src = t.values();
        for (int o = 0; o < v.outer; ++o) {
          std::copy_n(
              src.data() + static_cast<ptrdiff_t>(o) * len * v.inner,
              static_cast<size_t>(len) * v.inner,
              out.data() + (static_cast<ptrdiff_t>(o) * total + pos) * v.inner);
        }
        pos += len;
      }
      break;
    }
    case OpKind::kNarrow: {
      arity(1);
      check_axis(kind, inputs[0].shape(), attrs.axis);
      const int dim = inputs[0].dim(attrs.axis);
      if (attrs.start < 0 || attrs.len < 1 || attrs.start + attrs.len > dim)
        shape_fail(kind, "range [" + std::to_string(attrs.start) + ", " +
                             std::to_string(attrs.start + attrs.len) +
                             ") out of bounds for axis of size " +
                             std::to_string(dim));
      out_shape = inputs[0].shape();
      out_shape[static_cast<size_t>(attrs.axis)] = attrs.len;
      out.resize(static_cast<size_t>(numel(out_shape)));
      const auto v = axis_view(inputs[0].shape(), attrs.axis);
      const auto src = inputs[0].values();
      for (int o = 0; o < v.outer; ++o)
        std::copy_n(src.data() + (static_cast<ptrdiff_t>(o) * v.len +
                                  attrs.start) *
                                     v.inner,
                    static_cast<size_t>(attrs.len) * v.inner,
                    out.data() + static_cast<ptrdiff_t>(o) * attrs.len * v.inner);
      break;
    }
    case OpKind::kReshape: {
      arity(1);
      if (numel(attrs.shape) != inputs[0].size())
        shape_fail(kind, shape_str(inputs[0].shape()) + " -> " +
                             shape_str(attrs.shape) + " changes element count");
      out_shape = attrs.shape;
      out.assign(inputs[0].values().begin(), inputs[0].values().end());
      break;
    }
    case OpKind::kPermute: {
      arity(1);
      const int rank = inputs[0].rank();
      if (static_cast<int>(attrs.axes.size()) != rank)
        shape_fail(kind, "axes size " + std::to_string(attrs.axes.size()) +
                             " for rank " + std::to_string(rank));
      std::vector<bool> seen(static_cast<size_t>(rank), false);
      for (int ax : attrs.axes) {
        if (ax < 0 || ax >= rank || seen[static_cast<size_t>(ax)])
          shape_fail(kind, "invalid axes permutation");
        seen[static_cast<size_t>(ax)] = true;
      }
      out_shape.resize(static_cast<size_t>(rank));
      for (int i = 0; i < rank; ++i)
        out_shape[static_cast<size_t>(i)] =
            inputs[0].dim(attrs.axes[static_cast<size_t>(i)]);
      out.resize(static_cast<size_t>(numel(out_shape)));
      const auto in_strides = strides_of(inputs[0].shape());
      const auto out_strides = strides_of(out_shape);
      const auto src = inputs[0].values();
      const int n = static_cast<int>(out.size());
      for (int li = 0; li < n; ++li) {
        int rem = li, in_off = 0;
        for (int d = 0; d < rank; ++d) {
          const int coord = rem / out_strides[static_cast<size_t>(d)];
          rem %= out_strides[static_cast<size_t>(d)];
          in_off += coord *
                    in_strides[static_cast<size_t>(attrs.axes[static_cast<size_t>(d)])];
        }
        out[static_cast<size_t>(li)] = src[static_cast<size_t>(in_off)];
      }
      break;
    }
    case OpKind::kSumAxis:
    case OpKind::kMeanAxis: {
      arity(1);
      check_axis(kind, inputs[0].shape(), attrs.axis);
      const auto& in_shape = inputs[0].shape();
      out_shape.clear();
      for (int d = 0; d < static_cast<int>(in_shape.size()); ++d)
        if (d != attrs.axis) out_shape.push_back(in_shape[static_cast<size_t>(d)]);
      if (out_shape.empty()) out_shape = {1};
      const auto v = axis_view(in_shape, attrs.axis);
      const auto src = inputs[0].values();
      out.assign(static_cast<size_t>(v.outer) * v.inner, 0.0);
      for (int o = 0; o < v.outer; ++o)
        for (int j = 0; j < v.len; ++j)
          for (int in = 0; in < v.inner; ++in)
            out[static_cast<size_t>(o * v.inner + in)] +=
                src[static_cast<size_t>((o * v.len + j) * v.inner + in)];
      if (kind == OpKind::kMeanAxis)
        for (auto& x : out) x /= v.len;
      break;
    }
    case OpKind::kSumAll:
    case OpKind::kMeanAll:
    case OpKind::kSqNorm: {
      arity(1);
      out_shape = {1};
      double acc = 0.0;
      for (double x : inputs[0].values())
        acc += (kind == OpKind::kSqNorm) ? x * x : x;
      if (kind == OpKind::kMeanAll) acc /= inputs[0].size();
      out = {acc};
      break;
    }
  }

  auto od = std::make_shared<TensorData>();
  od->shape = std::move(out_shape);
  od->values = std::move(out);
  for (const auto& t : inputs)
    if (t.requires_grad()) od->requires_grad = true;

  if (recording_ && od->requires_grad) {
    TapeRecord rec;
    rec.kind = kind;
    rec.attrs = attrs;
    rec.inputs.reserve(inputs.size());
    for (const auto& t : inputs) rec.inputs.push_back(t.data());
    rec.output = od;
    records_.push_back(std::move(rec));
    used_[static_cast<size_t>(static_cast<int>(kind))] = true;
  }
  return Tensor(std::move(od));
}

namespace {

void ensure_zero_grad(TensorData& d) {
  d.grad.assign(d.values.size(), 0.0);
}

void backward_record(const TapeRecord& rec) {
  const auto& g = rec.output->grad;
  const auto& attrs = rec.attrs;
  auto wants = [&](size_t i) { return rec.inputs[i]->requires_grad; };
  auto gin = [&](size_t i) -> std::vector<double>& {
    return rec.inputs[i]->grad;
  };

  switch (rec.kind) {
    case OpKind::kMatmul: {
      const auto& a = *rec.inputs[0];
      const auto& b = *rec.inputs[1];
      const int k = a.shape[a.shape.size() - 1];
      const int m = a.shape[a.shape.size() - 2];
      const int n = b.shape[1];
      const int batch = static_cast<int>(a.values.size()) / (m * k);
      for (int bi = 0; bi < batch; ++bi) {
        const double* gout = g.data() + static_cast<ptrdiff_t>(bi) * m * n;
        if (wants(0))
          matmul_a_bt_acc(gout, b.values.data(),
                          gin(0).data() + static_cast<ptrdiff_t>(bi) * m * k,
                          m, k, n);
        if (wants(1))
          matmul_at_b_acc(a.values.data() + static_cast<ptrdiff_t>(bi) * m * k,
                          gout, gin(1).data(), m, k, n);
      }
      break;
    }
    case OpKind::kAdd:
      if (wants(0))
        for (size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i];
      if (wants(1))
        for (size_t i = 0; i < g.size(); ++i) gin(1)[i] += g[i];
      break;
    case OpKind::kSub:
      if (wants(0))
        for (size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i];
      if (wants(1))
        for (size_t i = 0; i < g.size(); ++i) gin(1)[i] -= g[i];
      break;
    case OpKind::kMul: {
      const auto& a = rec.inputs[0]->values;
      const auto& b = rec.inputs[1]->values;
      if (wants(0))
        for (size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i] * b[i];
      if (wants(1))
        for (size_t i = 0; i < g.size(); ++i) gin(1)[i] += g[i] * a[i];
      break;
    }
    case OpKind::kDiv: {
      const auto& a = rec.inputs[0]->values;
      const auto& b = rec.inputs[1]->values;
      if (wants(0))
        for (size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i] / b[i];
      if (wants(1))
        for (size_t i = 0; i < g.size(); ++i)
          gin(1)[i] -= g[i] * a[i] / (b[i] * b[i]);
      break;
    }
    case OpKind::kScale:
      for (size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i] * attrs.alpha;
      break;
    case OpKind::kAddConst:
      for (size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i];
      break;
    case OpKind::kRelu: {
      const auto& x = rec.inputs[0]->values;
      for (size_t i = 0; i < g.size(); ++i)
        if (x[i] > 0) gin(0)[i] += g[i];
      break;
    }
    case OpKind::kLeakyRelu: {
      const auto& x = rec.inputs[0]->values;
      for (size_t i = 0; i < g.size(); ++i)
        gin(0)[i] += g[i] * (x[i] > 0 ? 1.0 : attrs.alpha);
      break;
    }
    case OpKind::kTanh: {
      const auto& y = rec.output->values;
      for (size_t i = 0; i < g.size(); ++i)
        gin(0)[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case OpKind::kExp: {
      const auto& y = rec.output->values;
      for (size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i] * y[i];
      break;
    }
    case OpKind::kLog: {
      const auto& x = rec.inputs[0]->values;
      for (size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i] / x[i];
      break;
    }
    case OpKind::kPowConst: {
      const auto& x = rec.inputs[0]->values;
      for (size_t i = 0; i < g.size(); ++i)
        gin(0)[i] += g[i] * attrs.alpha * std::pow(x[i], attrs.alpha - 1.0);
      break;
    }
    case OpKind::kSoftmax: {
      const auto& y = rec.output->values;
      const auto v = axis_view(rec.output->shape, attrs.axis);
      for (int o = 0; o < v.outer; ++o) {
        for (int in = 0; in < v.inner; ++in) {
          const auto idx = [&](int j) {
            return static_cast<size_t>((o * v.len + j) * v.inner + in);
          };
          double dot = 0.0;
          for (int j = 0; j < v.len; ++j) dot += g[idx(j)] * y[idx(j)];
          for (int j = 0; j < v.len; ++j)
            gin(0)[idx(j)] += y[idx(j)] * (g[idx(j)] - dot);
        }
      }
      break;
    }
    case OpKind::kConcat: {
      const auto v = axis_view(rec.output->shape, attrs.axis);
      int pos = 0;
      for (size_t t = 0; t < rec.inputs.size(); ++t) {
        const int len = rec.inputs[t]->shape[static_cast<size_t>(attrs.axis)];
        if (wants(t)) {
          auto& gi = gin(t);
          for (int o = 0; o < v.outer; ++o) {
            const double* src =
                g.data() + (static_cast<ptrdiff_t>(o) * v.len + pos) * v.inner;
            double* dst = gi.data() + static_cast<ptrdiff_t>(o) * len * v.inner;
            for (int i = 0; i < len * v.inner; ++i) dst[i] += src[i];
          }
        }
        pos += len;
      }
      break;
    }
    case OpKind::kNarrow: {
      const auto v = axis_view(rec.inputs[0]->shape, attrs.axis);
      auto& gi = gin(0);
      for (int o = 0; o < v.outer; ++o) {
        const double* src =
            g.data() + static_cast<ptrdiff_t>(o) * attrs.len * v.inner;
        double* dst = gi.data() +
                      (static_cast<ptrdiff_t>(o) * v.len + attrs.start) * v.inner;
        for (int i = 0; i < attrs.len * v.inner; ++i) dst[i] += src[i];
      }
      break;
    }
    case OpKind::kReshape:
      for (size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i];
      break;
    case OpKind::kPermute: {
      const int rank = static_cast<int>(rec.output->shape.size());
      const auto in_strides = strides_of(rec.inputs[0]->shape);
      const auto out_strides = strides_of(rec.output->shape);
      auto& gi = gin(0);
      const int n = static_cast<int>(g.size());
      for (int li = 0; li < n; ++li) {
        int rem = li, in_off = 0;
        for (int d = 0; d < rank; ++d) {
          const int coord = rem / out_strides[static_cast<size_t>(d)];
          rem %= out_strides[static_cast<size_t>(d)];
          in_off +=
              coord *
              in_strides[static_cast<size_t>(attrs.axes[static_cast<size_t>(d)])];
        }
        gi[static_cast<size_t>(in_off)] += g[static_cast<size_t>(li)];
      }
      break;
    }
    case OpKind::kSumAxis:
    case OpKind::kMeanAxis: {
      const auto v = axis_view(rec.inputs[0]->shape, attrs.axis);
      const double f = (rec.kind == OpKind::kMeanAxis) ? 1.0 / v.len : 1.0;
      auto& gi = gin(0);
      for (int o = 0; o < v.outer; ++o)
        for (int j = 0; j < v.len; ++j)
          for (int in = 0; in < v.inner; ++in)
            gi[static_cast<size_t>((o * v.len + j) * v.inner + in)] +=
                f * g[static_cast<size_t>(o * v.inner + in)];
      break;
    }
    case OpKind::kSumAll:
      for (auto& x : gin(0)) x += g[0];
      break;
    case OpKind::kMeanAll: {
      const double f = 1.0 / static_cast<double>(rec.inputs[0]->values.size());
      for (auto& x : gin(0)) x += g[0] * f;
      break;
    }
    case OpKind::kSqNorm: {
      const auto& x = rec.inputs[0]->values;
      for (size_t i = 0; i < x.size(); ++i) gin(0)[i] += 2.0 * g[0] * x[i];
      break;
    }
  }
}

}  // namespace

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw ContractError("backward: loss has shape " + shape_str(loss.shape()) +
                        ", expected a scalar");
  std::unordered_set<TensorData*> seen;
  for (auto& rec : records_) {
    for (auto& in : rec.inputs)
      if (in->requires_grad && seen.insert(in.get()).second)
        ensure_zero_grad(*in);
    if (seen.insert(rec.output.get()).second) ensure_zero_grad(*rec.output);
  }
  if (seen.insert(loss.data().get()).second) ensure_zero_grad(*loss.data());
  loss.data()->grad[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it)
    backward_record(*it);
}

namespace {
Tensor apply1(Tape& t, OpKind k, const Tensor& a, const OpAttrs& attrs = {}) {
  const Tensor in[] = {a};
  return t.apply(k, in, attrs);
}
Tensor apply2(Tape& t, OpKind k, const Tensor& a, const Tensor& b,
              const OpAttrs& attrs = {}) {
  const Tensor in[] = {a, b};
  return t.apply(k, in, attrs);
}
}  // namespace

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b) {
  return apply2(t, OpKind::kMatmul, a, b);
}
Tensor add(Tape& t, const Tensor& a, const Tensor& b) {
  return apply2(t, OpKind::kAdd, a, b);
}
Tensor sub(Tape& t, const Tensor& a, const Tensor& b) {
  return apply2(t, OpKind::kSub, a, b);
}
Tensor mul(Tape& t, const Tensor& a, const Tensor& b) {
  return apply2(t, OpKind::kMul, a, b);
}
Tensor div(Tape& t, const Tensor& a, const Tensor& b) {
  return apply2(t, OpKind::kDiv, a, b);
}
namespace {
OpAttrs alpha_attrs(double alpha) {
  OpAttrs a;
  a.alpha = alpha;
  return a;
}
OpAttrs axis_attrs(int axis) {
  OpAttrs a;
  a.axis = axis;
  return a;
}
}  // namespace

Tensor scale(Tape& t, const Tensor& a, double alpha) {
  return apply1(t, OpKind::kScale, a, alpha_attrs(alpha));
}
Tensor add_const(Tape& t, const Tensor& a, double alpha) {
  return apply1(t, OpKind::kAddConst, a, alpha_attrs(alpha));
}
Tensor relu(Tape& t, const Tensor& a) { return apply1(t, OpKind::kRelu, a); }
Tensor leaky_relu(Tape& t, const Tensor& a, double slope) {
  return apply1(t, OpKind::kLeakyRelu, a, alpha_attrs(slope));
}
Tensor tanh_op(Tape& t, const Tensor& a) {
  return apply1(t, OpKind::kTanh, a);
}
Tensor exp_op(Tape& t, const Tensor& a) { return apply1(t, OpKind::kExp, a); }
Tensor log_op(Tape& t, const Tensor& a) { return apply1(t, OpKind::kLog, a); }
Tensor pow_const(Tape& t, const Tensor& a, double exponent) {
  return apply1(t, OpKind::kPowConst, a, alpha_attrs(exponent));
}
Tensor softmax(Tape& t, const Tensor& a, int axis) {
  return apply1(t, OpKind::kSoftmax, a, axis_attrs(axis));
}
Tensor concat(Tape& t, std::span<const Tensor> inputs, int axis) {
  return t.apply(OpKind::kConcat, inputs, axis_attrs(axis));
}
Tensor narrow(Tape& t, const Tensor& a, int axis, int start, int len) {
  OpAttrs attrs;
  attrs.axis = axis;
  attrs.start = start;
  attrs.len = len;
  return apply1(t, OpKind::kNarrow, a, attrs);
}
Tensor reshape(Tape& t, const Tensor& a, Shape shape) {
  OpAttrs attrs;
  attrs.shape = std::move(shape);
  return apply1(t, OpKind::kReshape, a, attrs);
}
Tensor permute(Tape& t, const Tensor& a, std::vector<int> axes) {
  OpAttrs attrs;
  attrs.axes = std::move(axes);
  return apply1(t, OpKind::kPermute, a, attrs);
}
Tensor sum_axis(Tape& t, const Tensor& a, int axis) {
  return apply1(t, OpKind::kSumAxis, a, axis_attrs(axis));
}
Tensor mean_axis(Tape& t, const Tensor& a, int axis) {
  return apply1(t, OpKind::kMeanAxis, a, axis_attrs(axis));
}
Tensor sum_all(Tape& t, const Tensor& a) {
  return apply1(t, OpKind::kSumAll, a);
}
Tensor mean_all(Tape& t, const Tensor& a) {
  return apply1(t, OpKind::kMeanAll, a);
}
Tensor sqnorm(Tape& t, const Tensor& a) {
  return apply1(t, OpKind::kSqNorm, a);
}

}  // namespace tgnn
