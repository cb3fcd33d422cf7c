#include "tgnn/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "tgnn/error.hpp"

namespace tgnn {

DomainAttentionParams make_adapt_params(int d_v, int d_h, bool use_bias,
                                        Rng& rng) {
  DomainAttentionParams p;
  p.d_h = d_h;
  p.use_bias = use_bias;
  p.w_f = Tensor::param_uniform({d_v, d_h}, rng);
  p.h = Tensor::param_uniform({d_h, 1}, rng);
  p.pool_w = Tensor::param_uniform({d_v, 1}, rng);
  if (use_bias) p.b_f = Tensor::param({1, d_h}, std::vector<double>(d_h, 0.0));
  return p;
}

FeatureVectorSet flatten_features(Tape& tape, const Tensor& stacked,
                                  DomainTag tag) {
  const int n = stacked.dim(0);
  const int d_v = stacked.dim(1) * stacked.dim(2);
  return {reshape(tape, stacked, {n, d_v}), tag};
}

Tensor domain_attention(Tape& tape, const FeatureVectorSet& set,
                        const DomainAttentionParams& params) {
  Tensor proj = matmul(tape, set.matrix, params.w_f);  // [M, d_h]
  if (params.use_bias)
    proj = add(tape, proj,
               matmul(tape, Tensor::full({set.count(), 1}, 1.0), params.b_f));
  Tensor scores = matmul(tape, tanh_op(tape, proj), params.h);  // [M, 1]
  return softmax(tape, scores, 0);
}

Tensor context_vector(Tape& tape, const FeatureVectorSet& set,
                      const Tensor& beta) {
  return matmul(tape, permute(tape, set.matrix, {1, 0}), beta);  // [d_v, 1]
}

namespace {

// [m, n] matrix of squared distances between the rows of x and y.
Tensor pairwise_sqdist(Tape& tape, const Tensor& x, const Tensor& y) {
  const int m = x.dim(0);
  const int n = y.dim(0);
  Tensor x2 = reshape(tape, sum_axis(tape, mul(tape, x, x), 1), {m, 1});
  Tensor y2 = reshape(tape, sum_axis(tape, mul(tape, y, y), 1), {1, n});
  Tensor cross = matmul(tape, x, permute(tape, y, {1, 0}));
  Tensor d2 = add(tape, matmul(tape, x2, Tensor::full({1, n}, 1.0)),
                  matmul(tape, Tensor::full({m, 1}, 1.0), y2));
  d2 = sub(tape, d2, scale(tape, cross, 2.0));
  // Rounding can leave tiny negatives on coincident rows.
  return relu(tape, d2);
}

// Median pairwise distance of the pooled rows; used as the kernel bandwidth
// base. Computed off the tape, so it is a constant of the loss.
double median_pairwise_distance(const FeatureVectorSet& a,
                                const FeatureVectorSet& b) {
  std::vector<const FeatureVectorSet*> sets = {&a, &b};
  std::vector<std::vector<double>> rows;
  for (const auto* s : sets) {
    const auto v = s->matrix.values();
    const int d = s->dim();
    for (int i = 0; i < s->count(); ++i)
      rows.emplace_back(v.begin() + static_cast<ptrdiff_t>(i) * d,
                        v.begin() + static_cast<ptrdiff_t>(i + 1) * d);
  }
  std::vector<double> dists;
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = i + 1; j < rows.size(); ++j) {
      double ss = 0.0;
      for (size_t k = 0; k < rows[i].size(); ++k) {
        const double d = rows[i][k] - rows[j][k];
        ss += d * d;
      }
      dists.push_back(std::sqrt(ss));
    }
  }
  if (dists.empty()) return 1.0;
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2,
                   dists.end());
  const double med = dists[dists.size() / 2];
  return med > 0.0 ? med : 1.0;
}

// Mean of the five RBF kernels at bandwidth scales {0.25, 0.5, 1, 2, 4}.
Tensor multi_kernel(Tape& tape, const Tensor& sqdist, double base) {
  static constexpr double kScales[] = {0.25, 0.5, 1.0, 2.0, 4.0};
  Tensor acc;
  for (double s : kScales) {
    const double denom = 2.0 * (base * s) * (base * s);
    Tensor k = exp_op(tape, scale(tape, sqdist, -1.0 / denom));
    acc = acc.defined() ? add(tape, acc, k) : k;
  }
  return scale(tape, acc, 1.0 / 5.0);
}

// Mean of the off-diagonal entries (unbiased within-set term); falls back to
// the biased mean for singleton sets.
Tensor offdiag_mean(Tape& tape, const Tensor& k) {
  const int m = k.dim(0);
  if (m < 2) return mean_all(tape, k);
  Tensor diag_sum = sum_all(tape, mul(tape, k, Tensor::identity(m)));
  Tensor off = sub(tape, sum_all(tape, k), diag_sum);
  return scale(tape, off, 1.0 / (static_cast<double>(m) * (m - 1)));
}

Tensor mmd_loss(Tape& tape, const FeatureVectorSet& source,
                const FeatureVectorSet& target) {
  const double base = median_pairwise_distance(source, target);
  Tensor kxx = multi_kernel(
      tape, pairwise_sqdist(tape, source.matrix, source.matrix), base);
  Tensor kyy = multi_kernel(
      tape, pairwise_sqdist(tape, target.matrix, target.matrix), base);
  Tensor kxy = multi_kernel(
      tape, pairwise_sqdist(tape, source.matrix, target.matrix), base);
  Tensor mmd2 = sub(tape, add(tape, offdiag_mean(tape, kxx),
                              offdiag_mean(tape, kyy)),
                    scale(tape, mean_all(tape, kxy), 2.0));
  return relu(tape, mmd2);  // unbiased estimate can dip below zero
}

// Covariance of the rows, divisor m - 1 (1 for singletons).
Tensor covariance(Tape& tape, const Tensor& x) {
  const int m = x.dim(0);
  Tensor mean = reshape(tape, mean_axis(tape, x, 0), {1, x.dim(1)});
  Tensor centered = sub(tape, x, matmul(tape, Tensor::full({m, 1}, 1.0), mean));
  Tensor cov = matmul(tape, permute(tape, centered, {1, 0}), centered);
  return scale(tape, cov, 1.0 / std::max(1, m - 1));
}

Tensor coral_loss(Tape& tape, const FeatureVectorSet& source,
                  const FeatureVectorSet& target) {
  const double d_v = source.dim();
  Tensor diff = sub(tape, covariance(tape, source.matrix),
                    covariance(tape, target.matrix));
  return scale(tape, sqnorm(tape, diff), 1.0 / (4.0 * d_v * d_v));
}

Tensor mean_pool(Tape& tape, const FeatureVectorSet& set) {
  return reshape(tape, mean_axis(tape, set.matrix, 0), {set.dim(), 1});
}

Tensor linear_pool(Tape& tape, const FeatureVectorSet& set,
                   const DomainAttentionParams& params) {
  Tensor beta = softmax(tape, matmul(tape, set.matrix, params.pool_w), 0);
  return context_vector(tape, set, beta);
}

}  // namespace

Tensor alignment_loss(Tape& tape, const FeatureVectorSet& source,
                      const FeatureVectorSet& target,
                      const DomainAttentionParams& params, AlignmentKind kind,
                      AlignDivisor divisor, int d_f) {
  if (source.count() < 1 || target.count() < 1)
    throw ContractError("alignment_loss: both feature sets must be nonempty");
  if (source.dim() != target.dim())
    throw ContractError("alignment_loss: feature dimensions differ (" +
                        std::to_string(source.dim()) + " vs " +
                        std::to_string(target.dim()) + ")");

  if (kind == AlignmentKind::kMmd) return mmd_loss(tape, source, target);
  if (kind == AlignmentKind::kCoral) return coral_loss(tape, source, target);

  Tensor c_s, c_t;
  switch (kind) {
    case AlignmentKind::kAvgPoolL2:
      c_s = mean_pool(tape, source);
      c_t = mean_pool(tape, target);
      break;
    case AlignmentKind::kLinearPoolL2:
      c_s = linear_pool(tape, source, params);
      c_t = linear_pool(tape, target, params);
      break;
    default:
      c_s = context_vector(tape, source, domain_attention(tape, source, params));
      c_t = context_vector(tape, target, domain_attention(tape, target, params));
      break;
  }
  const double denom =
      divisor == AlignDivisor::kDf ? d_f : static_cast<double>(source.dim());
  return scale(tape, sqnorm(tape, sub(tape, c_s, c_t)), 1.0 / denom);
}

void export_features_csv(const std::filesystem::path& path,
                         const FeatureVectorSet& source,
                         const FeatureVectorSet& target) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "domain,ped_index";
  for (int i = 0; i < source.dim(); ++i) out << ",v" << i;
  out << "\n";
  out.precision(9);
  for (const auto* set : {&source, &target}) {
    const char* tag = set->tag == DomainTag::kSource ? "source" : "target";
    const auto v = set->matrix.values();
    for (int i = 0; i < set->count(); ++i) {
      out << tag << "," << i;
      for (int j = 0; j < set->dim(); ++j)
        out << "," << v[static_cast<size_t>(i * set->dim() + j)];
      out << "\n";
    }
  }
}

}  // namespace tgnn
