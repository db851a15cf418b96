#ifndef MATK_METRICS_HPP_
#define MATK_METRICS_HPP_

#include <span>
#include <string>
#include <vector>

#include "matk/dataset.hpp"
#include "matk/feature_model.hpp"
#include "matk/graph.hpp"
#include "matk/tensor.hpp"

namespace matk {

enum class MetricKind { kEuclidean, kMahalanobis };

// Distance function over feature vectors: squared Euclidean, or the quadratic
// form (p-x)^T M (p-x) with a positive semidefinite M. Construct through the
// factories; mahalanobis() validates symmetry and PSD-ness once.
struct MetricSpec {
  MetricKind kind = MetricKind::kEuclidean;
  Tensor m;  // mahalanobis only, [d, d]

  static MetricSpec euclidean();
  static MetricSpec mahalanobis(const Tensor& m);
};

// Symmetric eigendecomposition (cyclic Jacobi). Returns eigenvalues ascending
// and matching eigenvector columns.
struct SymEigen {
  std::vector<double> values;
  Tensor vectors;  // [d, d], column j pairs with values[j]
};
SymEigen sym_eigen(const Tensor& m);

double min_eigenvalue(const Tensor& m);

// Clamps eigenvalues below tol to zero via symmetric eigendecomposition.
// Idempotent; input must be symmetric to 1e-6.
Tensor project_psd(const Tensor& m, double tol);

// Squared distance between two feature vectors; clamped at zero from below.
float metric_distance(const MetricSpec& metric, const Tensor& p, const Tensor& x);

// Entry (i, j) is metric_distance(p_i, x_j). Rows of the inputs are vectors.
Tensor pairwise_distances(const MetricSpec& metric, const Tensor& p_feats,
                          const Tensor& x_feats);

struct AttackLoss {
  float loss = 0.0f;
  Tensor gradient;  // w.r.t. raw gallery pixels, same layout as the input batch row
};

// Reusable attack-loss evaluator for one gallery image slot: mean over models
// of the mean distance between the (fixed) probe reference features and the
// features of the bound gallery pixels. Build once per image, evaluate per
// iteration.
class PreparedAttackLoss {
 public:
  PreparedAttackLoss(std::span<const FeatureModel* const> models, const MetricSpec& metric,
                     std::span<const ImageRecord> probe_refs);

  AttackLoss eval(const Tensor& raw_pixels);  // [1, H*W*C] or {H,W,C}
  float eval_loss_only(const Tensor& raw_pixels);

 private:
  Graph graph_;
  Bindings constants_;
  NodeId x_root_ = -1;
  NodeId loss_ = -1;
  int input_dim_ = 0;
};

// Loss and pixel gradient for a single gallery image (one-shot convenience).
AttackLoss attack_loss(std::span<const FeatureModel* const> models, const MetricSpec& metric,
                       std::span<const ImageRecord> probe_refs, const ImageRecord& gallery_image);

// JSON file {"dim": d, "rows": [[...], ...]}. The loader symmetrizes via
// (M + M^T)/2, PSD-projects with tol 1e-8 and reports the correction
// magnitude through *correction when non-null.
Tensor load_mahalanobis_matrix(const std::string& path, double* correction = nullptr);

}  // namespace matk

#endif  // MATK_METRICS_HPP_
