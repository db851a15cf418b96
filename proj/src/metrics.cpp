#include "matk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

using nlohmann::json;

namespace matk {

namespace {

void check_square_symmetric(const Tensor& m, double tol) {
  if (m.rank() != 2 || m.dim(0) != m.dim(1))
    throw Error("matrix must be square, got " + m.shape_str());
  const int d = m.dim(0);
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      if (std::abs(static_cast<double>(m.at(i, j)) - m.at(j, i)) > tol)
        throw Error("matrix is not symmetric at (" + std::to_string(i) + "," +
                    std::to_string(j) + ")");
    }
  }
}

}  // namespace

SymEigen sym_eigen(const Tensor& m) {
  check_square_symmetric(m, 1e-6);
  const int d = m.dim(0);
  std::vector<double> a(static_cast<size_t>(d) * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a[static_cast<size_t>(i) * d + j] = m.at(i, j);
  std::vector<double> v(static_cast<size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) v[static_cast<size_t>(i) * d + i] = 1.0;

  auto idx = [d](int i, int j) { return static_cast<size_t>(i) * d + j; };

  // cyclic Jacobi sweeps
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) off += a[idx(i, j)] * a[idx(i, j)];
    if (off < 1e-24) break;
    for (int p = 0; p < d - 1; ++p) {
      for (int q = p + 1; q < d; ++q) {
        const double apq = a[idx(p, q)];
        if (std::abs(apq) < 1e-300) continue;
        const double app = a[idx(p, p)], aqq = a[idx(q, q)];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < d; ++k) {
          const double akp = a[idx(k, p)], akq = a[idx(k, q)];
          a[idx(k, p)] = c * akp - s * akq;
          a[idx(k, q)] = s * akp + c * akq;
        }
        for (int k = 0; k < d; ++k) {
          const double apk = a[idx(p, k)], aqk = a[idx(q, k)];
          a[idx(p, k)] = c * apk - s * aqk;
          a[idx(q, k)] = s * apk + c * aqk;
        }
        for (int k = 0; k < d; ++k) {
          const double vkp = v[idx(k, p)], vkq = v[idx(k, q)];
          v[idx(k, p)] = c * vkp - s * vkq;
          v[idx(k, q)] = s * vkp + c * vkq;
        }
      }
    }
  }

  // sort ascending by eigenvalue, permuting vector columns alongside
  std::vector<int> order(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return a[idx(x, x)] < a[idx(y, y)]; });

  SymEigen out;
  out.values.resize(static_cast<size_t>(d));
  out.vectors = Tensor({d, d});
  for (int j = 0; j < d; ++j) {
    const int src = order[static_cast<size_t>(j)];
    out.values[static_cast<size_t>(j)] = a[idx(src, src)];
    for (int i = 0; i < d; ++i)
      out.vectors.at(i, j) = static_cast<float>(v[idx(i, src)]);
  }
  return out;
}

double min_eigenvalue(const Tensor& m) { return sym_eigen(m).values.front(); }

Tensor project_psd(const Tensor& m, double tol) {
  SymEigen eig = sym_eigen(m);
  const int d = m.dim(0);
  Tensor out({d, d});
  // V diag(max(lambda, 0)) V^T, dropping eigenvalues below tol
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      double acc = 0.0;
      for (int k = 0; k < d; ++k) {
        const double lambda = eig.values[static_cast<size_t>(k)];
        if (lambda < tol) continue;
        acc += lambda * eig.vectors.at(i, k) * eig.vectors.at(j, k);
      }
      out.at(i, j) = static_cast<float>(acc);
      out.at(j, i) = static_cast<float>(acc);
    }
  }
  return out;
}

MetricSpec MetricSpec::euclidean() { return MetricSpec{MetricKind::kEuclidean, Tensor()}; }

MetricSpec MetricSpec::mahalanobis(const Tensor& m) {
  check_square_symmetric(m, 1e-6);
  const double min_eig = min_eigenvalue(m);
  if (min_eig < -1e-8) {
    throw Error("mahalanobis matrix is not PSD: min eigenvalue " + std::to_string(min_eig));
  }
  return MetricSpec{MetricKind::kMahalanobis, m};
}

float metric_distance(const MetricSpec& metric, const Tensor& p, const Tensor& x) {
  if (p.size() != x.size())
    throw Error("metric_distance dimension mismatch: " + p.shape_str() + " vs " + x.shape_str());
  const int64_t d = p.size();
  double acc = 0.0;
  if (metric.kind == MetricKind::kEuclidean) {
    for (int64_t i = 0; i < d; ++i) {
      const double diff = static_cast<double>(p.at(i)) - x.at(i);
      acc += diff * diff;
    }
  } else {
    if (metric.m.rank() != 2 || metric.m.dim(0) != d)
      throw Error("mahalanobis matrix shape " + metric.m.shape_str() +
                  " does not match feature dim " + std::to_string(d));
    std::vector<double> diff(static_cast<size_t>(d));
    for (int64_t i = 0; i < d; ++i) diff[static_cast<size_t>(i)] = static_cast<double>(p.at(i)) - x.at(i);
    for (int64_t i = 0; i < d; ++i) {
      double rowdot = 0.0;
      const float* row = metric.m.data() + static_cast<size_t>(i) * d;
      for (int64_t j = 0; j < d; ++j) rowdot += row[j] * diff[static_cast<size_t>(j)];
      acc += diff[static_cast<size_t>(i)] * rowdot;
    }
  }
  return acc < 0.0 ? 0.0f : static_cast<float>(acc);
}

Tensor pairwise_distances(const MetricSpec& metric, const Tensor& p_feats,
                          const Tensor& x_feats) {
  if (p_feats.rank() != 2 || x_feats.rank() != 2 || p_feats.dim(1) != x_feats.dim(1))
    throw Error("pairwise_distances dimension mismatch: " + p_feats.shape_str() + " vs " +
                x_feats.shape_str());
  const int np = p_feats.dim(0), nx = x_feats.dim(0), d = p_feats.dim(1);
  Tensor out({np, nx});
  for (int i = 0; i < np; ++i) {
    Tensor p({d}, std::vector<float>(p_feats.data() + static_cast<size_t>(i) * d,
                                     p_feats.data() + static_cast<size_t>(i + 1) * d));
    for (int j = 0; j < nx; ++j) {
      Tensor x({d}, std::vector<float>(x_feats.data() + static_cast<size_t>(j) * d,
                                       x_feats.data() + static_cast<size_t>(j + 1) * d));
      out.at(i, j) = metric_distance(metric, p, x);
    }
  }
  return out;
}

PreparedAttackLoss::PreparedAttackLoss(std::span<const FeatureModel* const> models,
                                       const MetricSpec& metric,
                                       std::span<const ImageRecord> probe_refs) {
  if (models.empty()) throw Error("attack_loss requires at least one model");
  if (probe_refs.empty()) throw Error("attack_loss requires at least one probe reference");
  const auto shape = models.front()->input_shape();
  for (const FeatureModel* m : models) {
    if (m->input_shape() != shape)
      throw Error("attack_loss models disagree on input shape");
  }
  input_dim_ = shape[0] * shape[1] * shape[2];
  for (const auto& probe : probe_refs) {
    if (probe.pixels.size() != input_dim_)
      throw Error("probe image shape " + probe.pixels.shape_str() +
                  " does not match model input");
  }

  x_root_ = graph_.input("gallery_pixels");

  // Probe features are constants w.r.t. the gallery pixels: compute them per
  // model up front and bind the rows.
  NodeId metric_m = -1;
  if (metric.kind == MetricKind::kMahalanobis) {
    metric_m = graph_.input("metric_m");
    constants_[metric_m] = metric.m;
  }

  NodeId model_acc = -1;
  for (size_t mi = 0; mi < models.size(); ++mi) {
    const FeatureModel& model = *models[mi];

    Tensor probe_batch({static_cast<int>(probe_refs.size()), input_dim_});
    for (size_t i = 0; i < probe_refs.size(); ++i) {
      std::copy(probe_refs[i].pixels.data(), probe_refs[i].pixels.data() + input_dim_,
                probe_batch.data() + i * static_cast<size_t>(input_dim_));
    }
    Graph probe_graph;
    Bindings probe_bindings;
    NodeId probe_x = probe_graph.input("probe_pixels");
    NodeId probe_feats = model.build_features(probe_graph, probe_x, &probe_bindings);
    probe_bindings[probe_x] = std::move(probe_batch);
    probe_graph.forward(probe_bindings);
    const Tensor feats = probe_graph.value(probe_feats);
    const int fd = feats.dim(1);

    NodeId gallery_feats = model.build_features(graph_, x_root_, &constants_);
    if (metric.kind == MetricKind::kMahalanobis && metric.m.dim(0) != fd)
      throw Error("mahalanobis matrix shape " + metric.m.shape_str() +
                  " does not match feature dim " + std::to_string(fd));

    NodeId probe_acc = -1;
    for (int pi = 0; pi < feats.dim(0); ++pi) {
      NodeId ref = graph_.input("probe_feat_" + std::to_string(mi) + "_" + std::to_string(pi));
      constants_[ref] = Tensor({1, fd}, std::vector<float>(feats.data() + static_cast<size_t>(pi) * fd,
                                                           feats.data() + static_cast<size_t>(pi + 1) * fd));
      NodeId diff = graph_.sub(gallery_feats, ref);
      NodeId dist = metric.kind == MetricKind::kEuclidean
                        ? graph_.sum(graph_.square(diff))
                        : graph_.quad_form(diff, metric_m);
      probe_acc = probe_acc < 0 ? dist : graph_.add(probe_acc, dist);
    }
    NodeId model_loss = graph_.scale(probe_acc, 1.0f / static_cast<float>(feats.dim(0)));
    model_acc = model_acc < 0 ? model_loss : graph_.add(model_acc, model_loss);
  }
  loss_ = graph_.scale(model_acc, 1.0f / static_cast<float>(models.size()));
}

AttackLoss PreparedAttackLoss::eval(const Tensor& raw_pixels) {
  if (raw_pixels.size() != input_dim_)
    throw Error("gallery pixel count " + std::to_string(raw_pixels.size()) +
                " does not match model input " + std::to_string(input_dim_));
  Bindings bindings = constants_;
  bindings[x_root_] = raw_pixels.reshaped({1, input_dim_});
  graph_.forward(bindings);
  AttackLoss out;
  out.loss = graph_.value(loss_).at(0);
  out.gradient = graph_.grad(loss_, {x_root_}).at(x_root_);
  return out;
}

float PreparedAttackLoss::eval_loss_only(const Tensor& raw_pixels) {
  if (raw_pixels.size() != input_dim_)
    throw Error("gallery pixel count " + std::to_string(raw_pixels.size()) +
                " does not match model input " + std::to_string(input_dim_));
  Bindings bindings = constants_;
  bindings[x_root_] = raw_pixels.reshaped({1, input_dim_});
  graph_.forward(bindings);
  return graph_.value(loss_).at(0);
}

AttackLoss attack_loss(std::span<const FeatureModel* const> models, const MetricSpec& metric,
                       std::span<const ImageRecord> probe_refs,
                       const ImageRecord& gallery_image) {
  PreparedAttackLoss prepared(models, metric, probe_refs);
  return prepared.eval(gallery_image.pixels);
}

Tensor load_mahalanobis_matrix(const std::string& path, double* correction) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mahalanobis matrix file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("invalid mahalanobis matrix JSON in " + path + ": " + e.what());
  }
  const int d = j.at("dim").get<int>();
  const auto rows = j.at("rows").get<std::vector<std::vector<double>>>();
  if (static_cast<int>(rows.size()) != d)
    throw Error("mahalanobis matrix row count does not match dim in " + path);
  Tensor m({d, d});
  for (int i = 0; i < d; ++i) {
    if (static_cast<int>(rows[static_cast<size_t>(i)].size()) != d)
      throw Error("mahalanobis matrix row " + std::to_string(i) + " has wrong length in " + path);
    for (int jx = 0; jx < d; ++jx)
      m.at(i, jx) = static_cast<float>(rows[static_cast<size_t>(i)][static_cast<size_t>(jx)]);
  }
  // symmetrize, then clamp any negative eigenvalues
  Tensor sym({d, d});
  for (int i = 0; i < d; ++i)
    for (int jx = 0; jx < d; ++jx)
      sym.at(i, jx) = 0.5f * (m.at(i, jx) + m.at(jx, i));
  Tensor projected = project_psd(sym, 1e-8);
  double corr = 0.0;
  for (int64_t i = 0; i < m.size(); ++i)
    corr = std::max(corr, static_cast<double>(std::abs(projected.at(i) - m.at(i))));
  if (correction) *correction = corr;
  return projected;
}

}  // namespace matk
