#include "matk/graph.hpp"

#include <cmath>
#include <cstdlib>

namespace matk {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "subtract";
    case OpKind::kScale: return "scalar-multiply";
    case OpKind::kMatMul: return "matrix-multiply";
    case OpKind::kRelu: return "relu";
    case OpKind::kL2NormalizeRows: return "l2-normalize";
    case OpKind::kSoftmaxCrossEntropy: return "softmax-cross-entropy";
    case OpKind::kSquare: return "square";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kQuadForm: return "quad-form";
    case OpKind::kRow: return "row";
  }
  return "?";
}

namespace {

[[noreturn]] void shape_error(OpKind kind, const Tensor& a, const Tensor& b) {
  throw Error(std::string("shape mismatch in op '") + op_name(kind) + "': " + a.shape_str() +
              " vs " + b.shape_str());
}

[[noreturn]] void shape_error(OpKind kind, const Tensor& a) {
  throw Error(std::string("unsupported shape in op '") + op_name(kind) + "': " + a.shape_str());
}

enum class Broadcast { kNone, kRow, kScalar };

Broadcast classify_broadcast(OpKind kind, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return Broadcast::kNone;
  if (b.size() == 1) return Broadcast::kScalar;
  if (a.rank() == 2 && b.rank() == 1 && b.dim(0) == a.dim(1)) return Broadcast::kRow;
  shape_error(kind, a, b);
}

// C[M,N] += A[M,K] * B[K,N]; per-row double accumulation keeps long sums stable.
Tensor matmul_values(const Tensor& a, const Tensor& b) {
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  std::vector<double> acc(static_cast<size_t>(n));
  for (int i = 0; i < m; ++i) {
    for (double& v : acc) v = 0.0;
    const float* arow = a.data() + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const float* brow = b.data() + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) acc[static_cast<size_t>(j)] += av * brow[j];
    }
    float* orow = out.data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) orow[j] = static_cast<float>(acc[static_cast<size_t>(j)]);
  }
  return out;
}

// out += A^T * B where A is [M,K], B is [M,N] -> [K,N]. Used for weight grads.
void matmul_at_b_accum(const Tensor& a, const Tensor& b, Tensor& out) {
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  for (int p = 0; p < k; ++p) {
    std::vector<double> acc(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < m; ++i) {
      const double av = a.at(i, p);
      if (av == 0.0) continue;
      const float* brow = b.data() + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) acc[static_cast<size_t>(j)] += av * brow[j];
    }
    float* orow = out.data() + static_cast<size_t>(p) * n;
    for (int j = 0; j < n; ++j)
      orow[j] = static_cast<float>(orow[j] + acc[static_cast<size_t>(j)]);
  }
}

// out += G * B^T where G is [M,N], B is [K,N] -> [M,K].
void matmul_g_bt_accum(const Tensor& g, const Tensor& b, Tensor& out) {
  const int m = g.dim(0), n = g.dim(1), k = b.dim(0);
  for (int i = 0; i < m; ++i) {
    const float* grow = g.data() + static_cast<size_t>(i) * n;
    float* orow = out.data() + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const float* brow = b.data() + static_cast<size_t>(p) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += static_cast<double>(grow[j]) * brow[j];
      orow[p] = static_cast<float>(orow[p] + acc);
    }
  }
}

}  // namespace

NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Graph::check_id(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
    throw Error("node id " + std::to_string(id) + " is not in the graph");
  }
  return id;
}

NodeId Graph::input(std::string name) {
  Node n;
  n.kind = OpKind::kInput;
  n.name = std::move(name);
  NodeId id = push(std::move(n));
  roots_.push_back(id);
  return id;
}

NodeId Graph::add(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kAdd;
  n.in = {check_id(a), check_id(b)};
  n.n_in = 2;
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kSub;
  n.in = {check_id(a), check_id(b)};
  n.n_in = 2;
  return push(std::move(n));
}

NodeId Graph::scale(NodeId a, float c) {
  Node n;
  n.kind = OpKind::kScale;
  n.in = {check_id(a), -1};
  n.n_in = 1;
  n.coeff = c;
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kMatMul;
  n.in = {check_id(a), check_id(b)};
  n.n_in = 2;
  return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
  Node n;
  n.kind = OpKind::kRelu;
  n.in = {check_id(a), -1};
  n.n_in = 1;
  return push(std::move(n));
}

NodeId Graph::l2_normalize_rows(NodeId a) {
  Node n;
  n.kind = OpKind::kL2NormalizeRows;
  n.in = {check_id(a), -1};
  n.n_in = 1;
  return push(std::move(n));
}

NodeId Graph::softmax_cross_entropy(NodeId logits, NodeId one_hot) {
  Node n;
  n.kind = OpKind::kSoftmaxCrossEntropy;
  n.in = {check_id(logits), check_id(one_hot)};
  n.n_in = 2;
  return push(std::move(n));
}

NodeId Graph::square(NodeId a) {
  Node n;
  n.kind = OpKind::kSquare;
  n.in = {check_id(a), -1};
  n.n_in = 1;
  return push(std::move(n));
}

NodeId Graph::sum(NodeId a) {
  Node n;
  n.kind = OpKind::kSum;
  n.in = {check_id(a), -1};
  n.n_in = 1;
  return push(std::move(n));
}

NodeId Graph::mean(NodeId a) {
  Node n;
  n.kind = OpKind::kMean;
  n.in = {check_id(a), -1};
  n.n_in = 1;
  return push(std::move(n));
}

NodeId Graph::quad_form(NodeId v, NodeId m) {
  Node n;
  n.kind = OpKind::kQuadForm;
  n.in = {check_id(v), check_id(m)};
  n.n_in = 2;
  return push(std::move(n));
}

NodeId Graph::row(NodeId m, int index) {
  Node n;
  n.kind = OpKind::kRow;
  n.in = {check_id(m), -1};
  n.n_in = 1;
  n.index = index;
  return push(std::move(n));
}

bool Graph::is_root(NodeId id) const {
  return id >= 0 && id < static_cast<NodeId>(nodes_.size()) &&
         nodes_[static_cast<size_t>(id)].kind == OpKind::kInput;
}

const std::string& Graph::root_name(NodeId id) const {
  return nodes_[static_cast<size_t>(check_id(id))].name;
}

NodeId Graph::output() const {
  if (nodes_.empty()) throw Error("graph is empty");
  return static_cast<NodeId>(nodes_.size()) - 1;
}

const Tensor& Graph::value(NodeId id) const {
  const Node& n = nodes_[static_cast<size_t>(check_id(id))];
  if (!n.has_value) throw Error("node value not computed; call forward first");
  return n.value;
}

void Graph::eval_node(NodeId id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  switch (n.kind) {
    case OpKind::kInput:
      if (!n.has_value) {
        throw Error("unbound root '" + (n.name.empty() ? std::to_string(id) : n.name) + "'");
      }
      return;
    case OpKind::kAdd:
    case OpKind::kSub: {
      const Tensor& a = nodes_[n.in[0]].value;
      const Tensor& b = nodes_[n.in[1]].value;
      const float sgn = n.kind == OpKind::kAdd ? 1.0f : -1.0f;
      Broadcast bc = classify_broadcast(n.kind, a, b);
      Tensor out = a;
      if (bc == Broadcast::kNone) {
        for (int64_t i = 0; i < out.size(); ++i) out.at(i) += sgn * b.at(i);
      } else if (bc == Broadcast::kScalar) {
        const float bv = sgn * b.at(0);
        for (int64_t i = 0; i < out.size(); ++i) out.at(i) += bv;
      } else {
        const int rows = a.dim(0), cols = a.dim(1);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j) out.at(i, j) += sgn * b.at(j);
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kScale: {
      Tensor out = nodes_[n.in[0]].value;
      for (int64_t i = 0; i < out.size(); ++i) out.at(i) *= n.coeff;
      n.value = std::move(out);
      break;
    }
    case OpKind::kMatMul: {
      const Tensor& a = nodes_[n.in[0]].value;
      const Tensor& b = nodes_[n.in[1]].value;
      if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_error(n.kind, a, b);
      n.value = matmul_values(a, b);
      break;
    }
    case OpKind::kRelu: {
      Tensor out = nodes_[n.in[0]].value;
      for (int64_t i = 0; i < out.size(); ++i) out.at(i) = out.at(i) > 0.0f ? out.at(i) : 0.0f;
      n.value = std::move(out);
      break;
    }
    case OpKind::kL2NormalizeRows: {
      const Tensor& a = nodes_[n.in[0]].value;
      if (a.rank() != 1 && a.rank() != 2) shape_error(n.kind, a);
      const int rows = a.rank() == 2 ? a.dim(0) : 1;
      const int cols = a.rank() == 2 ? a.dim(1) : a.dim(0);
      Tensor out = a;
      for (int i = 0; i < rows; ++i) {
        const float* src = a.data() + static_cast<size_t>(i) * cols;
        float* dst = out.data() + static_cast<size_t>(i) * cols;
        double sq = 0.0;
        for (int j = 0; j < cols; ++j) sq += static_cast<double>(src[j]) * src[j];
        if (sq == 0.0) continue;  // zero row stays zero
        const double r = std::sqrt(sq);
        for (int j = 0; j < cols; ++j) dst[j] = static_cast<float>(src[j] / r);
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kSoftmaxCrossEntropy: {
      const Tensor& logits = nodes_[n.in[0]].value;
      const Tensor& onehot = nodes_[n.in[1]].value;
      if (logits.rank() != 2 || !logits.same_shape(onehot)) shape_error(n.kind, logits, onehot);
      const int rows = logits.dim(0), cols = logits.dim(1);
      double loss = 0.0;
      for (int i = 0; i < rows; ++i) {
        const float* z = logits.data() + static_cast<size_t>(i) * cols;
        double zmax = z[0];
        for (int j = 1; j < cols; ++j) zmax = std::max(zmax, static_cast<double>(z[j]));
        double sumexp = 0.0;
        for (int j = 0; j < cols; ++j) sumexp += std::exp(z[j] - zmax);
        const double logsum = std::log(sumexp) + zmax;
        for (int j = 0; j < cols; ++j) {
          const double w = onehot.at(i, j);
          if (w != 0.0) loss += w * (logsum - z[j]);
        }
      }
      n.value = Tensor::scalar(static_cast<float>(loss));
      break;
    }
    case OpKind::kSquare: {
      Tensor out = nodes_[n.in[0]].value;
      for (int64_t i = 0; i < out.size(); ++i) out.at(i) *= out.at(i);
      n.value = std::move(out);
      break;
    }
    case OpKind::kSum:
    case OpKind::kMean: {
      const Tensor& a = nodes_[n.in[0]].value;
      double acc = 0.0;
      for (int64_t i = 0; i < a.size(); ++i) acc += a.at(i);
      if (n.kind == OpKind::kMean) acc /= static_cast<double>(a.size());
      n.value = Tensor::scalar(static_cast<float>(acc));
      break;
    }
    case OpKind::kQuadForm: {
      const Tensor& v = nodes_[n.in[0]].value;
      const Tensor& m = nodes_[n.in[1]].value;
      const bool v_ok = v.rank() == 1 || (v.rank() == 2 && v.dim(0) == 1);
      const int d = v.rank() == 1 ? v.dim(0) : v.dim(1);
      if (!v_ok || m.rank() != 2 || m.dim(0) != d || m.dim(1) != d) shape_error(n.kind, v, m);
      double acc = 0.0;
      for (int i = 0; i < d; ++i) {
        double rowdot = 0.0;
        const float* mrow = m.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) rowdot += static_cast<double>(mrow[j]) * v.at(j);
        acc += static_cast<double>(v.at(i)) * rowdot;
      }
      n.value = Tensor::scalar(static_cast<float>(acc));
      break;
    }
    case OpKind::kRow: {
      const Tensor& a = nodes_[n.in[0]].value;
      if (a.rank() != 2 || n.index < 0 || n.index >= a.dim(0)) {
        throw Error(std::string("op 'row': index ") + std::to_string(n.index) +
                    " out of range for shape " + a.shape_str());
      }
      const int cols = a.dim(1);
      std::vector<float> data(a.data() + static_cast<size_t>(n.index) * cols,
                              a.data() + static_cast<size_t>(n.index + 1) * cols);
      n.value = Tensor({cols}, std::move(data));
      break;
    }
  }
  n.has_value = true;
}

const Tensor& Graph::forward(const Bindings& bindings) {
  if (nodes_.empty()) throw Error("graph is empty");
  for (NodeId id : roots_) {
    Node& n = nodes_[static_cast<size_t>(id)];
    auto it = bindings.find(id);
    if (it == bindings.end()) {
      throw Error("unbound root '" + (n.name.empty() ? std::to_string(id) : n.name) + "'");
    }
    n.value = it->second;
    n.has_value = true;
  }
  for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id) {
    if (nodes_[static_cast<size_t>(id)].kind != OpKind::kInput) eval_node(id);
  }
  forward_done_ = true;
  return nodes_.back().value;
}

std::unordered_map<NodeId, Tensor> Graph::grad(NodeId scalar_output,
                                               const std::vector<NodeId>& wrt) {
  check_id(scalar_output);
  if (!forward_done_) throw Error("grad requires a prior forward pass");
  for (NodeId id : wrt) {
    if (!is_root(check_id(id))) {
      throw Error("grad target " + std::to_string(id) + " is not a root of the graph");
    }
  }
  const Tensor& out = nodes_[static_cast<size_t>(scalar_output)].value;
  if (out.size() != 1) {
    throw Error("grad output must be a scalar of shape [1], got " + out.shape_str());
  }

  std::vector<Tensor> grads(nodes_.size());
  std::vector<bool> has_grad(nodes_.size(), false);
  auto accum = [&](NodeId id) -> Tensor& {
    if (!has_grad[static_cast<size_t>(id)]) {
      grads[static_cast<size_t>(id)] = Tensor(nodes_[static_cast<size_t>(id)].value.shape());
      has_grad[static_cast<size_t>(id)] = true;
    }
    return grads[static_cast<size_t>(id)];
  };
  accum(scalar_output).at(0) = 1.0f;

  for (NodeId id = scalar_output; id >= 0; --id) {
    if (!has_grad[static_cast<size_t>(id)]) continue;
    const Node& n = nodes_[static_cast<size_t>(id)];
    const Tensor& g = grads[static_cast<size_t>(id)];
    switch (n.kind) {
      case OpKind::kInput:
        break;
      case OpKind::kAdd:
      case OpKind::kSub: {
        const Tensor& a = nodes_[n.in[0]].value;
        const Tensor& b = nodes_[n.in[1]].value;
        const float sgn = n.kind == OpKind::kAdd ? 1.0f : -1.0f;
        Tensor& da = accum(n.in[0]);
        for (int64_t i = 0; i < g.size(); ++i) da.at(i) += g.at(i);
        Tensor& db = accum(n.in[1]);
        Broadcast bc = classify_broadcast(n.kind, a, b);
        if (bc == Broadcast::kNone) {
          for (int64_t i = 0; i < g.size(); ++i) db.at(i) += sgn * g.at(i);
        } else if (bc == Broadcast::kScalar) {
          double acc = 0.0;
          for (int64_t i = 0; i < g.size(); ++i) acc += g.at(i);
          db.at(0) = static_cast<float>(db.at(0) + sgn * acc);
        } else {
          const int rows = a.dim(0), cols = a.dim(1);
          for (int j = 0; j < cols; ++j) {
            double acc = 0.0;
            for (int i = 0; i < rows; ++i) acc += g.at(i, j);
            db.at(j) = static_cast<float>(db.at(j) + sgn * acc);
          }
        }
        break;
      }
      case OpKind::kScale: {
        Tensor& da = accum(n.in[0]);
        for (int64_t i = 0; i < g.size(); ++i) da.at(i) += n.coeff * g.at(i);
        break;
      }
      case OpKind::kMatMul: {
        const Tensor& a = nodes_[n.in[0]].value;
        const Tensor& b = nodes_[n.in[1]].value;
        matmul_g_bt_accum(g, b, accum(n.in[0]));
        matmul_at_b_accum(a, g, accum(n.in[1]));
        break;
      }
      case OpKind::kRelu: {
        const Tensor& x = nodes_[n.in[0]].value;
        Tensor& da = accum(n.in[0]);
        for (int64_t i = 0; i < g.size(); ++i) {
          if (x.at(i) > 0.0f) da.at(i) += g.at(i);  // subgradient at 0 is 0
        }
        break;
      }
      case OpKind::kL2NormalizeRows: {
        const Tensor& x = nodes_[n.in[0]].value;
        const Tensor& y = n.value;
        const int rows = x.rank() == 2 ? x.dim(0) : 1;
        const int cols = x.rank() == 2 ? x.dim(1) : x.dim(0);
        Tensor& da = accum(n.in[0]);
        for (int i = 0; i < rows; ++i) {
          const float* xr = x.data() + static_cast<size_t>(i) * cols;
          const float* yr = y.data() + static_cast<size_t>(i) * cols;
          const float* gr = g.data() + static_cast<size_t>(i) * cols;
          float* dr = da.data() + static_cast<size_t>(i) * cols;
          double sq = 0.0;
          for (int j = 0; j < cols; ++j) sq += static_cast<double>(xr[j]) * xr[j];
          if (sq == 0.0) continue;  // zero row propagates zero gradient
          const double r = std::sqrt(sq);
          double ydotg = 0.0;
          for (int j = 0; j < cols; ++j) ydotg += static_cast<double>(yr[j]) * gr[j];
          for (int j = 0; j < cols; ++j)
            dr[j] = static_cast<float>(dr[j] + (gr[j] - yr[j] * ydotg) / r);
        }
        break;
      }
      case OpKind::kSoftmaxCrossEntropy: {
        const Tensor& logits = nodes_[n.in[0]].value;
        const Tensor& onehot = nodes_[n.in[1]].value;
        const int rows = logits.dim(0), cols = logits.dim(1);
        const double gs = g.at(0);
        Tensor& da = accum(n.in[0]);
        for (int i = 0; i < rows; ++i) {
          const float* z = logits.data() + static_cast<size_t>(i) * cols;
          double zmax = z[0];
          for (int j = 1; j < cols; ++j) zmax = std::max(zmax, static_cast<double>(z[j]));
          double sumexp = 0.0;
          for (int j = 0; j < cols; ++j) sumexp += std::exp(z[j] - zmax);
          double wsum = 0.0;
          for (int j = 0; j < cols; ++j) wsum += onehot.at(i, j);
          for (int j = 0; j < cols; ++j) {
            const double q = std::exp(z[j] - zmax) / sumexp;
            da.at(i, j) = static_cast<float>(da.at(i, j) + gs * (wsum * q - onehot.at(i, j)));
          }
        }
        accum(n.in[1]);  // one-hot labels are constants: zero gradient
        break;
      }
      case OpKind::kSquare: {
        const Tensor& x = nodes_[n.in[0]].value;
        Tensor& da = accum(n.in[0]);
        for (int64_t i = 0; i < g.size(); ++i) da.at(i) += 2.0f * x.at(i) * g.at(i);
        break;
      }
      case OpKind::kSum: {
        Tensor& da = accum(n.in[0]);
        const float gs = g.at(0);
        for (int64_t i = 0; i < da.size(); ++i) da.at(i) += gs;
        break;
      }
      case OpKind::kMean: {
        Tensor& da = accum(n.in[0]);
        const float gs = g.at(0) / static_cast<float>(da.size());
        for (int64_t i = 0; i < da.size(); ++i) da.at(i) += gs;
        break;
      }
      case OpKind::kQuadForm: {
        const Tensor& v = nodes_[n.in[0]].value;
        const Tensor& m = nodes_[n.in[1]].value;
        const int d = v.rank() == 1 ? v.dim(0) : v.dim(1);
        const double gs = g.at(0);
        Tensor& dv = accum(n.in[0]);
        for (int i = 0; i < d; ++i) {
          double acc = 0.0;
          for (int j = 0; j < d; ++j) acc += (static_cast<double>(m.at(i, j)) + m.at(j, i)) * v.at(j);
          dv.at(i) = static_cast<float>(dv.at(i) + gs * acc);
        }
        Tensor& dm = accum(n.in[1]);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j)
            dm.at(i, j) = static_cast<float>(dm.at(i, j) + gs * v.at(i) * v.at(j));
        break;
      }
      case OpKind::kRow: {
        Tensor& da = accum(n.in[0]);
        const int cols = da.dim(1);
        for (int j = 0; j < cols; ++j) da.at(n.index, j) += g.at(j);
        break;
      }
    }
  }

  std::unordered_map<NodeId, Tensor> result;
  for (NodeId id : wrt) {
    if (has_grad[static_cast<size_t>(id)]) {
      result.emplace(id, std::move(grads[static_cast<size_t>(id)]));
    } else {
      result.emplace(id, Tensor(nodes_[static_cast<size_t>(id)].value.shape()));
    }
  }
  return result;
}

double fd_check(Graph& graph, const Bindings& bindings, NodeId wrt, double h) {
  if (h <= 0.0) throw Error("fd_check requires h > 0");
  graph.forward(bindings);
  const NodeId out = graph.output();
  Tensor analytic = graph.grad(out, {wrt}).at(wrt);

  Bindings perturbed = bindings;
  Tensor& x = perturbed.at(wrt);
  double max_err = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) {
    const float orig = x.at(i);
    x.at(i) = static_cast<float>(orig + h);
    const double fp = graph.forward(perturbed).at(0);
    x.at(i) = static_cast<float>(orig - h);
    const double fm = graph.forward(perturbed).at(0);
    x.at(i) = orig;
    const double fd = (fp - fm) / (2.0 * h);
    const double a = analytic.at(i);
    const double err = std::abs(a - fd) / std::max(1.0, std::abs(a));
    max_err = std::max(max_err, err);
  }
  graph.forward(bindings);  // restore cached values
  return max_err;
}

}  // namespace matk
