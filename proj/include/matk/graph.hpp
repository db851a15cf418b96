#ifndef MATK_GRAPH_HPP_
#define MATK_GRAPH_HPP_

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "matk/tensor.hpp"

namespace matk {

using NodeId = int;
using Bindings = std::unordered_map<NodeId, Tensor>;

enum class OpKind {
  kInput,
  kAdd,
  kSub,
  kScale,
  kMatMul,
  kRelu,
  kL2NormalizeRows,
  kSoftmaxCrossEntropy,
  kSquare,
  kSum,
  kMean,
  kQuadForm,
  kRow,
};

const char* op_name(OpKind kind);

// Computation graph for reverse-mode differentiation. The structure (nodes,
// edges) is append-only and fixed once built; forward() fills a value cache
// that backward passes consume. Node inputs always precede the node, so
// construction order is a topological order.
//
// Shape rules:
//   add/sub       same shape, or second operand [D] broadcast over [N,D] rows,
//                 or second operand [1] broadcast over all elements
//   matmul        [M,K] x [K,N] -> [M,N]
//   relu/square   elementwise, any shape
//   l2_normalize_rows   [D] or [N,D]; zero rows stay zero with zero gradient
//   softmax_cross_entropy   logits [N,C], one-hot [N,C] -> [1]; the one-hot
//                 operand is treated as a constant (zero gradient)
//   sum/mean      any shape -> [1]
//   quad_form     v [D] or [1,D], M [D,D] -> [1], value v^T M v
//   row           [N,D], index i -> [D]
class Graph {
 public:
  // Declares a root (input or parameter). Roots are bound at forward time.
  NodeId input(std::string name);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId scale(NodeId a, float c);
  NodeId matmul(NodeId a, NodeId b);
  NodeId relu(NodeId a);
  NodeId l2_normalize_rows(NodeId a);
  NodeId softmax_cross_entropy(NodeId logits, NodeId one_hot);
  NodeId square(NodeId a);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId quad_form(NodeId v, NodeId m);
  NodeId row(NodeId m, int index);

  // Computes every node value; returns the value of the last node added.
  // Throws on unbound roots (naming the root) and shape mismatches (naming
  // the op and offending shapes).
  const Tensor& forward(const Bindings& bindings);

  // Reverse-mode gradients of a scalar node with respect to the given roots.
  // Requires a prior forward(); the output node must have shape [1].
  std::unordered_map<NodeId, Tensor> grad(NodeId scalar_output,
                                          const std::vector<NodeId>& wrt);

  const Tensor& value(NodeId id) const;
  NodeId output() const;  // last node added
  int node_count() const { return static_cast<int>(nodes_.size()); }
  const std::vector<NodeId>& roots() const { return roots_; }
  bool is_root(NodeId id) const;
  const std::string& root_name(NodeId id) const;

 private:
  struct Node {
    OpKind kind;
    std::array<NodeId, 2> in{-1, -1};
    int n_in = 0;
    float coeff = 0.0f;  // kScale
    int index = 0;       // kRow
    std::string name;    // kInput
    Tensor value;
    bool has_value = false;
  };

  NodeId push(Node node);
  NodeId check_id(NodeId id) const;
  void eval_node(NodeId id);

  std::vector<Node> nodes_;
  std::vector<NodeId> roots_;
  bool forward_done_ = false;
};

// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
// for the graph's scalar output with respect to one root. Test oracle.
double fd_check(Graph& graph, const Bindings& bindings, NodeId wrt, double h);

}  // namespace matk

#endif  // MATK_GRAPH_HPP_
