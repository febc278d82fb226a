#pragma once

#include <cstdint>
#include <vector>

#include "robustnet/tensor.hpp"

namespace robustnet {

/// Operations recorded on the tape. Forward values are computed eagerly at
/// node creation, so graph builders can read intermediate values (activation
/// signs, branch choices) while the graph is still being assembled.
enum class OpKind {
  leaf,               // differentiable input (weights, biases, attack point)
  constant,           // fixed tensor, excluded from backward
  add,                // elementwise, same shape
  sub,                // elementwise, same shape
  hadamard,           // elementwise product, same shape
  scale,              // multiply by a fixed double
  relu,               // elementwise max(0, .)
  matmul,             // (r x c) * (c x k) -> (r x k), or (r x c) * (c) -> (r)
  transpose,          // matrix transpose
  scale_rows,         // row i of a matrix times entry i of a fixed vector
  add_col_broadcast,  // matrix (r x c) plus vector (r), added to every column
  concat_cols,        // [A | B] for matrices with equal row counts
  select,             // vector entry at a fixed index -> scalar
  select_row,         // matrix row at a fixed index -> vector
  pack,               // k scalars -> vector of length k
  sum_reduce,         // sum of all entries -> scalar
  max_reduce,         // vector max -> scalar; gradient goes to the first argmax
  logsumexp,          // vector -> scalar
  lq_norm,            // vector -> scalar Lq norm; subgradient 0 at the origin
  softmax,            // vector -> vector
  dot,                // two vectors -> scalar
};

using NodeId = std::int32_t;

struct TapeNode {
  OpKind kind;
  std::vector<NodeId> inputs;
  double dpayload = 0.0;       // scale factor
  std::size_t ipayload = 0;    // select / select_row index
  Norm npayload = Norm::l2;    // lq_norm order
  Tensor tpayload;             // scale_rows vector
  Tensor value;
  Tensor grad;                 // empty until backward reaches the node
  bool needs_grad = false;
};

/// Append-only reverse-mode tape. Node inputs always have smaller ids than
/// the node itself, so reverse id order is a topological order and backward
/// is a single linear sweep.
class Tape {
 public:
  NodeId leaf(Tensor v);
  NodeId constant(Tensor v);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  NodeId relu(NodeId a);
  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  NodeId scale_rows(NodeId m, Tensor row_weights);
  NodeId add_col_broadcast(NodeId m, NodeId v);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId select(NodeId v, std::size_t i);
  NodeId select_row(NodeId m, std::size_t i);
  NodeId pack(const std::vector<NodeId>& scalars);
  NodeId sum_reduce(NodeId a);
  NodeId max_reduce(NodeId v);
  NodeId logsumexp(NodeId v);
  NodeId lq_norm(NodeId v, Norm q);
  NodeId softmax(NodeId v);
  NodeId dot(NodeId a, NodeId b);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }

  /// Gradient of the last backward() root with respect to node `id`.
  /// Zero tensor if the node never received a contribution.
  Tensor grad(NodeId id) const;

  /// Accumulates d(root)/d(node) into every node reachable from `root`.
  /// The root must hold a scalar. Clears gradients from previous calls.
  void backward(NodeId root);

  std::size_t size() const { return nodes_.size(); }

 private:
  NodeId push(TapeNode node);
  const Tensor& val(NodeId id) const { return nodes_[id].value; }

  std::vector<TapeNode> nodes_;
};

}  // namespace robustnet
