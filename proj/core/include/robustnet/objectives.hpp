#pragma once

#include <string>
#include <vector>

#include "robustnet/network.hpp"
#include "robustnet/tape.hpp"
#include "robustnet/tensor.hpp"

namespace robustnet {

enum class Objective { nominal, baseline, arub, rub };
Objective parse_objective(const std::string& s);
std::string objective_name(Objective o);

/// Which training objective to build and the uncertainty set it defends
/// against. rub requires p = 1 (the exact bound exists only for L1 balls).
struct RobustConfig {
  Objective objective = Objective::nominal;
  Norm p = Norm::linf;
  double rho = 0.0;
  Norm q() const { return dual_norm(p); }
  void validate() const;
};

/// log sum_k exp(z_k - z_y). Translation invariant in z; equals the
/// cross-entropy of softmax(z) against class y.
double cross_entropy(std::size_t y, const Tensor& z);

/// Network parameters lifted onto a tape as differentiable leaves, one node
/// per W and b. All objective graphs for one batch share these leaves so a
/// single backward() yields the full parameter gradient.
struct TapeNet {
  std::vector<NodeId> W;
  std::vector<NodeId> b;
};
TapeNet lift_params(Tape& tape, const NetworkParams& params);

/// Forward pass on the tape; returns the logit node. When preact_nodes is
/// given it receives z^1..z^L (needed to read activation masks).
NodeId forward_logits(Tape& tape, const TapeNet& net, const NetworkParams& params,
                      const Tensor& x, std::vector<NodeId>* preact_nodes = nullptr);

/// Input Jacobian as a tape node, masks frozen at their forward values:
/// d(logits)/dx = W^L diag(m_{L-1}) ... diag(m_1) W^1.
NodeId input_jacobian_node(Tape& tape, const TapeNet& net, const NetworkParams& params,
                           const std::vector<NodeId>& preact_nodes);

/// Per-sample objective graph; returns the scalar loss node. Dispatches on
/// cfg.objective (rub included). Gradients flow to the TapeNet leaves with
/// activation masks, fixed-t vectors and branch argmaxes frozen.
NodeId sample_objective_node(Tape& tape, const TapeNet& net, const NetworkParams& params,
                             const Tensor& x, std::size_t y, const RobustConfig& cfg);

/// Value-only per-sample objectives (no tape), shared by reporting and the
/// gradient path's cross-checks.
double arub_class_margin(const NetworkParams& params, const Tensor& x, std::size_t y,
                         std::size_t k, double rho, Norm q);
double baseline_sample_loss(const NetworkParams& params, const Tensor& x, std::size_t y,
                            double rho, Norm q);
double sample_objective_value(const NetworkParams& params, const Tensor& x, std::size_t y,
                              const RobustConfig& cfg);

/// Mean per-sample objective over the batch.
double objective_value(const NetworkParams& params, const Batch& batch, const RobustConfig& cfg);

struct ObjectiveEval {
  double value = 0.0;
  std::vector<Tensor> gW;
  std::vector<Tensor> gb;
};

/// Batch objective with its parameter gradient, via one tape per batch.
ObjectiveEval objective_gradient(const NetworkParams& params, const Batch& batch,
                                 const RobustConfig& cfg);

}  // namespace robustnet
