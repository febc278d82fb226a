#pragma once

#include <cstdint>
#include <vector>

#include "robustnet/objectives.hpp"

namespace robustnet {

/// One branch of the bound network: perturbation vertex x + a e_m with
/// a in {+rho, -rho}.
struct GBranchInput {
  std::size_t m = 0;
  double a = 0.0;
};

/// Branches are evaluated m-major with a = +rho before -rho, so index
/// 2m is (m, +rho) and 2m+1 is (m, -rho). Max ties resolve to the lowest
/// index, i.e. lowest m with the +rho branch first.
std::size_t branch_count(std::size_t input_dim);
GBranchInput branch_input(std::size_t index, double rho);

/// The relaxation vectors t_l for layers l = 2..L, each of the width of
/// layer l-1. Any entries in [0,1] keep the bound valid; the default rule
/// freezes them to the clean activation pattern.
struct FixedT {
  std::vector<Tensor> t;  // t[0] is t_2, ..., t[L-2] is t_L
};

FixedT fixed_t(const NetworkParams& params, const Tensor& x);

/// Verdict for one sample at one radius. certified means every wrong-class
/// bound is strictly negative, which proves the prediction cannot change
/// inside the L1 ball.
struct CertResult {
  std::size_t sample = 0;
  bool certified = false;
  double worst_bound = 0.0;
  double rho = 0.0;
};

/// g^L_{k,m}(theta, x, t, a): the bound network evaluated on one branch.
double g_branch(const NetworkParams& params, const Tensor& x, const FixedT& t,
                std::size_t k, std::size_t y, const GBranchInput& branch);

/// max over all 2M branches of g_branch; an upper bound on
/// sup_{\|delta\|_1 <= rho} (z_k - z_y)(x + delta) for any admissible t.
double rub_class_bound(const NetworkParams& params, const Tensor& x, std::size_t y,
                       std::size_t k, double rho, const FixedT& t);

/// Per-sample RUB loss value: logsumexp over k of the class bounds with
/// t = fixed_t(params, x).
double rub_sample_loss(const NetworkParams& params, const Tensor& x, std::size_t y, double rho);

/// Tape graph of the per-sample RUB loss; gradients flow through the relu'd
/// weight splits with t and the branch argmax frozen. Returns the loss node.
NodeId rub_sample_node(Tape& tape, const TapeNet& net, const NetworkParams& params,
                       const Tensor& x, std::size_t y, double rho);

CertResult certify_sample(const NetworkParams& params, const Tensor& x, std::size_t y,
                          double rho, std::size_t sample_id = 0);

double certified_accuracy(const NetworkParams& params, const Batch& batch, double rho);
std::vector<CertResult> certify_batch(const NetworkParams& params, const Batch& batch,
                                      double rho);

/// Empirical lower estimate of sup over the L1 ball of the class-k margin:
/// best of the 2M ball vertices, random interior samples and PGD ascent.
/// Never exceeds the true sup, so it can sandwich rub_class_bound.
double brute_force_sup(const NetworkParams& params, const Tensor& x, std::size_t y,
                       std::size_t k, double rho, std::size_t samples, std::uint64_t seed);

}  // namespace robustnet
