#pragma once

#include <cstdint>
#include <string>

#include "robustnet/network.hpp"
#include "robustnet/rng.hpp"
#include "robustnet/tensor.hpp"

namespace robustnet {

enum class AttackKind { fgsm, fgm, pgd };
AttackKind parse_attack(const std::string& s);
std::string attack_name(AttackKind k);

struct AttackConfig {
  AttackKind kind = AttackKind::pgd;
  Norm p = Norm::linf;
  double rho = 0.0;
  std::size_t steps = 40;
  double step_size = 0.0;  // 0 selects the default 2.5 rho / steps
  std::size_t restarts = 2;  // restart 0 always starts at delta = 0
  std::uint64_t seed = 0;
  void validate() const;  // fgsm requires p = inf
  double effective_step() const;
};

/// Euclidean projection onto the Lp ball of radius rho: clip for p = inf,
/// radial rescale for p = 2, sort-and-threshold for p = 1. Feasible inputs
/// are returned unchanged.
Tensor project_lp_ball(const Tensor& v, Norm p, double rho);

/// Uniform draw from the Lp ball of radius rho.
Tensor sample_lp_ball(Rng& rng, std::size_t dim, Norm p, double rho);

/// Gradient of the cross-entropy loss with respect to the input:
/// J^T (softmax(z) - e_y) with the activation pattern frozen at x.
Tensor loss_input_gradient(const NetworkParams& params, const Tensor& x, std::size_t y);

/// delta = rho sign(grad), with sign(0) = 0. The L-inf special case of fgm.
Tensor fgsm(const NetworkParams& params, const Tensor& x, std::size_t y, double rho);

/// One-shot maximizer of the linearized loss over the Lp ball: the dual-norm
/// direction scaled to radius rho (zero gradient gives delta = 0).
Tensor fgm(const NetworkParams& params, const Tensor& x, std::size_t y, Norm p, double rho);

/// Projected gradient ascent on the loss with restarts; returns the
/// best-loss iterate over all restarts, steps and the clean point, so the
/// returned loss never drops below the clean loss.
Tensor pgd(const NetworkParams& params, const Tensor& x, std::size_t y,
           const AttackConfig& cfg);

/// Dispatch on cfg.kind.
Tensor attack_delta(const NetworkParams& params, const Tensor& x, std::size_t y,
                    const AttackConfig& cfg);

/// Fraction of samples still classified correctly after the attack. Random
/// streams are forked per sample, so the result is independent of evaluation
/// order.
double adversarial_accuracy(const NetworkParams& params, const Batch& batch,
                            const AttackConfig& cfg);

double clean_accuracy(const NetworkParams& params, const Batch& batch);

}  // namespace robustnet
