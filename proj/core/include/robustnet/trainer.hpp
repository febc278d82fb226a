#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "robustnet/attacks.hpp"
#include "robustnet/data.hpp"
#include "robustnet/objectives.hpp"

namespace robustnet {

struct TrainConfig {
  RobustConfig objective;
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  std::vector<double> lr_grid;   // grid search candidates; empty means none
  std::vector<double> rho_grid;
  void validate() const;
};

struct TrainHistory {
  std::vector<double> objective_values;  // minibatch objective before each step
  NetworkParams final_params;
  double samples_per_second = 0.0;
};

/// Thrown when the training objective becomes non-finite.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// rho * sqrt(m): keeps L1 budgets comparable across input dimensions (an
/// L1 ball of fixed radius vanishes relative to the L2/Linf balls as m
/// grows).
double scale_rho_l1(double rho, std::size_t m);

/// Plain SGD over the train split. Minibatches come from a seeded epoch
/// shuffle; when an epoch runs out mid-batch the batch continues from the
/// next reshuffled epoch, so every batch has exactly batch_size samples.
TrainHistory train(const NetworkParams& init, const Dataset& ds, const TrainConfig& cfg);

struct GridCandidate {
  double learning_rate = 0.0;
  double rho = 0.0;
  bool diverged = false;
  double val_adversarial = 0.0;
  double val_clean = 0.0;
};

struct GridResult {
  TrainConfig best_config;
  TrainHistory best;
  std::vector<GridCandidate> candidates;
};

/// Trains one model per (lr, rho) pair from the same initial params and
/// picks the one with the best validation adversarial accuracy under
/// val_attack. Ties prefer higher clean validation accuracy, then lower lr,
/// then lower rho. Diverged candidates are skipped; all diverging is fatal.
GridResult grid_select(const NetworkParams& init, const Dataset& ds, const TrainConfig& base,
                       const AttackConfig& val_attack);

}  // namespace robustnet
