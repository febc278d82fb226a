#include "robustnet/trainer.hpp"

#include <chrono>
#include <cmath>

#include "robustnet/rng.hpp"

namespace robustnet {

void TrainConfig::validate() const {
  objective.validate();
  if (learning_rate < 0.0) throw std::invalid_argument("TrainConfig: negative learning rate");
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (iterations == 0) throw std::invalid_argument("TrainConfig: iterations must be >= 1");
}

double scale_rho_l1(double rho, std::size_t m) {
  if (m == 0) throw std::invalid_argument("scale_rho_l1: m must be >= 1");
  return rho * std::sqrt(static_cast<double>(m));
}

namespace {

class BatchStream {
 public:
  BatchStream(std::vector<std::size_t> indices, std::uint64_t seed)
      : perm_(std::move(indices)), rng_(seed) {
    reshuffle();
  }

  std::vector<std::size_t> next(std::size_t batch_size) {
    std::vector<std::size_t> out;
    out.reserve(batch_size);
    while (out.size() < batch_size) {
      if (cursor_ == perm_.size()) reshuffle();
      out.push_back(perm_[cursor_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    for (std::size_t i = perm_.size() - 1; i > 0; --i)
      std::swap(perm_[i], perm_[rng_.uniform_index(i + 1)]);
    cursor_ = 0;
  }

  std::vector<std::size_t> perm_;
  Rng rng_;
  std::size_t cursor_ = 0;
};

}  // namespace

TrainHistory train(const NetworkParams& init, const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.train.empty()) throw std::invalid_argument("train: dataset has no train split");
  if (ds.feature_dim() != init.input_dim() || ds.class_count() > init.class_count())
    throw std::invalid_argument("train: dataset does not match network dimensions");

  NetworkParams params = init;
  TrainHistory hist;
  hist.objective_values.reserve(cfg.iterations);
  BatchStream stream(ds.train, cfg.seed);
  auto start = std::chrono::steady_clock::now();
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    Batch batch = ds.batch(stream.next(cfg.batch_size));
    ObjectiveEval eval = objective_gradient(params, batch, cfg.objective);
    if (!std::isfinite(eval.value))
      throw DivergenceError("train: objective became non-finite at iteration " +
                            std::to_string(it));
    hist.objective_values.push_back(eval.value);
    for (std::size_t l = 0; l < params.depth(); ++l) {
      Layer& layer = params.layer(l);
      for (std::size_t i = 0; i < layer.W.size(); ++i)
        layer.W[i] -= cfg.learning_rate * eval.gW[l][i];
      for (std::size_t i = 0; i < layer.b.size(); ++i)
        layer.b[i] -= cfg.learning_rate * eval.gb[l][i];
    }
  }
  auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
  double secs = elapsed.count();
  hist.samples_per_second =
      secs > 0.0 ? static_cast<double>(cfg.iterations * cfg.batch_size) / secs : 0.0;
  hist.final_params = std::move(params);
  return hist;
}

GridResult grid_select(const NetworkParams& init, const Dataset& ds, const TrainConfig& base,
                       const AttackConfig& val_attack) {
  std::vector<double> lrs = base.lr_grid.empty() ? std::vector<double>{base.learning_rate}
                                                 : base.lr_grid;
  std::vector<double> rhos = base.rho_grid.empty() ? std::vector<double>{base.objective.rho}
                                                   : base.rho_grid;
  if (ds.val.empty()) throw std::invalid_argument("grid_select: dataset has no validation split");
  Batch val = ds.batch(ds.val);

  GridResult result;
  bool have_best = false;
  double best_adv = 0.0, best_clean = 0.0;
  for (double lr : lrs) {
    for (double rho : rhos) {
      TrainConfig cfg = base;
      cfg.learning_rate = lr;
      cfg.objective.rho = rho;
      GridCandidate cand;
      cand.learning_rate = lr;
      cand.rho = rho;
      TrainHistory hist;
      try {
        hist = train(init, ds, cfg);
      } catch (const DivergenceError&) {
        cand.diverged = true;
        result.candidates.push_back(cand);
        continue;
      }
      cand.val_adversarial = adversarial_accuracy(hist.final_params, val, val_attack);
      cand.val_clean = clean_accuracy(hist.final_params, val);
      result.candidates.push_back(cand);
      bool better;
      if (!have_best) better = true;
      else if (cand.val_adversarial != best_adv) better = cand.val_adversarial > best_adv;
      else if (cand.val_clean != best_clean) better = cand.val_clean > best_clean;
      else if (lr != result.best_config.learning_rate)
        better = lr < result.best_config.learning_rate;
      else better = rho < result.best_config.objective.rho;
      if (better) {
        result.best_config = cfg;
        result.best = std::move(hist);
        best_adv = cand.val_adversarial;
        best_clean = cand.val_clean;
        have_best = true;
      }
    }
  }
  if (!have_best) throw DivergenceError("grid_select: every candidate diverged");
  return result;
}

}  // namespace robustnet
