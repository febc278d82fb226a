#include <doctest.h>

#include <cmath>
#include <numeric>

#include "robustnet/trainer.hpp"
#include "support.hpp"

using namespace robustnet;

namespace {

Dataset moons_split(std::size_t n, std::uint64_t seed) {
  Dataset ds = testsupport::make_moons(n, 0.08, seed);
  split(ds, seed);
  return ds;
}

TrainConfig base_config(Objective obj, double rho) {
  TrainConfig cfg;
  cfg.objective = RobustConfig{obj, obj == Objective::rub ? Norm::l1 : Norm::linf, rho};
  cfg.learning_rate = 0.2;
  cfg.batch_size = 16;
  cfg.iterations = 250;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("rho scaling follows the square root of the dimension") {
  CHECK(scale_rho_l1(2.0, 9) == doctest::Approx(6.0));
  CHECK(scale_rho_l1(0.0, 100) == 0.0);
  CHECK_THROWS(scale_rho_l1(1.0, 0));
}

TEST_CASE("config validation") {
  TrainConfig cfg = base_config(Objective::nominal, 0.0);
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 0;
  CHECK_THROWS(cfg.validate());
  cfg = base_config(Objective::nominal, 0.0);
  cfg.iterations = 0;
  CHECK_THROWS(cfg.validate());
  cfg = base_config(Objective::rub, 0.1);
  cfg.objective.p = Norm::l2;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("training reduces the objective and fills the history") {
  Dataset ds = moons_split(120, 21);
  NetworkParams init = testsupport::random_net({2, 16, 2}, 22);
  TrainConfig cfg = base_config(Objective::nominal, 0.0);
  TrainHistory hist = train(init, ds, cfg);

  REQUIRE(hist.objective_values.size() == cfg.iterations);
  CHECK(hist.samples_per_second > 0.0);
  double head = std::accumulate(hist.objective_values.begin(),
                                hist.objective_values.begin() + 50, 0.0) / 50.0;
  double tail = std::accumulate(hist.objective_values.end() - 50,
                                hist.objective_values.end(), 0.0) / 50.0;
  CHECK(tail < head * 0.8);
  CHECK(clean_accuracy(hist.final_params, ds.batch(ds.train)) > 0.8);
}

TEST_CASE("training is deterministic in the seed") {
  Dataset ds = moons_split(60, 31);
  NetworkParams init = testsupport::random_net({2, 8, 2}, 32);
  TrainConfig cfg = base_config(Objective::arub, 0.05);
  cfg.iterations = 40;
  TrainHistory a = train(init, ds, cfg);
  TrainHistory b = train(init, ds, cfg);
  for (std::size_t l = 0; l < a.final_params.depth(); ++l)
    for (std::size_t i = 0; i < a.final_params.layer(l).W.size(); ++i)
      CHECK(a.final_params.layer(l).W[i] == b.final_params.layer(l).W[i]);
  CHECK(a.objective_values == b.objective_values);

  cfg.seed = 33;
  TrainHistory c = train(init, ds, cfg);
  CHECK(a.objective_values != c.objective_values);
}

TEST_CASE("oversized batches wrap into the next epoch") {
  Dataset ds = moons_split(10, 41);  // train split has 6 samples
  REQUIRE(ds.train.size() < 16);
  NetworkParams init = testsupport::random_net({2, 4, 2}, 42);
  TrainConfig cfg = base_config(Objective::nominal, 0.0);
  cfg.batch_size = 16;
  cfg.iterations = 10;
  CHECK_NOTHROW(train(init, ds, cfg));
}

TEST_CASE("non-finite objectives raise a divergence error") {
  Dataset ds = moons_split(40, 51);
  NetworkParams init = testsupport::random_net({2, 6, 2}, 52);
  TrainConfig cfg = base_config(Objective::nominal, 0.0);
  cfg.learning_rate = 1e100;
  cfg.iterations = 50;
  CHECK_THROWS_AS(train(init, ds, cfg), DivergenceError);
}

TEST_CASE("grid selection maximizes validation adversarial accuracy") {
  Dataset ds = moons_split(150, 61);
  NetworkParams init = testsupport::random_net({2, 12, 2}, 62);
  TrainConfig base = base_config(Objective::rub, 0.05);
  base.iterations = 150;
  base.lr_grid = {0.3, 0.1};
  base.rho_grid = {0.02, 0.1};

  AttackConfig val;
  val.kind = AttackKind::pgd;
  val.p = Norm::l1;
  val.rho = 0.1;
  val.steps = 20;
  val.restarts = 1;
  val.seed = 5;

  GridResult res = grid_select(init, ds, base, val);
  REQUIRE(res.candidates.size() == 4);

  const GridCandidate* best = nullptr;
  for (const GridCandidate& c : res.candidates) {
    CHECK(!c.diverged);
    if (!best || c.val_adversarial > best->val_adversarial ||
        (c.val_adversarial == best->val_adversarial && c.val_clean > best->val_clean))
      best = &c;
  }
  CHECK(res.best_config.learning_rate == best->learning_rate);
  CHECK(res.best_config.objective.rho == best->rho);
  // The winning model is re-usable as-is.
  CHECK(clean_accuracy(res.best.final_params, ds.batch(ds.val)) == best->val_clean);
}

TEST_CASE("grid selection skips diverged candidates") {
  Dataset ds = moons_split(60, 71);
  NetworkParams init = testsupport::random_net({2, 6, 2}, 72);
  TrainConfig base = base_config(Objective::nominal, 0.0);
  base.iterations = 60;
  base.lr_grid = {1e100, 0.2};

  AttackConfig val;
  val.kind = AttackKind::pgd;
  val.p = Norm::linf;
  val.rho = 0.05;
  val.steps = 10;
  val.restarts = 1;

  GridResult res = grid_select(init, ds, base, val);
  REQUIRE(res.candidates.size() == 2);
  CHECK(res.candidates[0].diverged);
  CHECK(res.best_config.learning_rate == 0.2);

  base.lr_grid = {1e100};
  CHECK_THROWS(grid_select(init, ds, base, val));
}
