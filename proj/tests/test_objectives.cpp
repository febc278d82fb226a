#include <doctest.h>

#include <cmath>

#include "robustnet/objectives.hpp"
#include "robustnet/robust_bound.hpp"
#include "support.hpp"

using namespace robustnet;
using testsupport::random_net;
using testsupport::random_vector;

namespace {

// Hidden preactivations (and for rub the branch gap) bounded away from their
// kinks, so finite differences see a smooth function.
bool generic_point(const NetworkParams& net, const Tensor& x, double margin = 1e-3) {
  ForwardTrace trace = forward(net, x);
  for (std::size_t l = 0; l + 1 < net.depth(); ++l)
    for (double z : trace.preacts[l].values())
      if (std::abs(z) < margin) return false;
  return true;
}

Batch two_sample_batch(Rng& rng, std::size_t m, std::size_t classes) {
  std::vector<double> xs(2 * m);
  for (double& v : xs) v = rng.uniform(-1.0, 1.0);
  Batch b;
  b.X = Tensor::matrix(2, m, std::move(xs));
  b.y = {0, classes - 1};
  return b;
}

}  // namespace

TEST_CASE("cross entropy equals logsumexp minus the true logit") {
  Tensor z = Tensor::vector({1.0, 2.0, 0.5});
  double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5));
  CHECK(cross_entropy(1, z) == doctest::Approx(lse - 2.0).epsilon(1e-14));
  CHECK(cross_entropy(2, z) == doctest::Approx(lse - 0.5).epsilon(1e-14));
}

TEST_CASE("config validation") {
  RobustConfig bad{Objective::rub, Norm::linf, 0.1};
  CHECK_THROWS(bad.validate());
  RobustConfig neg{Objective::arub, Norm::l2, -0.5};
  CHECK_THROWS(neg.validate());
  RobustConfig ok{Objective::rub, Norm::l1, 0.1};
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.q() == Norm::linf);
  CHECK(parse_objective("arub") == Objective::arub);
  CHECK_THROWS(parse_objective("robust"));
  CHECK(objective_name(Objective::baseline) == "baseline");
}

TEST_CASE("nominal objective is the mean cross entropy") {
  NetworkParams net = random_net({3, 5, 4}, 101);
  Rng rng(102);
  Batch b = two_sample_batch(rng, 3, 4);
  RobustConfig cfg{Objective::nominal, Norm::linf, 0.0};
  double expect = 0.0;
  for (std::size_t i = 0; i < 2; ++i)
    expect += cross_entropy(b.y[i], forward(net, b.row(i)).logits());
  CHECK(objective_value(net, b, cfg) == doctest::Approx(expect / 2.0).epsilon(1e-12));
}

TEST_CASE("robust objectives collapse to cross entropy at rho zero") {
  Rng rng(7);
  for (std::uint64_t s = 0; s < 6; ++s) {
    NetworkParams net = random_net({4, 6, 6, 3}, 200 + s);
    Tensor x = random_vector(rng, 4);
    std::size_t y = s % 3;
    double ce = cross_entropy(y, forward(net, x).logits());

    RobustConfig arub{Objective::arub, Norm::linf, 0.0};
    RobustConfig base{Objective::baseline, Norm::linf, 0.0};
    RobustConfig rub{Objective::rub, Norm::l1, 0.0};
    CHECK(sample_objective_value(net, x, y, arub) == doctest::Approx(ce).epsilon(1e-12));
    CHECK(sample_objective_value(net, x, y, base) == doctest::Approx(ce).epsilon(1e-12));
    CHECK(std::abs(sample_objective_value(net, x, y, rub) - ce) < 1e-10);
  }
}

TEST_CASE("arub margin for the true class is exactly zero") {
  NetworkParams net = random_net({3, 8, 4}, 301);
  Rng rng(302);
  Tensor x = random_vector(rng, 3);
  for (std::size_t y = 0; y < 4; ++y)
    CHECK(arub_class_margin(net, x, y, y, 0.7, Norm::l1) == 0.0);
}

TEST_CASE("arub never drops below the clean cross entropy") {
  Rng rng(17);
  for (std::uint64_t s = 0; s < 10; ++s) {
    NetworkParams net = random_net({4, 7, 3}, 400 + s);
    Tensor x = random_vector(rng, 4);
    std::size_t y = s % 3;
    double ce = cross_entropy(y, forward(net, x).logits());
    for (Norm p : {Norm::l1, Norm::l2, Norm::linf}) {
      RobustConfig cfg{Objective::arub, p, 0.25};
      CHECK(sample_objective_value(net, x, y, cfg) >= ce - 1e-12);
    }
  }
}

TEST_CASE("baseline adds the scaled input-gradient norm to the cross entropy") {
  NetworkParams net = random_net({3, 6, 3}, 501);
  Rng rng(502);
  Tensor x = random_vector(rng, 3);
  std::size_t y = 1;
  double rho = 0.4;

  Tensor z = forward(net, x).logits();
  Tensor J = input_jacobian(net, x);
  Tensor s = softmax(z);
  std::vector<double> g(3, 0.0);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t k = 0; k < 3; ++k)
      g[j] += J.at(k, j) * (s[k] - (k == y ? 1.0 : 0.0));
  double expect = cross_entropy(y, z) + rho * lp_norm(Tensor::vector(g), Norm::l1);

  CHECK(baseline_sample_loss(net, x, y, rho, Norm::l1) == doctest::Approx(expect).epsilon(1e-12));
  RobustConfig cfg{Objective::baseline, Norm::linf, rho};
  CHECK(sample_objective_value(net, x, y, cfg) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("objective gradients match finite differences") {
  std::vector<RobustConfig> cfgs = {
      {Objective::nominal, Norm::linf, 0.0},
      {Objective::baseline, Norm::linf, 0.3},
      {Objective::arub, Norm::linf, 0.3},
      {Objective::arub, Norm::l2, 0.3},
      {Objective::rub, Norm::l1, 0.2},
  };
  std::size_t checked = 0;
  for (std::uint64_t s = 0; s < 40 && checked < 3; ++s) {
    NetworkParams net = random_net({3, 5, 4, 3}, 600 + s);
    Rng rng(700 + s);
    Batch b = two_sample_batch(rng, 3, 3);
    if (!generic_point(net, b.row(0)) || !generic_point(net, b.row(1))) continue;
    ++checked;
    for (const RobustConfig& cfg : cfgs) {
      ObjectiveEval eval = objective_gradient(net, b, cfg);
      CHECK(eval.value == doctest::Approx(objective_value(net, b, cfg)).epsilon(1e-12));
      testsupport::FdGrads fd = testsupport::fd_gradient(
          net, [&](const NetworkParams& p) { return objective_value(p, b, cfg); });
      CHECK(testsupport::max_rel_err(eval.gW, fd.gW) < 1e-4);
      CHECK(testsupport::max_rel_err(eval.gb, fd.gb) < 1e-4);
    }
  }
  CHECK(checked == 3);
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
  NetworkParams net = random_net({3, 6, 3}, 801);
  Rng rng(802);
  Batch b = two_sample_batch(rng, 3, 3);
  RobustConfig cfg{Objective::arub, Norm::linf, 0.2};

  ObjectiveEval whole = objective_gradient(net, b, cfg);
  Batch b0{Tensor::matrix(1, 3, {b.X[0], b.X[1], b.X[2]}), {b.y[0]}};
  Batch b1{Tensor::matrix(1, 3, {b.X[3], b.X[4], b.X[5]}), {b.y[1]}};
  ObjectiveEval e0 = objective_gradient(net, b0, cfg);
  ObjectiveEval e1 = objective_gradient(net, b1, cfg);
  for (std::size_t l = 0; l < net.depth(); ++l)
    for (std::size_t i = 0; i < whole.gW[l].size(); ++i)
      CHECK(whole.gW[l][i] ==
            doctest::Approx(0.5 * (e0.gW[l][i] + e1.gW[l][i])).epsilon(1e-12));
}
