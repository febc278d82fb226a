#include <benchmark/benchmark.h>

#include "robustnet/attacks.hpp"
#include "robustnet/objectives.hpp"
#include "robustnet/robust_bound.hpp"

using namespace robustnet;

namespace {

NetworkParams bench_net(std::size_t inputs, std::size_t hidden, std::size_t layers,
                        std::size_t classes) {
  std::vector<std::size_t> widths{inputs};
  widths.insert(widths.end(), layers, hidden);
  widths.push_back(classes);
  Rng rng(42);
  return NetworkParams::random(widths, rng);
}

Batch bench_batch(std::size_t n, std::size_t dim, std::size_t classes) {
  Rng rng(7);
  std::vector<double> xs(n * dim);
  for (double& v : xs) v = rng.uniform(-1.0, 1.0);
  std::vector<std::size_t> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = rng.uniform_index(classes);
  return Batch{Tensor::matrix(n, dim, std::move(xs)), std::move(ys)};
}

void BM_forward(benchmark::State& state) {
  NetworkParams net = bench_net(16, static_cast<std::size_t>(state.range(0)), 2, 4);
  Batch b = bench_batch(1, 16, 4);
  Tensor x = b.row(0);
  for (auto _ : state) benchmark::DoNotOptimize(forward(net, x).logits()[0]);
}
BENCHMARK(BM_forward)->Arg(32)->Arg(128);

void BM_objective_gradient(benchmark::State& state) {
  NetworkParams net = bench_net(16, 32, 2, 4);
  Batch b = bench_batch(16, 16, 4);
  const RobustConfig cfgs[4] = {
      {Objective::nominal, Norm::linf, 0.0},
      {Objective::baseline, Norm::linf, 0.1},
      {Objective::arub, Norm::linf, 0.1},
      {Objective::rub, Norm::l1, 0.1},
  };
  const RobustConfig& cfg = cfgs[state.range(0)];
  for (auto _ : state) {
    ObjectiveEval eval = objective_gradient(net, b, cfg);
    benchmark::DoNotOptimize(eval.value);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 16);
}
BENCHMARK(BM_objective_gradient)
    ->Arg(0)
    ->Arg(1)
    ->Arg(2)
    ->Arg(3)
    ->ArgNames({"objective"});

void BM_certify_sample(benchmark::State& state) {
  NetworkParams net = bench_net(16, static_cast<std::size_t>(state.range(0)), 2, 4);
  Batch b = bench_batch(1, 16, 4);
  Tensor x = b.row(0);
  for (auto _ : state) {
    CertResult r = certify_sample(net, x, b.y[0], 0.1, 0);
    benchmark::DoNotOptimize(r.worst_bound);
  }
}
BENCHMARK(BM_certify_sample)->Arg(32)->Arg(128);

void BM_project_l1(benchmark::State& state) {
  Rng rng(11);
  std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<Tensor> vs;
  for (int i = 0; i < 64; ++i) {
    std::vector<double> v(n);
    for (double& e : v) e = rng.uniform(-2.0, 2.0);
    vs.push_back(Tensor::vector(std::move(v)));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    Tensor p = project_lp_ball(vs[i++ % vs.size()], Norm::l1, 1.0);
    benchmark::DoNotOptimize(p[0]);
  }
}
BENCHMARK(BM_project_l1)->Arg(64)->Arg(1024);

void BM_pgd_attack(benchmark::State& state) {
  NetworkParams net = bench_net(16, 32, 2, 4);
  Batch b = bench_batch(1, 16, 4);
  Tensor x = b.row(0);
  AttackConfig cfg;
  cfg.kind = AttackKind::pgd;
  cfg.p = Norm::l1;
  cfg.rho = 0.1;
  cfg.steps = 20;
  cfg.restarts = 1;
  cfg.seed = 3;
  for (auto _ : state) {
    Tensor d = attack_delta(net, x, b.y[0], cfg);
    benchmark::DoNotOptimize(d[0]);
  }
}
BENCHMARK(BM_pgd_attack);

}  // namespace

BENCHMARK_MAIN();
