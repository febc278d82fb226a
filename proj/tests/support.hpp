#pragma once

// Shared test fixtures and independent oracles. Everything here is written
// against the math directly (per-branch scalar loops, closed forms), not
// against the library's batched implementations, so agreement is evidence.

#include <cmath>
#include <functional>
#include <vector>

#include "robustnet/data.hpp"
#include "robustnet/network.hpp"
#include "robustnet/objectives.hpp"
#include "robustnet/rng.hpp"
#include "robustnet/robust_bound.hpp"

namespace testsupport {

using namespace robustnet;

inline NetworkParams random_net(const std::vector<std::size_t>& widths, std::uint64_t seed) {
  Rng rng(seed);
  return NetworkParams::random(widths, rng);
}

inline Tensor random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::vector(std::move(v));
}

/// Random architecture within the soundness-suite envelope.
inline std::vector<std::size_t> random_widths(Rng& rng, std::size_t depth,
                                              std::size_t max_input, std::size_t max_width) {
  std::vector<std::size_t> w;
  w.push_back(1 + rng.uniform_index(max_input));
  for (std::size_t l = 0; l + 1 < depth; ++l) w.push_back(2 + rng.uniform_index(max_width - 1));
  w.push_back(2 + rng.uniform_index(3));  // 2..4 classes
  return w;
}

/// Two interleaved half-circle arcs with additive gaussian noise, class 0 on
/// the upper arc. Split/preprocess are left to the caller.
inline Dataset make_moons(std::size_t n, double noise, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> feats;
  std::vector<std::size_t> labels;
  feats.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t cls = i % 2;
    double t = rng.uniform(0.0, M_PI);
    double x = cls == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double y = cls == 0 ? std::sin(t) : 0.5 - std::sin(t);
    feats.push_back(x + noise * rng.normal());
    feats.push_back(y + noise * rng.normal());
    labels.push_back(cls);
  }
  Dataset ds;
  ds.features = Tensor::matrix(n, 2, std::move(feats));
  ds.labels = std::move(labels);
  ds.label_names = {"0", "1"};
  return ds;
}

/// Central finite differences of a scalar function of the parameters.
struct FdGrads {
  std::vector<Tensor> gW, gb;
};

inline FdGrads fd_gradient(const NetworkParams& params,
                           const std::function<double(const NetworkParams&)>& f,
                           double h = 1e-5) {
  FdGrads out;
  NetworkParams probe = params;
  for (std::size_t l = 0; l < params.depth(); ++l) {
    Tensor gW = Tensor::zeros(params.layer(l).W.shape());
    for (std::size_t i = 0; i < gW.size(); ++i) {
      double saved = probe.layer(l).W[i];
      probe.layer(l).W[i] = saved + h;
      double up = f(probe);
      probe.layer(l).W[i] = saved - h;
      double down = f(probe);
      probe.layer(l).W[i] = saved;
      gW[i] = (up - down) / (2.0 * h);
    }
    Tensor gb = Tensor::zeros(params.layer(l).b.shape());
    for (std::size_t i = 0; i < gb.size(); ++i) {
      double saved = probe.layer(l).b[i];
      probe.layer(l).b[i] = saved + h;
      double up = f(probe);
      probe.layer(l).b[i] = saved - h;
      double down = f(probe);
      probe.layer(l).b[i] = saved;
      gb[i] = (up - down) / (2.0 * h);
    }
    out.gW.push_back(std::move(gW));
    out.gb.push_back(std::move(gb));
  }
  return out;
}

/// Largest relative gradient error across all parameter entries.
inline double max_rel_err(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l)
    for (std::size_t i = 0; i < a[l].size(); ++i) {
      double denom = std::max({std::abs(a[l][i]), std::abs(b[l][i]), 1e-8});
      worst = std::max(worst, std::abs(a[l][i] - b[l][i]) / denom);
    }
  return worst;
}

/// Two-layer closed form: rho * ||(p-q)^T W^1||_inf + (p-q)^T (W^1 x + b^1)
/// + c_k^T b^2 with p = [(W^2)^T c]+ o s, q = [-(W^2)^T c]+ o t and
/// s = t = the clean activation pattern.
inline double two_layer_closed_form(const NetworkParams& params, const Tensor& x, std::size_t y,
                                  std::size_t k, double rho) {
  const Layer& l1 = params.layer(0);
  const Layer& l2 = params.layer(1);
  std::size_t r1 = l1.out_dim(), m = l1.in_dim();

  ForwardTrace trace = forward(params, x);
  const Tensor& z1 = trace.preacts[0];

  std::vector<double> p(r1), q(r1);
  for (std::size_t i = 0; i < r1; ++i) {
    double wc = l2.W.at(k, i) - l2.W.at(y, i);
    double mask = z1[i] > 0.0 ? 1.0 : 0.0;
    p[i] = std::max(wc, 0.0) * mask;
    q[i] = std::max(-wc, 0.0) * mask;
  }

  double affine = l2.b[k] - l2.b[y];
  for (std::size_t i = 0; i < r1; ++i) affine += (p[i] - q[i]) * z1[i];

  double row_max = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < r1; ++i) col += (p[i] - q[i]) * l1.W.at(i, j);
    row_max = std::max(row_max, std::abs(col));
  }
  return rho * row_max + affine;
}

/// One level of the branch recursion: holds g^l(a, +1) and g^l(a, -1).
struct GPair {
  std::vector<double> gp, gm;
};

/// Reference evaluation of the branch recursion, scalar loops only:
///   g^1(a, r) = r (a W^1 e_m + W^1 x + b^1)
///   g^l(a, r) = [r W^l]+ [g^{l-1}(a,1)]+ + [-r W^l]+ (g^{l-1}(a,-1) o t_l)
///               + r b^l
/// Returns g^1 .. g^{L-1}.
inline std::vector<GPair> g_stack_reference(const NetworkParams& params, const Tensor& x,
                                            const FixedT& t, std::size_t m, double a) {
  std::size_t depth = params.depth();
  const Layer& l1 = params.layer(0);
  std::size_t r1 = l1.out_dim();

  std::vector<GPair> stack;
  GPair g{std::vector<double>(r1), std::vector<double>(r1)};
  for (std::size_t i = 0; i < r1; ++i) {
    double base = l1.b[i] + a * l1.W.at(i, m);
    for (std::size_t j = 0; j < l1.in_dim(); ++j) base += l1.W.at(i, j) * x[j];
    g.gp[i] = base;
    g.gm[i] = -base;
  }
  stack.push_back(g);

  for (std::size_t l = 1; l + 1 < depth; ++l) {
    const Layer& layer = params.layer(l);
    const Tensor& tl = t.t[l - 1];
    std::size_t rows = layer.out_dim(), cols = layer.in_dim();
    GPair next{std::vector<double>(rows), std::vector<double>(rows)};
    for (std::size_t i = 0; i < rows; ++i) {
      double accp = layer.b[i], accm = -layer.b[i];
      for (std::size_t j = 0; j < cols; ++j) {
        double w = layer.W.at(i, j);
        double rp = std::max(stack.back().gp[j], 0.0);
        double st = stack.back().gm[j] * tl[j];
        accp += std::max(w, 0.0) * rp + std::max(-w, 0.0) * st;
        accm += std::max(-w, 0.0) * rp + std::max(w, 0.0) * st;
      }
      next.gp[i] = accp;
      next.gm[i] = accm;
    }
    stack.push_back(std::move(next));
  }
  return stack;
}

/// The final layer of the recursion contracted with c = e_k - e_y.
inline double g_branch_reference(const NetworkParams& params, const Tensor& x, const FixedT& t,
                                 std::size_t k, std::size_t y, std::size_t m, double a) {
  std::vector<GPair> stack = g_stack_reference(params, x, t, m, a);
  const Layer& last = params.layer(params.depth() - 1);
  const Tensor& tL = t.t.back();
  double val = last.b[k] - last.b[y];
  for (std::size_t j = 0; j < last.in_dim(); ++j) {
    double c = last.W.at(k, j) - last.W.at(y, j);
    val += std::max(c, 0.0) * std::max(stack.back().gp[j], 0.0) +
           std::max(-c, 0.0) * (stack.back().gm[j] * tL[j]);
  }
  return val;
}

/// FixedT with every entry drawn uniform [0, 1]; still a valid relaxation.
inline FixedT random_t(const NetworkParams& params, Rng& rng) {
  FixedT out;
  for (std::size_t l = 0; l + 1 < params.depth(); ++l) {
    std::size_t w = params.layer(l).out_dim();
    std::vector<double> v(w);
    for (double& e : v) e = rng.uniform();
    out.t.push_back(Tensor::vector(std::move(v)));
  }
  return out;
}

}  // namespace testsupport
