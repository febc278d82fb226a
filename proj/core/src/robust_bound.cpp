#include "robustnet/robust_bound.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "robustnet/attacks.hpp"
#include "robustnet/rng.hpp"

namespace robustnet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> mat(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}
Eigen::Map<const Eigen::VectorXd> vec(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.size())};
}

void check_fixed_t(const NetworkParams& params, const FixedT& t) {
  if (t.t.size() + 1 != params.depth())
    throw std::invalid_argument("rub: t has wrong layer count");
  for (std::size_t i = 0; i < t.t.size(); ++i)
    if (t.t[i].size() != params.layer(i).out_dim())
      throw std::invalid_argument("rub: t width mismatch at layer " + std::to_string(i + 2));
}

/// Propagates all 2M branch columns through layers 1..L-1. On return gp and
/// gm hold g^{L-1}(., +1) and g^{L-1}(., -1) column per branch. Only valid
/// for depth >= 2.
void propagate_branches(const NetworkParams& params, const Tensor& x, const FixedT& t,
                        double rho, RowMat& gp, RowMat& gm) {
  std::size_t m_dim = params.input_dim();
  const Layer& first = params.layer(0);
  Eigen::VectorXd base = mat(first.W) * vec(x) + vec(first.b);
  gp.resize(static_cast<Eigen::Index>(first.out_dim()),
            static_cast<Eigen::Index>(2 * m_dim));
  for (std::size_t m = 0; m < m_dim; ++m) {
    Eigen::VectorXd col = mat(first.W).col(static_cast<Eigen::Index>(m));
    gp.col(static_cast<Eigen::Index>(2 * m)) = base + rho * col;
    gp.col(static_cast<Eigen::Index>(2 * m + 1)) = base - rho * col;
  }
  gm = -gp;
  for (std::size_t l = 1; l + 1 < params.depth(); ++l) {
    const Layer& layer = params.layer(l);
    RowMat wp = mat(layer.W).cwiseMax(0.0);
    RowMat wn = (-mat(layer.W)).cwiseMax(0.0);
    RowMat rp = gp.cwiseMax(0.0);
    RowMat st = vec(t.t[l - 1]).asDiagonal() * gm;
    RowMat gpn = wp * rp + wn * st;
    RowMat gmn = wn * rp + wp * st;
    gpn.colwise() += Eigen::VectorXd(vec(layer.b));
    gmn.colwise() -= Eigen::VectorXd(vec(layer.b));
    gp = std::move(gpn);
    gm = std::move(gmn);
  }
}

/// Last-layer branch values for class pair (k, y): one entry per branch
/// column of gp/gm.
Eigen::VectorXd final_branch_values(const NetworkParams& params, const FixedT& t,
                                    std::size_t k, std::size_t y, const RowMat& gp,
                                    const RowMat& gm) {
  const Layer& last = params.layer(params.depth() - 1);
  Eigen::VectorXd u = mat(last.W).row(static_cast<Eigen::Index>(k)) -
                      mat(last.W).row(static_cast<Eigen::Index>(y));
  Eigen::VectorXd up = u.cwiseMax(0.0);
  Eigen::VectorXd un = (-u).cwiseMax(0.0);
  double bterm = last.b[k] - last.b[y];
  Eigen::VectorXd vals = gp.cwiseMax(0.0).transpose() * up +
                         (vec(t.t.back()).asDiagonal() * gm).transpose() * un;
  vals.array() += bterm;
  return vals;
}

std::size_t first_argmax(const Eigen::VectorXd& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
  return best;
}

}  // namespace

std::size_t branch_count(std::size_t input_dim) { return 2 * input_dim; }

GBranchInput branch_input(std::size_t index, double rho) {
  return {index / 2, index % 2 == 0 ? rho : -rho};
}

FixedT fixed_t(const NetworkParams& params, const Tensor& x) {
  return FixedT{activation_masks(forward(params, x))};
}

double g_branch(const NetworkParams& params, const Tensor& x, const FixedT& t,
                std::size_t k, std::size_t y, const GBranchInput& branch) {
  check_fixed_t(params, t);
  if (branch.m >= params.input_dim())
    throw std::invalid_argument("g_branch: branch coordinate out of range");
  if (k >= params.class_count() || y >= params.class_count())
    throw std::invalid_argument("g_branch: class out of range");
  const Layer& first = params.layer(0);
  Eigen::VectorXd gp = mat(first.W) * vec(x) + vec(first.b) +
                       branch.a * mat(first.W).col(static_cast<Eigen::Index>(branch.m));
  if (params.depth() == 1) return gp[static_cast<Eigen::Index>(k)] - gp[static_cast<Eigen::Index>(y)];
  Eigen::VectorXd gm = -gp;
  for (std::size_t l = 1; l + 1 < params.depth(); ++l) {
    const Layer& layer = params.layer(l);
    RowMat wp = mat(layer.W).cwiseMax(0.0);
    RowMat wn = (-mat(layer.W)).cwiseMax(0.0);
    Eigen::VectorXd rp = gp.cwiseMax(0.0);
    Eigen::VectorXd st = vec(t.t[l - 1]).cwiseProduct(gm);
    Eigen::VectorXd gpn = wp * rp + wn * st + vec(layer.b);
    Eigen::VectorXd gmn = wn * rp + wp * st - vec(layer.b);
    gp = std::move(gpn);
    gm = std::move(gmn);
  }
  const Layer& last = params.layer(params.depth() - 1);
  Eigen::VectorXd u = mat(last.W).row(static_cast<Eigen::Index>(k)) -
                      mat(last.W).row(static_cast<Eigen::Index>(y));
  Eigen::VectorXd up = u.cwiseMax(0.0);
  Eigen::VectorXd un = (-u).cwiseMax(0.0);
  return up.dot(gp.cwiseMax(0.0)) + un.dot(vec(t.t.back()).cwiseProduct(gm)) +
         (last.b[k] - last.b[y]);
}

double rub_class_bound(const NetworkParams& params, const Tensor& x, std::size_t y,
                       std::size_t k, double rho, const FixedT& t) {
  check_fixed_t(params, t);
  if (rho < 0.0) throw std::invalid_argument("rub_class_bound: rho must be nonnegative");
  if (params.depth() == 1) {
    const Layer& first = params.layer(0);
    Eigen::VectorXd z = mat(first.W) * vec(x) + vec(first.b);
    Eigen::VectorXd u = mat(first.W).row(static_cast<Eigen::Index>(k)) -
                        mat(first.W).row(static_cast<Eigen::Index>(y));
    double best = z[static_cast<Eigen::Index>(k)] - z[static_cast<Eigen::Index>(y)] +
                  rho * u.cwiseAbs().maxCoeff();
    return best;
  }
  RowMat gp, gm;
  propagate_branches(params, x, t, rho, gp, gm);
  Eigen::VectorXd vals = final_branch_values(params, t, k, y, gp, gm);
  return vals[static_cast<Eigen::Index>(first_argmax(vals))];
}

double rub_sample_loss(const NetworkParams& params, const Tensor& x, std::size_t y, double rho) {
  FixedT t = fixed_t(params, x);
  std::size_t kcount = params.class_count();
  Tensor bounds = Tensor::zeros({kcount});
  if (params.depth() == 1) {
    for (std::size_t k = 0; k < kcount; ++k) bounds[k] = rub_class_bound(params, x, y, k, rho, t);
    return logsumexp(bounds);
  }
  RowMat gp, gm;
  propagate_branches(params, x, t, rho, gp, gm);
  for (std::size_t k = 0; k < kcount; ++k) {
    Eigen::VectorXd vals = final_branch_values(params, t, k, y, gp, gm);
    bounds[k] = vals[static_cast<Eigen::Index>(first_argmax(vals))];
  }
  return logsumexp(bounds);
}

NodeId rub_sample_node(Tape& tape, const TapeNet& net, const NetworkParams& params,
                       const Tensor& x, std::size_t y, double rho) {
  if (rho < 0.0) throw std::invalid_argument("rub_sample_node: rho must be nonnegative");
  if (!x.is_vector() || x.size() != params.input_dim())
    throw std::invalid_argument("rub_sample_node: input length mismatch");
  std::size_t m_dim = params.input_dim();
  std::size_t depth = params.depth();
  std::size_t kcount = params.class_count();
  FixedT t = fixed_t(params, x);

  // Branch matrix: column 2m holds +rho e_m, column 2m+1 holds -rho e_m, so
  // W^1 E gives every a W^1 e_m column at once.
  Tensor e = Tensor::zeros({m_dim, branch_count(m_dim)});
  for (std::size_t m = 0; m < m_dim; ++m) {
    e.at(m, 2 * m) = rho;
    e.at(m, 2 * m + 1) = -rho;
  }

  NodeId xc = tape.constant(x);
  NodeId zl = tape.add(tape.matmul(net.W[0], xc), net.b[0]);

  if (depth == 1) {
    Tensor et = Tensor::zeros({branch_count(m_dim), m_dim});
    for (std::size_t m = 0; m < m_dim; ++m) {
      et.at(2 * m, m) = rho;
      et.at(2 * m + 1, m) = -rho;
    }
    NodeId ec = tape.constant(std::move(et));
    NodeId zy = tape.select(zl, y);
    std::vector<NodeId> bounds;
    bounds.reserve(kcount);
    for (std::size_t k = 0; k < kcount; ++k) {
      NodeId u = tape.sub(tape.select_row(net.W[0], k), tape.select_row(net.W[0], y));
      NodeId margin = tape.sub(tape.select(zl, k), zy);
      bounds.push_back(tape.add(margin, tape.max_reduce(tape.matmul(ec, u))));
    }
    return tape.logsumexp(tape.pack(bounds));
  }

  NodeId gp = tape.add_col_broadcast(tape.matmul(net.W[0], tape.constant(e)), zl);
  NodeId gm = tape.scale(gp, -1.0);
  for (std::size_t l = 1; l + 1 < depth; ++l) {
    NodeId wp = tape.relu(net.W[l]);
    NodeId wn = tape.relu(tape.scale(net.W[l], -1.0));
    NodeId rp = tape.relu(gp);
    NodeId st = tape.scale_rows(gm, t.t[l - 1]);
    NodeId gpn = tape.add_col_broadcast(tape.add(tape.matmul(wp, rp), tape.matmul(wn, st)),
                                        net.b[l]);
    NodeId gmn = tape.add_col_broadcast(tape.add(tape.matmul(wn, rp), tape.matmul(wp, st)),
                                        tape.scale(net.b[l], -1.0));
    gp = gpn;
    gm = gmn;
  }
  NodeId rpt = tape.transpose(tape.relu(gp));
  NodeId smt = tape.transpose(tape.scale_rows(gm, t.t.back()));
  NodeId by = tape.select(net.b[depth - 1], y);
  NodeId wy = tape.select_row(net.W[depth - 1], y);
  std::vector<NodeId> bounds;
  bounds.reserve(kcount);
  for (std::size_t k = 0; k < kcount; ++k) {
    NodeId u = tape.sub(tape.select_row(net.W[depth - 1], k), wy);
    NodeId up = tape.relu(u);
    NodeId un = tape.relu(tape.scale(u, -1.0));
    NodeId vals = tape.add(tape.matmul(rpt, up), tape.matmul(smt, un));
    NodeId bterm = tape.sub(tape.select(net.b[depth - 1], k), by);
    bounds.push_back(tape.add(tape.max_reduce(vals), bterm));
  }
  return tape.logsumexp(tape.pack(bounds));
}

CertResult certify_sample(const NetworkParams& params, const Tensor& x, std::size_t y,
                          double rho, std::size_t sample_id) {
  if (y >= params.class_count())
    throw std::invalid_argument("certify_sample: label out of range");
  FixedT t = fixed_t(params, x);
  double worst = -std::numeric_limits<double>::infinity();
  if (params.depth() == 1) {
    for (std::size_t k = 0; k < params.class_count(); ++k) {
      if (k == y) continue;
      worst = std::max(worst, rub_class_bound(params, x, y, k, rho, t));
    }
  } else {
    RowMat gp, gm;
    propagate_branches(params, x, t, rho, gp, gm);
    for (std::size_t k = 0; k < params.class_count(); ++k) {
      if (k == y) continue;
      Eigen::VectorXd vals = final_branch_values(params, t, k, y, gp, gm);
      worst = std::max(worst, vals.maxCoeff());
    }
  }
  return CertResult{sample_id, worst < 0.0, worst, rho};
}

std::vector<CertResult> certify_batch(const NetworkParams& params, const Batch& batch,
                                      double rho) {
  std::vector<CertResult> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    out.push_back(certify_sample(params, batch.row(i), batch.y[i], rho, i));
  return out;
}

double certified_accuracy(const NetworkParams& params, const Batch& batch, double rho) {
  if (batch.size() == 0) throw std::invalid_argument("certified_accuracy: empty dataset");
  std::size_t count = 0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (certify_sample(params, batch.row(i), batch.y[i], rho, i).certified) ++count;
  return static_cast<double>(count) / static_cast<double>(batch.size());
}

namespace {

double margin_at(const NetworkParams& params, const Tensor& x, std::size_t y, std::size_t k) {
  Tensor z = forward(params, x).logits();
  return z[k] - z[y];
}

Tensor margin_input_gradient(const NetworkParams& params, const Tensor& x, std::size_t y,
                             std::size_t k) {
  Tensor J = input_jacobian(params, x);
  std::vector<double> g(J.cols());
  for (std::size_t c = 0; c < J.cols(); ++c) g[c] = J.at(k, c) - J.at(y, c);
  return Tensor::vector(std::move(g));
}

Tensor add_vec(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

}  // namespace

double brute_force_sup(const NetworkParams& params, const Tensor& x, std::size_t y,
                       std::size_t k, double rho, std::size_t samples, std::uint64_t seed) {
  std::size_t m_dim = params.input_dim();
  if (m_dim > 6) throw std::invalid_argument("brute_force_sup: dimension too large (M <= 6)");
  double best = margin_at(params, x, y, k);
  auto consider = [&](const Tensor& delta) {
    best = std::max(best, margin_at(params, add_vec(x, delta), y, k));
  };
  for (std::size_t m = 0; m < m_dim; ++m) {
    for (double a : {rho, -rho}) {
      Tensor d = Tensor::zeros({m_dim});
      d[m] = a;
      consider(d);
    }
  }
  Rng rng(seed);
  for (std::size_t s = 0; s < samples; ++s) consider(sample_lp_ball(rng, m_dim, Norm::l1, rho));
  // PGD-style ascent on the margin with single-coordinate L1 steps.
  for (int restart = 0; restart < 3; ++restart) {
    Tensor delta = restart == 0 ? Tensor::zeros({m_dim})
                                : sample_lp_ball(rng, m_dim, Norm::l1, rho);
    double step = rho / 8.0;
    for (int it = 0; it < 60; ++it) {
      Tensor g = margin_input_gradient(params, add_vec(x, delta), y, k);
      std::size_t imax = 0;
      for (std::size_t i = 1; i < g.size(); ++i)
        if (std::abs(g[i]) > std::abs(g[imax])) imax = i;
      if (g[imax] != 0.0) delta[imax] += step * (g[imax] > 0.0 ? 1.0 : -1.0);
      delta = project_lp_ball(delta, Norm::l1, rho);
      consider(delta);
    }
  }
  return best;
}

}  // namespace robustnet
