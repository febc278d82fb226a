#include "robustnet/attacks.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "robustnet/objectives.hpp"

namespace robustnet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> mat(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}
Eigen::Map<const Eigen::VectorXd> vec(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.size())};
}

Tensor add_vec(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

/// Direction of steepest linearized ascent with unit radius; the fgm step
/// reuses it with radius rho.
Tensor dual_direction(const Tensor& g, Norm p) {
  Tensor d = Tensor::zeros(g.shape());
  switch (p) {
    case Norm::linf:
      for (std::size_t i = 0; i < g.size(); ++i)
        d[i] = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
      break;
    case Norm::l2: {
      double n = lp_norm(g, Norm::l2);
      if (n > 0.0)
        for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] / n;
      break;
    }
    case Norm::l1: {
      std::size_t imax = 0;
      for (std::size_t i = 1; i < g.size(); ++i)
        if (std::abs(g[i]) > std::abs(g[imax])) imax = i;
      if (g[imax] != 0.0) d[imax] = g[imax] > 0.0 ? 1.0 : -1.0;
      break;
    }
  }
  return d;
}

}  // namespace

AttackKind parse_attack(const std::string& s) {
  if (s == "fgsm") return AttackKind::fgsm;
  if (s == "fgm") return AttackKind::fgm;
  if (s == "pgd") return AttackKind::pgd;
  throw std::invalid_argument("unknown attack '" + s + "' (expected fgsm, fgm or pgd)");
}

std::string attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::fgsm: return "fgsm";
    case AttackKind::fgm: return "fgm";
    case AttackKind::pgd: return "pgd";
  }
  return "?";
}

void AttackConfig::validate() const {
  if (rho < 0.0) throw std::invalid_argument("AttackConfig: rho must be nonnegative");
  if (kind == AttackKind::fgsm && p != Norm::linf)
    throw std::invalid_argument("AttackConfig: fgsm requires p = inf");
  if (kind == AttackKind::pgd) {
    if (steps == 0) throw std::invalid_argument("AttackConfig: steps must be positive");
    if (restarts == 0) throw std::invalid_argument("AttackConfig: restarts must be positive");
    if (step_size < 0.0) throw std::invalid_argument("AttackConfig: step_size must be positive");
  }
}

double AttackConfig::effective_step() const {
  return step_size > 0.0 ? step_size : 2.5 * rho / static_cast<double>(steps);
}

Tensor project_lp_ball(const Tensor& v, Norm p, double rho) {
  if (!v.is_vector()) throw std::invalid_argument("project_lp_ball: expected a vector");
  if (rho < 0.0) throw std::invalid_argument("project_lp_ball: rho must be nonnegative");
  switch (p) {
    case Norm::linf: {
      Tensor out = v;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], -rho, rho);
      return out;
    }
    case Norm::l2: {
      double n = lp_norm(v, Norm::l2);
      if (n <= rho) return v;
      Tensor out = v;
      double s = rho / n;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
      return out;
    }
    case Norm::l1: {
      if (lp_norm(v, Norm::l1) <= rho) return v;
      // Projection onto the simplex of the magnitudes (sort and threshold),
      // signs restored afterwards.
      std::vector<double> mags(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) mags[i] = std::abs(v[i]);
      std::sort(mags.begin(), mags.end(), std::greater<double>());
      double cum = 0.0, tau = 0.0;
      for (std::size_t j = 0; j < mags.size(); ++j) {
        cum += mags[j];
        double cand = (cum - rho) / static_cast<double>(j + 1);
        if (mags[j] - cand > 0.0) tau = cand;
        else break;
      }
      Tensor out = v;
      for (std::size_t i = 0; i < out.size(); ++i) {
        double m = std::abs(out[i]) - tau;
        out[i] = m > 0.0 ? (out[i] > 0.0 ? m : -m) : 0.0;
      }
      return out;
    }
  }
  throw std::invalid_argument("project_lp_ball: unsupported p");
}

Tensor sample_lp_ball(Rng& rng, std::size_t dim, Norm p, double rho) {
  Tensor d = Tensor::zeros({dim});
  switch (p) {
    case Norm::linf:
      for (std::size_t i = 0; i < dim; ++i) d[i] = rng.uniform(-rho, rho);
      return d;
    case Norm::l2: {
      double n2 = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        d[i] = rng.normal();
        n2 += d[i] * d[i];
      }
      double n = std::sqrt(n2);
      double r = rho * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
      if (n > 0.0)
        for (std::size_t i = 0; i < dim; ++i) d[i] *= r / n;
      return d;
    }
    case Norm::l1: {
      // Magnitudes uniform on the simplex via exponential spacings; radius
      // rho u^{1/dim} makes the draw uniform over the ball volume.
      double total = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        d[i] = rng.exponential();
        total += d[i];
      }
      double r = rho * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
      for (std::size_t i = 0; i < dim; ++i) d[i] = rng.sign() * r * d[i] / total;
      return d;
    }
  }
  throw std::invalid_argument("sample_lp_ball: unsupported p");
}

Tensor loss_input_gradient(const NetworkParams& params, const Tensor& x, std::size_t y) {
  ForwardTrace trace = forward(params, x);
  Tensor J = input_jacobian(params, trace);
  Tensor sm = softmax(trace.logits());
  sm[y] -= 1.0;
  Tensor g = Tensor::zeros({params.input_dim()});
  Eigen::Map<Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size())) =
      mat(J).transpose() * vec(sm);
  return g;
}

Tensor fgsm(const NetworkParams& params, const Tensor& x, std::size_t y, double rho) {
  Tensor g = loss_input_gradient(params, x, y);
  Tensor d = dual_direction(g, Norm::linf);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= rho;
  return d;
}

Tensor fgm(const NetworkParams& params, const Tensor& x, std::size_t y, Norm p, double rho) {
  Tensor g = loss_input_gradient(params, x, y);
  Tensor d = dual_direction(g, p);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= rho;
  return d;
}

Tensor pgd(const NetworkParams& params, const Tensor& x, std::size_t y,
           const AttackConfig& cfg) {
  cfg.validate();
  std::size_t dim = params.input_dim();
  double step = cfg.effective_step();
  Rng rng(cfg.seed);
  Tensor best = Tensor::zeros({dim});
  double best_loss = cross_entropy(y, forward(params, x).logits());
  auto consider = [&](const Tensor& delta) {
    double loss = cross_entropy(y, forward(params, add_vec(x, delta)).logits());
    if (loss > best_loss) {
      best_loss = loss;
      best = delta;
    }
  };
  for (std::size_t restart = 0; restart < cfg.restarts; ++restart) {
    Tensor delta = restart == 0 ? Tensor::zeros({dim}) : sample_lp_ball(rng, dim, cfg.p, cfg.rho);
    if (restart > 0) consider(delta);
    for (std::size_t it = 0; it < cfg.steps; ++it) {
      Tensor g = loss_input_gradient(params, add_vec(x, delta), y);
      Tensor dir = dual_direction(g, cfg.p);
      for (std::size_t i = 0; i < dim; ++i) delta[i] += step * dir[i];
      delta = project_lp_ball(delta, cfg.p, cfg.rho);
      consider(delta);
    }
  }
  return best;
}

Tensor attack_delta(const NetworkParams& params, const Tensor& x, std::size_t y,
                    const AttackConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case AttackKind::fgsm: return fgsm(params, x, y, cfg.rho);
    case AttackKind::fgm: return fgm(params, x, y, cfg.p, cfg.rho);
    case AttackKind::pgd: return pgd(params, x, y, cfg);
  }
  throw std::invalid_argument("attack_delta: bad attack kind");
}

double adversarial_accuracy(const NetworkParams& params, const Batch& batch,
                            const AttackConfig& cfg) {
  if (batch.size() == 0) throw std::invalid_argument("adversarial_accuracy: empty dataset");
  cfg.validate();
  Rng base(cfg.seed);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    AttackConfig per = cfg;
    per.seed = base.fork(i).seed();
    Tensor x = batch.row(i);
    Tensor delta = attack_delta(params, x, batch.y[i], per);
    if (predict(params, add_vec(x, delta)) == batch.y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

double clean_accuracy(const NetworkParams& params, const Batch& batch) {
  if (batch.size() == 0) throw std::invalid_argument("clean_accuracy: empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (predict(params, batch.row(i)) == batch.y[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

}  // namespace robustnet
