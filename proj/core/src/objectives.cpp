#include "robustnet/objectives.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "robustnet/robust_bound.hpp"

namespace robustnet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> mat(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}
Eigen::Map<const Eigen::VectorXd> vec(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.size())};
}

}  // namespace

Objective parse_objective(const std::string& s) {
  if (s == "nominal") return Objective::nominal;
  if (s == "baseline") return Objective::baseline;
  if (s == "arub") return Objective::arub;
  if (s == "rub") return Objective::rub;
  throw std::invalid_argument("unknown objective '" + s +
                              "' (expected nominal, baseline, arub or rub)");
}

std::string objective_name(Objective o) {
  switch (o) {
    case Objective::nominal: return "nominal";
    case Objective::baseline: return "baseline";
    case Objective::arub: return "arub";
    case Objective::rub: return "rub";
  }
  return "?";
}

void RobustConfig::validate() const {
  if (rho < 0.0) throw std::invalid_argument("RobustConfig: rho must be nonnegative");
  if (objective == Objective::rub && p != Norm::l1)
    throw std::invalid_argument("RobustConfig: rub requires p = 1");
}

double cross_entropy(std::size_t y, const Tensor& z) {
  if (!z.is_vector() || y >= z.size())
    throw std::invalid_argument("cross_entropy: label out of range");
  return logsumexp(z) - z[y];
}

TapeNet lift_params(Tape& tape, const NetworkParams& params) {
  TapeNet net;
  net.W.reserve(params.depth());
  net.b.reserve(params.depth());
  for (const Layer& l : params.layers()) {
    net.W.push_back(tape.leaf(l.W));
    net.b.push_back(tape.leaf(l.b));
  }
  return net;
}

NodeId forward_logits(Tape& tape, const TapeNet& net, const NetworkParams& params,
                      const Tensor& x, std::vector<NodeId>* preact_nodes) {
  if (!x.is_vector() || x.size() != params.input_dim())
    throw std::invalid_argument("forward_logits: input length mismatch");
  NodeId h = tape.constant(x);
  NodeId z = h;
  for (std::size_t l = 0; l < params.depth(); ++l) {
    if (l > 0) h = tape.relu(z);
    z = tape.add(tape.matmul(net.W[l], h), net.b[l]);
    if (preact_nodes) preact_nodes->push_back(z);
  }
  return z;
}

NodeId input_jacobian_node(Tape& tape, const TapeNet& net, const NetworkParams& params,
                           const std::vector<NodeId>& preact_nodes) {
  std::size_t depth = params.depth();
  if (depth == 1) return net.W[0];
  auto mask_of = [&tape](NodeId z) {
    const Tensor& v = tape.value(z);
    Tensor m = Tensor::zeros(v.shape());
    for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i] > 0.0 ? 1.0 : 0.0;
    return m;
  };
  NodeId prod = tape.scale_rows(net.W[0], mask_of(preact_nodes[0]));
  for (std::size_t l = 1; l + 1 < depth; ++l)
    prod = tape.scale_rows(tape.matmul(net.W[l], prod), mask_of(preact_nodes[l]));
  return tape.matmul(net.W[depth - 1], prod);
}

namespace {

NodeId cross_entropy_node(Tape& tape, std::size_t y, NodeId z) {
  return tape.sub(tape.logsumexp(z), tape.select(z, y));
}

NodeId arub_sample_node(Tape& tape, const TapeNet& net, const NetworkParams& params,
                        const Tensor& x, std::size_t y, double rho, Norm q) {
  std::vector<NodeId> preacts;
  NodeId z = forward_logits(tape, net, params, x, &preacts);
  NodeId J = input_jacobian_node(tape, net, params, preacts);
  NodeId zy = tape.select(z, y);
  NodeId rowy = tape.select_row(J, y);
  std::vector<NodeId> margins;
  margins.reserve(params.class_count());
  for (std::size_t k = 0; k < params.class_count(); ++k) {
    NodeId lin = tape.sub(tape.select(z, k), zy);
    NodeId dual = tape.lq_norm(tape.sub(tape.select_row(J, k), rowy), q);
    margins.push_back(tape.add(lin, tape.scale(dual, rho)));
  }
  return tape.logsumexp(tape.pack(margins));
}

NodeId baseline_sample_node(Tape& tape, const TapeNet& net, const NetworkParams& params,
                            const Tensor& x, std::size_t y, double rho, Norm q) {
  std::vector<NodeId> preacts;
  NodeId z = forward_logits(tape, net, params, x, &preacts);
  NodeId J = input_jacobian_node(tape, net, params, preacts);
  NodeId ce = cross_entropy_node(tape, y, z);
  Tensor ey = Tensor::zeros({params.class_count()});
  ey[y] = 1.0;
  NodeId diff = tape.sub(tape.softmax(z), tape.constant(ey));
  NodeId gx = tape.matmul(tape.transpose(J), diff);
  return tape.add(ce, tape.scale(tape.lq_norm(gx, q), rho));
}

}  // namespace

NodeId sample_objective_node(Tape& tape, const TapeNet& net, const NetworkParams& params,
                             const Tensor& x, std::size_t y, const RobustConfig& cfg) {
  cfg.validate();
  if (y >= params.class_count())
    throw std::invalid_argument("sample_objective_node: label out of range");
  switch (cfg.objective) {
    case Objective::nominal:
      return cross_entropy_node(tape, y, forward_logits(tape, net, params, x));
    case Objective::arub:
      return arub_sample_node(tape, net, params, x, y, cfg.rho, cfg.q());
    case Objective::baseline:
      return baseline_sample_node(tape, net, params, x, y, cfg.rho, cfg.q());
    case Objective::rub:
      return rub_sample_node(tape, net, params, x, y, cfg.rho);
  }
  throw std::invalid_argument("sample_objective_node: bad objective");
}

double arub_class_margin(const NetworkParams& params, const Tensor& x, std::size_t y,
                         std::size_t k, double rho, Norm q) {
  ForwardTrace trace = forward(params, x);
  const Tensor& z = trace.logits();
  Tensor J = input_jacobian(params, trace);
  std::vector<double> diff(J.cols());
  for (std::size_t c = 0; c < J.cols(); ++c) diff[c] = J.at(k, c) - J.at(y, c);
  return (z[k] - z[y]) + rho * lp_norm(Tensor::vector(std::move(diff)), q);
}

double baseline_sample_loss(const NetworkParams& params, const Tensor& x, std::size_t y,
                            double rho, Norm q) {
  ForwardTrace trace = forward(params, x);
  const Tensor& z = trace.logits();
  Tensor J = input_jacobian(params, trace);
  Tensor sm = softmax(z);
  sm[y] -= 1.0;
  Tensor gx = Tensor::zeros({params.input_dim()});
  Eigen::Map<Eigen::VectorXd>(gx.data(), static_cast<Eigen::Index>(gx.size())) =
      mat(J).transpose() * vec(sm);
  return cross_entropy(y, z) + rho * lp_norm(gx, q);
}

double sample_objective_value(const NetworkParams& params, const Tensor& x, std::size_t y,
                              const RobustConfig& cfg) {
  cfg.validate();
  switch (cfg.objective) {
    case Objective::nominal:
      return cross_entropy(y, forward(params, x).logits());
    case Objective::arub: {
      ForwardTrace trace = forward(params, x);
      const Tensor& z = trace.logits();
      Tensor J = input_jacobian(params, trace);
      Tensor margins = Tensor::zeros({params.class_count()});
      for (std::size_t k = 0; k < params.class_count(); ++k) {
        std::vector<double> diff(J.cols());
        for (std::size_t c = 0; c < J.cols(); ++c) diff[c] = J.at(k, c) - J.at(y, c);
        margins[k] = (z[k] - z[y]) + cfg.rho * lp_norm(Tensor::vector(std::move(diff)), cfg.q());
      }
      return logsumexp(margins);
    }
    case Objective::baseline:
      return baseline_sample_loss(params, x, y, cfg.rho, cfg.q());
    case Objective::rub:
      return rub_sample_loss(params, x, y, cfg.rho);
  }
  throw std::invalid_argument("sample_objective_value: bad objective");
}

double objective_value(const NetworkParams& params, const Batch& batch, const RobustConfig& cfg) {
  if (batch.size() == 0) throw std::invalid_argument("objective_value: empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    sum += sample_objective_value(params, batch.row(i), batch.y[i], cfg);
  return sum / static_cast<double>(batch.size());
}

ObjectiveEval objective_gradient(const NetworkParams& params, const Batch& batch,
                                 const RobustConfig& cfg) {
  if (batch.size() == 0) throw std::invalid_argument("objective_gradient: empty batch");
  Tape tape;
  TapeNet net = lift_params(tape, params);
  std::vector<NodeId> losses;
  losses.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    losses.push_back(sample_objective_node(tape, net, params, batch.row(i), batch.y[i], cfg));
  NodeId root = tape.scale(tape.sum_reduce(tape.pack(losses)),
                           1.0 / static_cast<double>(batch.size()));
  tape.backward(root);
  ObjectiveEval out;
  out.value = tape.value(root).as_scalar();
  out.gW.reserve(params.depth());
  out.gb.reserve(params.depth());
  for (std::size_t l = 0; l < params.depth(); ++l) {
    out.gW.push_back(tape.grad(net.W[l]));
    out.gb.push_back(tape.grad(net.b[l]));
  }
  return out;
}

}  // namespace robustnet
