#include "robustnet/tape.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace robustnet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

ConstMatMap mat(const Tensor& t) { return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())}; }
MatMap mat(Tensor& t) { return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())}; }
ConstVecMap vec(const Tensor& t) { return {t.data(), static_cast<Eigen::Index>(t.size())}; }
VecMap vec(Tensor& t) { return {t.data(), static_cast<Eigen::Index>(t.size())}; }

[[noreturn]] void shape_error(const char* op) {
  throw std::invalid_argument(std::string("Tape::") + op + ": shape mismatch");
}

}  // namespace

NodeId Tape::push(TapeNode node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Tensor v) {
  TapeNode n{OpKind::leaf, {}};
  n.value = std::move(v);
  n.needs_grad = true;
  return push(std::move(n));
}

NodeId Tape::constant(Tensor v) {
  TapeNode n{OpKind::constant, {}};
  n.value = std::move(v);
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  if (!val(a).same_shape(val(b))) shape_error("add");
  TapeNode n{OpKind::add, {a, b}};
  n.value = val(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += val(b)[i];
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  if (!val(a).same_shape(val(b))) shape_error("sub");
  TapeNode n{OpKind::sub, {a, b}};
  n.value = val(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] -= val(b)[i];
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  return push(std::move(n));
}

NodeId Tape::hadamard(NodeId a, NodeId b) {
  if (!val(a).same_shape(val(b))) shape_error("hadamard");
  TapeNode n{OpKind::hadamard, {a, b}};
  n.value = val(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= val(b)[i];
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double s) {
  TapeNode n{OpKind::scale, {a}};
  n.dpayload = s;
  n.value = val(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= s;
  n.needs_grad = nodes_[a].needs_grad;
  return push(std::move(n));
}

NodeId Tape::relu(NodeId a) {
  TapeNode n{OpKind::relu, {a}};
  n.value = robustnet::relu(val(a));
  n.needs_grad = nodes_[a].needs_grad;
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (!A.is_matrix()) shape_error("matmul");
  TapeNode n{OpKind::matmul, {a, b}};
  if (B.is_matrix()) {
    if (A.cols() != B.rows()) shape_error("matmul");
    n.value = Tensor::zeros({A.rows(), B.cols()});
    mat(n.value) = mat(A) * mat(B);
  } else if (B.is_vector()) {
    if (A.cols() != B.size()) shape_error("matmul");
    n.value = Tensor::zeros({A.rows()});
    vec(n.value) = mat(A) * vec(B);
  } else {
    shape_error("matmul");
  }
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  return push(std::move(n));
}

NodeId Tape::transpose(NodeId a) {
  const Tensor& A = val(a);
  if (!A.is_matrix()) shape_error("transpose");
  TapeNode n{OpKind::transpose, {a}};
  n.value = Tensor::zeros({A.cols(), A.rows()});
  mat(n.value) = mat(A).transpose();
  n.needs_grad = nodes_[a].needs_grad;
  return push(std::move(n));
}

NodeId Tape::scale_rows(NodeId m, Tensor row_weights) {
  const Tensor& A = val(m);
  if (!A.is_matrix() || !row_weights.is_vector() || row_weights.size() != A.rows())
    shape_error("scale_rows");
  TapeNode n{OpKind::scale_rows, {m}};
  n.value = A;
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c) n.value.at(r, c) *= row_weights[r];
  n.tpayload = std::move(row_weights);
  n.needs_grad = nodes_[m].needs_grad;
  return push(std::move(n));
}

NodeId Tape::add_col_broadcast(NodeId m, NodeId v) {
  const Tensor& A = val(m);
  const Tensor& b = val(v);
  if (!A.is_matrix() || !b.is_vector() || b.size() != A.rows())
    shape_error("add_col_broadcast");
  TapeNode n{OpKind::add_col_broadcast, {m, v}};
  n.value = A;
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c) n.value.at(r, c) += b[r];
  n.needs_grad = nodes_[m].needs_grad || nodes_[v].needs_grad;
  return push(std::move(n));
}

NodeId Tape::concat_cols(NodeId a, NodeId b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (!A.is_matrix() || !B.is_matrix() || A.rows() != B.rows()) shape_error("concat_cols");
  TapeNode n{OpKind::concat_cols, {a, b}};
  n.value = Tensor::zeros({A.rows(), A.cols() + B.cols()});
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < A.cols(); ++c) n.value.at(r, c) = A.at(r, c);
    for (std::size_t c = 0; c < B.cols(); ++c) n.value.at(r, A.cols() + c) = B.at(r, c);
  }
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  return push(std::move(n));
}

NodeId Tape::select(NodeId v, std::size_t i) {
  const Tensor& x = val(v);
  if (!x.is_vector() || i >= x.size()) shape_error("select");
  TapeNode n{OpKind::select, {v}};
  n.ipayload = i;
  n.value = Tensor::scalar(x[i]);
  n.needs_grad = nodes_[v].needs_grad;
  return push(std::move(n));
}

NodeId Tape::select_row(NodeId m, std::size_t i) {
  const Tensor& A = val(m);
  if (!A.is_matrix() || i >= A.rows()) shape_error("select_row");
  TapeNode n{OpKind::select_row, {m}};
  n.ipayload = i;
  std::vector<double> row(A.cols());
  for (std::size_t c = 0; c < A.cols(); ++c) row[c] = A.at(i, c);
  n.value = Tensor::vector(std::move(row));
  n.needs_grad = nodes_[m].needs_grad;
  return push(std::move(n));
}

NodeId Tape::pack(const std::vector<NodeId>& scalars) {
  if (scalars.empty()) shape_error("pack");
  TapeNode n{OpKind::pack, scalars};
  std::vector<double> v(scalars.size());
  bool ng = false;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    v[i] = val(scalars[i]).as_scalar();
    ng = ng || nodes_[scalars[i]].needs_grad;
  }
  n.value = Tensor::vector(std::move(v));
  n.needs_grad = ng;
  return push(std::move(n));
}

NodeId Tape::sum_reduce(NodeId a) {
  TapeNode n{OpKind::sum_reduce, {a}};
  double s = 0.0;
  for (std::size_t i = 0; i < val(a).size(); ++i) s += val(a)[i];
  n.value = Tensor::scalar(s);
  n.needs_grad = nodes_[a].needs_grad;
  return push(std::move(n));
}

NodeId Tape::max_reduce(NodeId v) {
  const Tensor& x = val(v);
  if (!x.is_vector() || x.size() == 0) shape_error("max_reduce");
  TapeNode n{OpKind::max_reduce, {v}};
  n.ipayload = robustnet::argmax(x);
  n.value = Tensor::scalar(x[n.ipayload]);
  n.needs_grad = nodes_[v].needs_grad;
  return push(std::move(n));
}

NodeId Tape::logsumexp(NodeId v) {
  const Tensor& x = val(v);
  if (!x.is_vector()) shape_error("logsumexp");
  TapeNode n{OpKind::logsumexp, {v}};
  n.value = Tensor::scalar(robustnet::logsumexp(x));
  n.needs_grad = nodes_[v].needs_grad;
  return push(std::move(n));
}

NodeId Tape::lq_norm(NodeId v, Norm q) {
  const Tensor& x = val(v);
  if (!x.is_vector()) shape_error("lq_norm");
  TapeNode n{OpKind::lq_norm, {v}};
  n.npayload = q;
  n.value = Tensor::scalar(lp_norm(x, q));
  n.needs_grad = nodes_[v].needs_grad;
  return push(std::move(n));
}

NodeId Tape::softmax(NodeId v) {
  const Tensor& x = val(v);
  if (!x.is_vector()) shape_error("softmax");
  TapeNode n{OpKind::softmax, {v}};
  n.value = robustnet::softmax(x);
  n.needs_grad = nodes_[v].needs_grad;
  return push(std::move(n));
}

NodeId Tape::dot(NodeId a, NodeId b) {
  const Tensor& u = val(a);
  const Tensor& w = val(b);
  if (!u.is_vector() || !w.is_vector() || u.size() != w.size()) shape_error("dot");
  TapeNode n{OpKind::dot, {a, b}};
  n.value = Tensor::scalar(vec(u).dot(vec(w)));
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  return push(std::move(n));
}

Tensor Tape::grad(NodeId id) const {
  const TapeNode& n = nodes_[id];
  if (n.grad.empty()) return Tensor::zeros(n.value.shape());
  return n.grad;
}

void Tape::backward(NodeId root) {
  if (!nodes_[root].value.is_scalar())
    throw std::invalid_argument("Tape::backward: root must be a scalar");
  for (TapeNode& n : nodes_) n.grad = Tensor();
  nodes_[root].grad = Tensor::scalar(1.0);

  auto accum = [this](NodeId id) -> Tensor& {
    TapeNode& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
    return n.grad;
  };
  auto wants = [this](NodeId id) { return nodes_[id].needs_grad; };

  for (NodeId i = root; i >= 0; --i) {
    TapeNode& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    const Tensor& g = n.grad;
    switch (n.kind) {
      case OpKind::leaf:
      case OpKind::constant:
        break;
      case OpKind::add: {
        for (int s = 0; s < 2; ++s)
          if (wants(n.inputs[s])) {
            Tensor& gi = accum(n.inputs[s]);
            for (std::size_t j = 0; j < g.size(); ++j) gi[j] += g[j];
          }
        break;
      }
      case OpKind::sub: {
        if (wants(n.inputs[0])) {
          Tensor& gi = accum(n.inputs[0]);
          for (std::size_t j = 0; j < g.size(); ++j) gi[j] += g[j];
        }
        if (wants(n.inputs[1])) {
          Tensor& gi = accum(n.inputs[1]);
          for (std::size_t j = 0; j < g.size(); ++j) gi[j] -= g[j];
        }
        break;
      }
      case OpKind::hadamard: {
        const Tensor& a = val(n.inputs[0]);
        const Tensor& b = val(n.inputs[1]);
        if (wants(n.inputs[0])) {
          Tensor& gi = accum(n.inputs[0]);
          for (std::size_t j = 0; j < g.size(); ++j) gi[j] += g[j] * b[j];
        }
        if (wants(n.inputs[1])) {
          Tensor& gi = accum(n.inputs[1]);
          for (std::size_t j = 0; j < g.size(); ++j) gi[j] += g[j] * a[j];
        }
        break;
      }
      case OpKind::scale: {
        if (wants(n.inputs[0])) {
          Tensor& gi = accum(n.inputs[0]);
          for (std::size_t j = 0; j < g.size(); ++j) gi[j] += n.dpayload * g[j];
        }
        break;
      }
      case OpKind::relu: {
        if (wants(n.inputs[0])) {
          const Tensor& a = val(n.inputs[0]);
          Tensor& gi = accum(n.inputs[0]);
          for (std::size_t j = 0; j < g.size(); ++j)
            if (a[j] > 0.0) gi[j] += g[j];
        }
        break;
      }
      case OpKind::matmul: {
        const Tensor& A = val(n.inputs[0]);
        const Tensor& B = val(n.inputs[1]);
        if (B.is_matrix()) {
          if (wants(n.inputs[0])) mat(accum(n.inputs[0])) += mat(g) * mat(B).transpose();
          if (wants(n.inputs[1])) mat(accum(n.inputs[1])) += mat(A).transpose() * mat(g);
        } else {
          if (wants(n.inputs[0])) mat(accum(n.inputs[0])) += vec(g) * vec(B).transpose();
          if (wants(n.inputs[1])) vec(accum(n.inputs[1])) += mat(A).transpose() * vec(g);
        }
        break;
      }
      case OpKind::transpose: {
        if (wants(n.inputs[0])) mat(accum(n.inputs[0])) += mat(g).transpose();
        break;
      }
      case OpKind::scale_rows: {
        if (wants(n.inputs[0])) {
          Tensor& gi = accum(n.inputs[0]);
          std::size_t cols = n.value.cols();
          for (std::size_t r = 0; r < n.value.rows(); ++r)
            for (std::size_t c = 0; c < cols; ++c)
              gi.at(r, c) += n.tpayload[r] * g.at(r, c);
        }
        break;
      }
      case OpKind::add_col_broadcast: {
        if (wants(n.inputs[0])) {
          Tensor& gi = accum(n.inputs[0]);
          for (std::size_t j = 0; j < g.size(); ++j) gi[j] += g[j];
        }
        if (wants(n.inputs[1])) {
          Tensor& gi = accum(n.inputs[1]);
          for (std::size_t r = 0; r < n.value.rows(); ++r)
            for (std::size_t c = 0; c < n.value.cols(); ++c) gi[r] += g.at(r, c);
        }
        break;
      }
      case OpKind::concat_cols: {
        std::size_t ca = val(n.inputs[0]).cols();
        std::size_t cb = val(n.inputs[1]).cols();
        if (wants(n.inputs[0])) {
          Tensor& gi = accum(n.inputs[0]);
          for (std::size_t r = 0; r < n.value.rows(); ++r)
            for (std::size_t c = 0; c < ca; ++c) gi.at(r, c) += g.at(r, c);
        }
        if (wants(n.inputs[1])) {
          Tensor& gi = accum(n.inputs[1]);
          for (std::size_t r = 0; r < n.value.rows(); ++r)
            for (std::size_t c = 0; c < cb; ++c) gi.at(r, c) += g.at(r, ca + c);
        }
        break;
      }
      case OpKind::select: {
        if (wants(n.inputs[0])) accum(n.inputs[0])[n.ipayload] += g.as_scalar();
        break;
      }
      case OpKind::select_row: {
        if (wants(n.inputs[0])) {
          Tensor& gi = accum(n.inputs[0]);
          for (std::size_t c = 0; c < g.size(); ++c) gi.at(n.ipayload, c) += g[c];
        }
        break;
      }
      case OpKind::pack: {
        for (std::size_t j = 0; j < n.inputs.size(); ++j)
          if (wants(n.inputs[j])) accum(n.inputs[j])[0] += g[j];
        break;
      }
      case OpKind::sum_reduce: {
        if (wants(n.inputs[0])) {
          Tensor& gi = accum(n.inputs[0]);
          double gs = g.as_scalar();
          for (std::size_t j = 0; j < gi.size(); ++j) gi[j] += gs;
        }
        break;
      }
      case OpKind::max_reduce: {
        if (wants(n.inputs[0])) accum(n.inputs[0])[n.ipayload] += g.as_scalar();
        break;
      }
      case OpKind::logsumexp: {
        if (wants(n.inputs[0])) {
          Tensor sm = robustnet::softmax(val(n.inputs[0]));
          Tensor& gi = accum(n.inputs[0]);
          double gs = g.as_scalar();
          for (std::size_t j = 0; j < gi.size(); ++j) gi[j] += gs * sm[j];
        }
        break;
      }
      case OpKind::lq_norm: {
        if (!wants(n.inputs[0])) break;
        const Tensor& x = val(n.inputs[0]);
        Tensor& gi = accum(n.inputs[0]);
        double gs = g.as_scalar();
        switch (n.npayload) {
          case Norm::l1:
            for (std::size_t j = 0; j < x.size(); ++j) {
              if (x[j] > 0.0) gi[j] += gs;
              else if (x[j] < 0.0) gi[j] -= gs;
            }
            break;
          case Norm::l2: {
            double nrm = n.value.as_scalar();
            if (nrm > 0.0)
              for (std::size_t j = 0; j < x.size(); ++j) gi[j] += gs * x[j] / nrm;
            break;
          }
          case Norm::linf: {
            if (n.value.as_scalar() > 0.0) {
              std::size_t best = 0;
              for (std::size_t j = 1; j < x.size(); ++j)
                if (std::abs(x[j]) > std::abs(x[best])) best = j;
              gi[best] += (x[best] > 0.0 ? gs : -gs);
            }
            break;
          }
        }
        break;
      }
      case OpKind::softmax: {
        if (wants(n.inputs[0])) {
          const Tensor& s = n.value;
          Tensor& gi = accum(n.inputs[0]);
          double dotgs = 0.0;
          for (std::size_t j = 0; j < s.size(); ++j) dotgs += g[j] * s[j];
          for (std::size_t j = 0; j < s.size(); ++j) gi[j] += s[j] * (g[j] - dotgs);
        }
        break;
      }
      case OpKind::dot: {
        double gs = g.as_scalar();
        const Tensor& u = val(n.inputs[0]);
        const Tensor& w = val(n.inputs[1]);
        if (wants(n.inputs[0])) {
          Tensor& gi = accum(n.inputs[0]);
          for (std::size_t j = 0; j < w.size(); ++j) gi[j] += gs * w[j];
        }
        if (wants(n.inputs[1])) {
          Tensor& gi = accum(n.inputs[1]);
          for (std::size_t j = 0; j < u.size(); ++j) gi[j] += gs * u[j];
        }
        break;
      }
    }
  }
}

}  // namespace robustnet
