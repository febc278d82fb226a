#include "robustnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace robustnet {

Norm dual_norm(Norm p) {
  switch (p) {
    case Norm::l1: return Norm::linf;
    case Norm::l2: return Norm::l2;
    case Norm::linf: return Norm::l1;
  }
  throw std::invalid_argument("dual_norm: bad norm");
}

Norm parse_norm(const std::string& s) {
  if (s == "1") return Norm::l1;
  if (s == "2") return Norm::l2;
  if (s == "inf" || s == "Inf" || s == "INF") return Norm::linf;
  throw std::invalid_argument("unsupported norm order '" + s + "' (expected 1, 2 or inf)");
}

std::string norm_name(Norm p) {
  switch (p) {
    case Norm::l1: return "1";
    case Norm::l2: return "2";
    case Norm::linf: return "inf";
  }
  return "?";
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  std::size_t expect = 1;
  for (std::size_t e : shape_) {
    if (e == 0) throw std::invalid_argument("Tensor: zero extent");
    expect *= e;
  }
  if (expect != data_.size())
    throw std::invalid_argument("Tensor: data length does not match shape");
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::ones(std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return Tensor(std::move(shape), std::vector<double>(n, 1.0));
}

Tensor Tensor::vector(std::vector<double> v) {
  std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

std::size_t Tensor::rows() const {
  if (!is_matrix()) throw std::invalid_argument("Tensor::rows: not a matrix");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (!is_matrix()) throw std::invalid_argument("Tensor::cols: not a matrix");
  return shape_[1];
}

double Tensor::as_scalar() const {
  if (!is_scalar()) throw std::invalid_argument("Tensor::as_scalar: not a scalar");
  return data_[0];
}

double& Tensor::at(std::size_t r, std::size_t c) {
  if (!is_matrix()) throw std::invalid_argument("Tensor::at: not a matrix");
  return data_[r * shape_[1] + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (!is_matrix()) throw std::invalid_argument("Tensor::at: not a matrix");
  return data_[r * shape_[1] + c];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor relu(const Tensor& t) {
  Tensor out = t;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], 0.0);
  return out;
}

double lp_norm(const Tensor& t, Norm p) {
  if (!t.is_vector()) throw std::invalid_argument("lp_norm: expected a vector");
  switch (p) {
    case Norm::l1: {
      double s = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) s += std::abs(t[i]);
      return s;
    }
    case Norm::l2: {
      double s = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * t[i];
      return std::sqrt(s);
    }
    case Norm::linf: {
      double s = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) s = std::max(s, std::abs(t[i]));
      return s;
    }
  }
  throw std::invalid_argument("lp_norm: bad norm");
}

double logsumexp(const Tensor& z) {
  if (!z.is_vector()) throw std::invalid_argument("logsumexp: expected a vector");
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z.size(); ++i) m = std::max(m, z[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += std::exp(z[i] - m);
  return m + std::log(s);
}

Tensor softmax(const Tensor& z) {
  double lse = logsumexp(z);
  Tensor out = z;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i] - lse);
  return out;
}

std::size_t argmax(const Tensor& v) {
  if (!v.is_vector() || v.size() == 0)
    throw std::invalid_argument("argmax: expected a nonempty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace robustnet
