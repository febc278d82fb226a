#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace robustnet {

/// Norm order of an Lp ball / its dual. Only the three orders used by the
/// uncertainty sets are representable, so "unsupported p" is a parse error
/// rather than a runtime branch.
enum class Norm { l1, l2, linf };

Norm dual_norm(Norm p);
Norm parse_norm(const std::string& s);  // "1" | "2" | "inf"
std::string norm_name(Norm p);

/// Dense row-major array of 64-bit reals. Rank 0 is a scalar, rank 1 a
/// vector, rank 2 a matrix; nothing higher is needed. The flat data length
/// always equals the product of the extents (1 for rank 0).
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor ones(std::vector<std::size_t> shape);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  bool empty() const { return data_.empty(); }  // default-constructed sentinel
  bool is_scalar() const { return shape_.empty() && !data_.empty(); }
  bool is_vector() const { return shape_.size() == 1; }
  bool is_matrix() const { return shape_.size() == 2; }

  std::size_t rows() const;
  std::size_t cols() const;

  double as_scalar() const;
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Elementwise / reduction helpers used both directly and as the forward
// halves of tape operations.

/// [x]+ applied per coordinate.
Tensor relu(const Tensor& t);

/// Lp norm of a vector, p in {1, 2, inf}.
double lp_norm(const Tensor& t, Norm p);

/// log(sum_k exp(z_k)) with max-shift; never overflows for finite input and
/// satisfies logsumexp(z + c*1) = logsumexp(z) + c.
double logsumexp(const Tensor& z);

/// exp(z_k - logsumexp(z)); entries in (0,1], summing to 1.
Tensor softmax(const Tensor& z);

std::size_t argmax(const Tensor& v);  // lowest index on ties

}  // namespace robustnet
