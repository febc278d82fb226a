#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "robustnet/rng.hpp"
#include "robustnet/tensor.hpp"

namespace robustnet {

/// One dense layer computing W x + b. W is stored output-major: shape
/// (out_dim x in_dim), row r holds the weights feeding output unit r.
struct Layer {
  Tensor W;
  Tensor b;
  std::size_t in_dim() const { return W.cols(); }
  std::size_t out_dim() const { return W.rows(); }
};

/// Parameters of a feedforward ReLU classifier. Hidden layers apply ReLU to
/// their input; the final layer emits raw logits, one per class. Immutable
/// during evaluation; training produces a new value per step.
class NetworkParams {
 public:
  NetworkParams() = default;
  explicit NetworkParams(std::vector<Layer> layers);

  /// Builds a net with the given widths (input, hidden..., classes) and
  /// parameters drawn uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)).
  static NetworkParams random(const std::vector<std::size_t>& widths, Rng& rng);

  const std::vector<Layer>& layers() const { return layers_; }
  Layer& layer(std::size_t l) { return layers_[l]; }
  const Layer& layer(std::size_t l) const { return layers_[l]; }

  std::size_t depth() const { return layers_.size(); }
  std::size_t input_dim() const { return layers_.front().in_dim(); }
  std::size_t class_count() const { return layers_.back().out_dim(); }
  std::vector<std::size_t> widths() const;

 private:
  std::vector<Layer> layers_;
};

/// All pre-activations of one forward pass, z^1 .. z^L; the logits are
/// preacts.back(). Hidden ReLUs are applied on the fly, so post-activations
/// are recoverable as relu(preacts[l]).
struct ForwardTrace {
  Tensor input;
  std::vector<Tensor> preacts;
  const Tensor& logits() const { return preacts.back(); }
};

ForwardTrace forward(const NetworkParams& params, const Tensor& x);
std::size_t predict(const NetworkParams& params, const Tensor& x);

/// 0/1 vectors per hidden layer; entry i is 1 iff the pre-activation is
/// strictly positive (0 at exactly 0).
std::vector<Tensor> activation_masks(const ForwardTrace& trace);

/// Jacobian of the logits with respect to the input at x, treating the
/// activation pattern as locally constant: W^L D_{L-1} ... D_1 W^1 with
/// D_l = diag(mask_l). Shape (K x M).
Tensor input_jacobian(const NetworkParams& params, const ForwardTrace& trace);
Tensor input_jacobian(const NetworkParams& params, const Tensor& x);

/// A labelled evaluation batch: X is (N x M), y holds class indices.
struct Batch {
  Tensor X;
  std::vector<std::size_t> y;
  std::size_t size() const { return y.size(); }
  Tensor row(std::size_t i) const;
};

/// Binary weight file, little-endian: magic "RNETW001", then u64 L, the
/// L+1 widths r_0..r_L as u64, then per layer the row-major W (r_l x r_{l-1})
/// and b (r_l) as f64 arrays.
void save_network(const NetworkParams& params, const std::string& path);
NetworkParams load_network(const std::string& path);

}  // namespace robustnet
