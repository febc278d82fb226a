#include "robustnet/network.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace robustnet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> mat(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}
Eigen::Map<const Eigen::VectorXd> vec(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.size())};
}
Eigen::Map<Eigen::VectorXd> vec(Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.size())};
}

}  // namespace

NetworkParams::NetworkParams(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("NetworkParams: no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (!layer.W.is_matrix() || !layer.b.is_vector() || layer.b.size() != layer.out_dim())
      throw std::invalid_argument("NetworkParams: malformed layer " + std::to_string(l));
    if (l > 0 && layer.in_dim() != layers_[l - 1].out_dim())
      throw std::invalid_argument("NetworkParams: width mismatch between layers " +
                                  std::to_string(l - 1) + " and " + std::to_string(l));
  }
  if (class_count() < 2) throw std::invalid_argument("NetworkParams: need at least 2 classes");
}

NetworkParams NetworkParams::random(const std::vector<std::size_t>& widths, Rng& rng) {
  if (widths.size() < 2) throw std::invalid_argument("NetworkParams::random: need >= 2 widths");
  std::vector<Layer> layers;
  layers.reserve(widths.size() - 1);
  for (std::size_t l = 1; l < widths.size(); ++l) {
    std::size_t in = widths[l - 1], out = widths[l];
    double a = std::sqrt(6.0 / static_cast<double>(in + out));
    Layer layer{Tensor::zeros({out, in}), Tensor::zeros({out})};
    for (std::size_t i = 0; i < layer.W.size(); ++i) layer.W[i] = rng.uniform(-a, a);
    for (std::size_t i = 0; i < layer.b.size(); ++i) layer.b[i] = rng.uniform(-a, a);
    layers.push_back(std::move(layer));
  }
  return NetworkParams(std::move(layers));
}

std::vector<std::size_t> NetworkParams::widths() const {
  std::vector<std::size_t> w;
  w.reserve(layers_.size() + 1);
  w.push_back(input_dim());
  for (const Layer& l : layers_) w.push_back(l.out_dim());
  return w;
}

ForwardTrace forward(const NetworkParams& params, const Tensor& x) {
  if (!x.is_vector() || x.size() != params.input_dim())
    throw std::invalid_argument("forward: input length does not match network input width");
  ForwardTrace trace;
  trace.input = x;
  trace.preacts.reserve(params.depth());
  Tensor h = x;
  for (std::size_t l = 0; l < params.depth(); ++l) {
    if (l > 0) h = relu(h);
    const Layer& layer = params.layer(l);
    Tensor z = Tensor::zeros({layer.out_dim()});
    vec(z) = mat(layer.W) * vec(h) + vec(layer.b);
    trace.preacts.push_back(z);
    h = std::move(z);
  }
  return trace;
}

std::size_t predict(const NetworkParams& params, const Tensor& x) {
  return argmax(forward(params, x).logits());
}

std::vector<Tensor> activation_masks(const ForwardTrace& trace) {
  std::vector<Tensor> masks;
  if (trace.preacts.empty()) return masks;
  masks.reserve(trace.preacts.size() - 1);
  for (std::size_t l = 0; l + 1 < trace.preacts.size(); ++l) {
    const Tensor& z = trace.preacts[l];
    Tensor m = Tensor::zeros(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) m[i] = z[i] > 0.0 ? 1.0 : 0.0;
    masks.push_back(std::move(m));
  }
  return masks;
}

Tensor input_jacobian(const NetworkParams& params, const ForwardTrace& trace) {
  std::vector<Tensor> masks = activation_masks(trace);
  const Layer& first = params.layer(0);
  RowMat J = mat(first.W);
  for (std::size_t l = 1; l < params.depth(); ++l) {
    const Tensor& m = masks[l - 1];
    for (Eigen::Index r = 0; r < J.rows(); ++r) J.row(r) *= m[static_cast<std::size_t>(r)];
    J = (mat(params.layer(l).W) * J).eval();
  }
  Tensor out = Tensor::zeros({params.class_count(), params.input_dim()});
  Eigen::Map<RowMat>(out.data(), J.rows(), J.cols()) = J;
  return out;
}

Tensor input_jacobian(const NetworkParams& params, const Tensor& x) {
  return input_jacobian(params, forward(params, x));
}

Tensor Batch::row(std::size_t i) const {
  std::vector<double> r(X.cols());
  for (std::size_t c = 0; c < X.cols(); ++c) r[c] = X.at(i, c);
  return Tensor::vector(std::move(r));
}

namespace {
constexpr char kWeightMagic[8] = {'R', 'N', 'E', 'T', 'W', '0', '0', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}
}  // namespace

void save_network(const NetworkParams& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_network: cannot open " + path);
  os.write(kWeightMagic, sizeof(kWeightMagic));
  std::vector<std::size_t> w = params.widths();
  write_u64(os, params.depth());
  for (std::size_t r : w) write_u64(os, r);
  for (const Layer& l : params.layers()) {
    os.write(reinterpret_cast<const char*>(l.W.data()),
             static_cast<std::streamsize>(l.W.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(l.b.data()),
             static_cast<std::streamsize>(l.b.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("save_network: write failed for " + path);
}

NetworkParams load_network(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_network: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kWeightMagic, sizeof(magic)) != 0)
    throw std::runtime_error("load_network: bad magic in " + path);
  std::uint64_t depth = read_u64(is);
  if (!is || depth == 0 || depth > 1024)
    throw std::runtime_error("load_network: implausible depth in " + path);
  std::vector<std::size_t> widths(depth + 1);
  for (auto& w : widths) w = read_u64(is);
  std::vector<Layer> layers;
  layers.reserve(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    Layer layer{Tensor::zeros({widths[l + 1], widths[l]}), Tensor::zeros({widths[l + 1]})};
    is.read(reinterpret_cast<char*>(layer.W.data()),
            static_cast<std::streamsize>(layer.W.size() * sizeof(double)));
    is.read(reinterpret_cast<char*>(layer.b.data()),
            static_cast<std::streamsize>(layer.b.size() * sizeof(double)));
    if (!is) throw std::runtime_error("load_network: truncated file " + path);
    layers.push_back(std::move(layer));
  }
  return NetworkParams(std::move(layers));
}

}  // namespace robustnet
