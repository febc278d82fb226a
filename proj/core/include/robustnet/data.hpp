#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "robustnet/network.hpp"
#include "robustnet/tensor.hpp"

namespace robustnet {

enum class PreprocessKind { none, scale01, standardize };
PreprocessKind parse_preprocess(const std::string& s);
std::string preprocess_name(PreprocessKind k);

/// Per-feature affine transform (x - shift) / scale actually applied, kept
/// so reports can state what the model saw. Statistics come from train
/// indices only.
struct Preprocessing {
  PreprocessKind kind = PreprocessKind::none;
  std::vector<double> shift;
  std::vector<double> scale;
};

/// An immutable labelled dataset plus its split. Split lists are disjoint,
/// sorted, and cover [0, N) once assigned.
struct Dataset {
  Tensor features;  // N x M
  std::vector<std::size_t> labels;
  std::vector<std::string> label_names;  // class index -> original label text
  std::vector<std::size_t> train, val, test;
  Preprocessing preprocessing;
  bool from_images = false;  // affects the scale01 rule (fixed 255 divisor)

  std::size_t size() const { return labels.size(); }
  std::size_t feature_dim() const { return features.cols(); }
  std::size_t class_count() const { return label_names.size(); }
  Tensor sample(std::size_t i) const;
  Batch batch(const std::vector<std::size_t>& idx) const;
};

/// Loads a delimited text file, one sample per row. The label column is
/// named (header files) or a 0-based index; labels map to class indices by
/// first appearance. Missing file, ragged rows and non-numeric cells are
/// distinct errors.
Dataset load_delimited(const std::string& path, const std::string& label_column,
                       char delimiter = ',', bool header = false);

/// Writes features + labels back out; load_delimited(save_delimited(ds))
/// reproduces the features bit-exactly.
void save_delimited(const Dataset& ds, const std::string& path, char delimiter = ',');

/// Loads an IDX image/label file pair (big-endian, standard magics; a .gz
/// extension selects gzip decompression). Pixels arrive as raw byte values.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Deterministic shuffled split: floor(20%) test, then floor(25%) of the
/// remainder as validation. Requires N >= 5.
void split(Dataset& ds, std::uint64_t seed);

/// scale01 divides by 255 for image data or by the per-feature max
/// magnitude of the TRAIN rows for tabular data; standardize recenters by
/// train mean / train sd with the sd floored at 1e-8.
void preprocess(Dataset& ds, PreprocessKind kind);

}  // namespace robustnet
