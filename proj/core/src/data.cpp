#include "robustnet/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "robustnet/rng.hpp"

namespace robustnet {

PreprocessKind parse_preprocess(const std::string& s) {
  if (s == "none") return PreprocessKind::none;
  if (s == "scale01") return PreprocessKind::scale01;
  if (s == "standardize") return PreprocessKind::standardize;
  throw std::invalid_argument("unknown preprocessing '" + s +
                              "' (expected none, scale01 or standardize)");
}

std::string preprocess_name(PreprocessKind k) {
  switch (k) {
    case PreprocessKind::none: return "none";
    case PreprocessKind::scale01: return "scale01";
    case PreprocessKind::standardize: return "standardize";
  }
  return "?";
}

Tensor Dataset::sample(std::size_t i) const {
  std::vector<double> row(feature_dim());
  for (std::size_t c = 0; c < row.size(); ++c) row[c] = features.at(i, c);
  return Tensor::vector(std::move(row));
}

Batch Dataset::batch(const std::vector<std::size_t>& idx) const {
  Batch b;
  b.X = Tensor::zeros({idx.size(), feature_dim()});
  b.y.resize(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (std::size_t c = 0; c < feature_dim(); ++c) b.X.at(r, c) = features.at(idx[r], c);
    b.y[r] = labels[idx[r]];
  }
  return b;
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == delimiter) {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_cell(const std::string& s, std::size_t row, std::size_t col) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  if (pos != s.size() || s.empty())
    throw std::runtime_error("load_delimited: non-numeric cell '" + s + "' at row " +
                             std::to_string(row) + ", column " + std::to_string(col));
  return v;
}

}  // namespace

Dataset load_delimited(const std::string& path, const std::string& label_column,
                       char delimiter, bool header) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_delimited: cannot open " + path);
  std::string line;
  std::vector<std::string> names;
  std::size_t label_idx = 0;
  bool label_resolved = false;

  if (header) {
    if (!std::getline(is, line))
      throw std::runtime_error("load_delimited: empty file " + path);
    names = split_fields(line, delimiter);
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == label_column) {
        label_idx = i;
        label_resolved = true;
        break;
      }
  }
  if (!label_resolved) {
    try {
      std::size_t pos = 0;
      label_idx = std::stoul(label_column, &pos);
      if (pos != label_column.size()) throw std::invalid_argument(label_column);
      label_resolved = true;
    } catch (const std::exception&) {
      throw std::runtime_error("load_delimited: label column '" + label_column +
                               "' not found in " + path);
    }
  }

  std::vector<double> values;
  std::vector<std::size_t> labels;
  std::vector<std::string> label_names;
  std::map<std::string, std::size_t> label_map;
  std::size_t columns = 0, nrows = 0;
  while (std::getline(is, line)) {
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    std::vector<std::string> fields = split_fields(line, delimiter);
    if (columns == 0) {
      columns = fields.size();
      if (label_idx >= columns)
        throw std::runtime_error("load_delimited: label column index " +
                                 std::to_string(label_idx) + " out of range in " + path);
    } else if (fields.size() != columns) {
      throw std::runtime_error("load_delimited: ragged row " + std::to_string(nrows + 1) +
                               " in " + path + " (expected " + std::to_string(columns) +
                               " fields, got " + std::to_string(fields.size()) + ")");
    }
    for (std::size_t c = 0; c < columns; ++c) {
      if (c == label_idx) {
        auto [it, inserted] = label_map.try_emplace(fields[c], label_names.size());
        if (inserted) label_names.push_back(fields[c]);
        labels.push_back(it->second);
      } else {
        values.push_back(parse_cell(fields[c], nrows + 1, c));
      }
    }
    ++nrows;
  }
  if (nrows == 0) throw std::runtime_error("load_delimited: no data rows in " + path);
  if (columns < 2)
    throw std::runtime_error("load_delimited: no feature columns in " + path);

  Dataset ds;
  ds.features = Tensor::matrix(nrows, columns - 1, std::move(values));
  ds.labels = std::move(labels);
  ds.label_names = std::move(label_names);
  return ds;
}

void save_delimited(const Dataset& ds, const std::string& path, char delimiter) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_delimited: cannot open " + path);
  char buf[32];
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t c = 0; c < ds.feature_dim(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.features.at(r, c));
      os << buf << delimiter;
    }
    os << ds.label_names[ds.labels[r]] << '\n';
  }
  if (!os) throw std::runtime_error("save_delimited: write failed for " + path);
}

namespace {

std::vector<unsigned char> read_binary(const std::string& path) {
  bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
  std::vector<unsigned char> bytes;
  if (gz) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("load_idx: cannot open " + path);
    unsigned char chunk[1 << 16];
    int n;
    while ((n = gzread(f, chunk, sizeof(chunk))) > 0)
      bytes.insert(bytes.end(), chunk, chunk + n);
    bool bad = n < 0;
    gzclose(f);
    if (bad) throw std::runtime_error("load_idx: gzip decompression failed for " + path);
  } else {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_idx: cannot open " + path);
    bytes.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
  }
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (static_cast<std::uint32_t>(b[off]) << 24) |
         (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) |
         static_cast<std::uint32_t>(b[off + 3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::vector<unsigned char> img = read_binary(images_path);
  std::vector<unsigned char> lab = read_binary(labels_path);
  if (img.size() < 16) throw std::runtime_error("load_idx: truncated image file " + images_path);
  if (lab.size() < 8) throw std::runtime_error("load_idx: truncated label file " + labels_path);
  if (read_be32(img, 0) != 0x00000803u)
    throw std::runtime_error("load_idx: bad image magic in " + images_path);
  if (read_be32(lab, 0) != 0x00000801u)
    throw std::runtime_error("load_idx: bad label magic in " + labels_path);
  std::size_t n = read_be32(img, 4);
  std::size_t rows = read_be32(img, 8);
  std::size_t cols = read_be32(img, 12);
  std::size_t n_lab = read_be32(lab, 4);
  if (n != n_lab)
    throw std::runtime_error("load_idx: image/label count mismatch (" + std::to_string(n) +
                             " vs " + std::to_string(n_lab) + ")");
  std::size_t pixels = rows * cols;
  if (img.size() < 16 + n * pixels)
    throw std::runtime_error("load_idx: truncated image file " + images_path);
  if (lab.size() < 8 + n)
    throw std::runtime_error("load_idx: truncated label file " + labels_path);

  Dataset ds;
  ds.from_images = true;
  ds.features = Tensor::zeros({n, pixels});
  ds.labels.resize(n);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < pixels; ++p)
      ds.features.at(i, p) = static_cast<double>(img[16 + i * pixels + p]);
    ds.labels[i] = lab[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  for (std::size_t k = 0; k <= max_label; ++k) ds.label_names.push_back(std::to_string(k));
  return ds;
}

void split(Dataset& ds, std::uint64_t seed) {
  std::size_t n = ds.size();
  if (n < 5) throw std::invalid_argument("split: need at least 5 samples");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.uniform_index(i + 1)]);
  std::size_t test_n = n / 5;
  std::size_t val_n = (n - test_n) / 4;
  ds.test.assign(perm.begin(), perm.begin() + test_n);
  ds.val.assign(perm.begin() + test_n, perm.begin() + test_n + val_n);
  ds.train.assign(perm.begin() + test_n + val_n, perm.end());
  std::sort(ds.test.begin(), ds.test.end());
  std::sort(ds.val.begin(), ds.val.end());
  std::sort(ds.train.begin(), ds.train.end());
}

void preprocess(Dataset& ds, PreprocessKind kind) {
  std::size_t m = ds.feature_dim();
  ds.preprocessing.kind = kind;
  ds.preprocessing.shift.assign(m, 0.0);
  ds.preprocessing.scale.assign(m, 1.0);
  if (kind == PreprocessKind::none) return;
  if (ds.train.empty() && !ds.from_images)
    throw std::invalid_argument("preprocess: split must be assigned first");

  if (kind == PreprocessKind::scale01) {
    if (ds.from_images) {
      ds.preprocessing.scale.assign(m, 255.0);
    } else {
      for (std::size_t c = 0; c < m; ++c) {
        double mx = 0.0;
        for (std::size_t r : ds.train) mx = std::max(mx, std::abs(ds.features.at(r, c)));
        ds.preprocessing.scale[c] = std::max(mx, 1e-8);
      }
    }
  } else {  // standardize
    if (ds.train.empty())
      throw std::invalid_argument("preprocess: split must be assigned first");
    double inv_n = 1.0 / static_cast<double>(ds.train.size());
    for (std::size_t c = 0; c < m; ++c) {
      double mean = 0.0;
      for (std::size_t r : ds.train) mean += ds.features.at(r, c);
      mean *= inv_n;
      double var = 0.0;
      for (std::size_t r : ds.train) {
        double d = ds.features.at(r, c) - mean;
        var += d * d;
      }
      ds.preprocessing.shift[c] = mean;
      ds.preprocessing.scale[c] = std::max(std::sqrt(var * inv_n), 1e-8);
    }
  }
  for (std::size_t r = 0; r < ds.size(); ++r)
    for (std::size_t c = 0; c < m; ++c)
      ds.features.at(r, c) =
          (ds.features.at(r, c) - ds.preprocessing.shift[c]) / ds.preprocessing.scale[c];
}

}  // namespace robustnet
