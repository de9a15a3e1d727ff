#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fedkd/errors.hpp"
#include "fedkd/matrix.hpp"
#include "fedkd/rng.hpp"

namespace fedkd {

struct LabeledDataset {
  Matrix features;          // rows = samples
  std::vector<int> labels;  // in [0, num_classes)
  int num_classes = 0;
  int feature_dim = 0;

  int size() const { return features.rows(); }

  void validate() const {
    if (features.rows() != static_cast<int>(labels.size()))
      throw DataError("dataset: feature rows and label count differ");
    if (features.cols() != feature_dim) throw DataError("dataset: feature_dim mismatch");
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] < 0 || labels[i] >= num_classes)
        throw DataError("dataset: label out of range at row " + std::to_string(i));
  }

  LabeledDataset subset(const std::vector<int>& indices) const {
    LabeledDataset out;
    out.features = features.extract_rows(indices);
    out.labels.reserve(indices.size());
    for (int i : indices) out.labels.push_back(labels[static_cast<std::size_t>(i)]);
    out.num_classes = num_classes;
    out.feature_dim = feature_dim;
    return out;
  }

  bool operator==(const LabeledDataset&) const = default;
};

// Gaussian mixture with one unit-variance component per class. Class c is
// centred at (class_separation / sqrt(2)) * e_c, which puts every pair of
// centres exactly class_separation apart; this needs feature_dim >=
// num_classes. Deterministic per seed.
inline LabeledDataset generate_synthetic(int num_classes, int feature_dim,
                                         int samples_per_class, std::uint64_t seed,
                                         double class_separation) {
  if (num_classes < 2) throw ConfigError("generate_synthetic: num_classes must be >= 2");
  if (feature_dim < num_classes)
    throw ConfigError("generate_synthetic: feature_dim must be >= num_classes "
                      "(class centres are axis-aligned)");
  if (samples_per_class <= 0)
    throw ConfigError("generate_synthetic: samples_per_class must be positive");
  if (!(class_separation > 0.0))
    throw ConfigError("generate_synthetic: class_separation must be positive");

  Rng rng(derive_seed(seed, "synthetic"));
  LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.feature_dim = feature_dim;
  ds.features = Matrix(num_classes * samples_per_class, feature_dim);
  ds.labels.resize(static_cast<std::size_t>(num_classes) * samples_per_class);

  const double offset = class_separation / std::sqrt(2.0);
  int row = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int s = 0; s < samples_per_class; ++s, ++row) {
      for (int d = 0; d < feature_dim; ++d)
        ds.features(row, d) = rng.next_normal() + (d == c ? offset : 0.0);
      ds.labels[static_cast<std::size_t>(row)] = c;
    }
  }
  return ds;
}

// CSV ingestion: comma-separated numeric columns, final column an integer
// label. num_classes = max label + 1.
inline LabeledDataset load_csv(const std::string& path, bool has_header = false) {
  std::ifstream in(path);
  if (!in) throw DataError("load_csv: cannot open '" + path + "'");

  LabeledDataset ds;
  std::vector<double> values;
  std::string line;
  int line_no = 0;
  int columns = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && has_header) continue;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<double> parsed;
    while (std::getline(row, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
        parsed.push_back(v);
      } catch (const std::exception&) {
        throw DataError("load_csv: non-numeric cell '" + cell + "' at row " +
                        std::to_string(line_no));
      }
    }
    if (parsed.size() < 2)
      throw DataError("load_csv: row " + std::to_string(line_no) +
                      " needs at least one feature and a label");
    if (columns < 0) columns = static_cast<int>(parsed.size());
    if (static_cast<int>(parsed.size()) != columns)
      throw DataError("load_csv: inconsistent column count at row " + std::to_string(line_no));

    const double label_value = parsed.back();
    const int label = static_cast<int>(label_value);
    if (label != label_value || label < 0)
      throw DataError("load_csv: label must be a non-negative integer at row " +
                      std::to_string(line_no));
    parsed.pop_back();
    values.insert(values.end(), parsed.begin(), parsed.end());
    ds.labels.push_back(label);
    ds.num_classes = std::max(ds.num_classes, label + 1);
  }
  if (ds.labels.empty()) throw DataError("load_csv: '" + path + "' holds no samples");

  ds.feature_dim = columns - 1;
  ds.features = Matrix(static_cast<int>(ds.labels.size()), ds.feature_dim);
  std::copy(values.begin(), values.end(), ds.features.data().begin());
  return ds;
}

}  // namespace fedkd
