#pragma once

#include <cmath>
#include <initializer_list>
#include <vector>

#include "fedkd/errors.hpp"

namespace fedkd {

// Dense row-major matrix of doubles. Just enough linear algebra for dense
// classifiers; anything heavier belongs to the caller.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {
    if (rows < 0 || cols < 0) throw ShapeError("Matrix: negative dimensions");
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<int>(rows.size()),
             rows.size() ? static_cast<int>(rows.begin()->size()) : 0);
    int r = 0;
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != m.cols_)
        throw ShapeError("Matrix::from_rows: ragged rows");
      int c = 0;
      for (double v : row) m(r, c++) = v;
      ++r;
    }
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(int r, int c) {
    return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
                 static_cast<std::size_t>(c)];
  }
  double operator()(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
                 static_cast<std::size_t>(c)];
  }

  double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  const double* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  Matrix extract_rows(const std::vector<int>& indices) const {
    Matrix out(static_cast<int>(indices.size()), cols_);
    for (int i = 0; i < out.rows_; ++i) {
      const int src = indices[static_cast<std::size_t>(i)];
      if (src < 0 || src >= rows_) throw ShapeError("Matrix::extract_rows: index out of range");
      for (int c = 0; c < cols_; ++c) out(i, c) = (*this)(src, c);
    }
    return out;
  }

  void append_row(const double* values) {
    data_.insert(data_.end(), values, values + cols_);
    ++rows_;
  }

  bool operator==(const Matrix&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

}  // namespace fedkd
