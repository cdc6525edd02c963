#include "acl/matrix.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "acl/errors.hpp"

namespace acl {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError(fmt::format("matrix data has {} values, expected {}x{}", data_.size(),
                                     rows_, cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) {
      throw DimensionError("ragged initializer list for matrix");
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

void Matrix::fill(double v) {
  for (auto& x : data_) x = v;
}

std::string Matrix::shape_string() const { return fmt::format("{}x{}", rows_, cols_); }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError(
        fmt::format("matmul shape mismatch: {} * {}", a.shape_string(), b.shape_string()));
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.data() + i * n;
    const double* ar = a.data() + i * k;
    for (std::size_t t = 0; t < k; ++t) {
      const double ait = ar[t];
      if (ait == 0.0) continue;
      const double* br = b.data() + t * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += ait * br[j];
    }
  }
  return out;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError(
        fmt::format("matmul_at_b shape mismatch: {}^T * {}", a.shape_string(), b.shape_string()));
  }
  Matrix out(a.cols(), b.cols());
  const std::size_t r_all = a.rows(), m = a.cols(), n = b.cols();
  for (std::size_t r = 0; r < r_all; ++r) {
    const double* ar = a.data() + r * m;
    const double* br = b.data() + r * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double ari = ar[i];
      if (ari == 0.0) continue;
      double* o = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += ari * br[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError(
        fmt::format("matmul_a_bt shape mismatch: {} * {}^T", a.shape_string(), b.shape_string()));
  }
  // The row-times-row dot product form does not vectorize without
  // reassociation; the explicit transpose keeps matmul's streaming loop.
  return matmul(a, transpose(b));
}

namespace {
void require_same_shape(const Matrix& a, const Matrix& b, std::string_view op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(
        fmt::format("{} shape mismatch: {} vs {}", op, a.shape_string(), b.shape_string()));
  }
}
}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  add_in_place(out, b);
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return out;
}

Matrix scaled(const Matrix& a, double s) {
  Matrix out = a;
  scale_in_place(out, s);
  return out;
}

void add_in_place(Matrix& dst, const Matrix& src) {
  require_same_shape(dst, src, "add");
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void scale_in_place(Matrix& m, double s) {
  for (auto& x : m.values()) x *= s;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), m.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= m.rows()) {
      throw DimensionError(
          fmt::format("row index {} out of range for {}", indices[i], m.shape_string()));
    }
    auto src = m.row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix column_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) out(0, c) += row[c];
  }
  return out;
}

bool all_finite(const Matrix& m) {
  for (double x : m.values()) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void ensure_finite(const Matrix& m, std::string_view what) {
  if (!all_finite(m)) {
    throw NumericError(fmt::format("non-finite value in {}", what));
  }
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, std::string_view what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(fmt::format("{}: expected {}x{}, got {}", what, rows, cols,
                                     m.shape_string()));
  }
}

}  // namespace acl
