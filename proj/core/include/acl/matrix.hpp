#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace acl {

// Dense row-major matrix of doubles. Vectors are stored as 1 x n matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void fill(double v);
  std::string shape_string() const;

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// transpose(a) * b
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
// a * transpose(b)
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& a, double s);
void add_in_place(Matrix& dst, const Matrix& src);
void scale_in_place(Matrix& m, double s);

// Rows of `m` selected by `indices`, in order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);
Matrix column_sums(const Matrix& m);

bool all_finite(const Matrix& m);
// Throws NumericError naming `what` if any entry is NaN or infinite.
void ensure_finite(const Matrix& m, std::string_view what);

// Throws DimensionError reporting both shapes.
void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, std::string_view what);

}  // namespace acl
