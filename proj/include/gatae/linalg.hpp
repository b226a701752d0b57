#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gatae {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<Vector>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  Vector row_vector(std::size_t r) const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  // Rows selected by index, in the given order.
  Matrix select_rows(std::span<const std::size_t> indices) const;
  Matrix transposed() const;
  // Appends one row; cols must match (or the matrix is empty).
  void append_row(std::span<const double> values);

  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_string(std::size_t rows, std::size_t cols);

// a · b. Rows of the result are computed in parallel; each entry is a
// sequential dot product, so the result does not depend on thread count.
Matrix matmul(const Matrix& a, const Matrix& b);
// a · bᵀ without materializing the transpose.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
// aᵀ · b.
Matrix transposed_matmul(const Matrix& a, const Matrix& b);

double dot(std::span<const double> u, std::span<const double> v);
double l2_norm(std::span<const double> v);

double cosine_similarity(std::span<const double> u, std::span<const double> v);
// Pairwise cosine similarity of rows. Upper triangle computed once and mirrored.
Matrix cosine_similarity_matrix(const Matrix& x);
// Cosine similarity of every row of x against q.
Vector cosine_similarity_to(const Matrix& x, std::span<const double> q);

// Max-shifted softmax.
Vector softmax(std::span<const double> scores);

inline double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }
inline double relu(double x) { return leaky_relu(x, 0.0); }

double mse(const Matrix& a, const Matrix& b);

bool all_finite(std::span<const double> values);
// Throws NumericalError naming `what` when any entry is NaN/Inf.
void require_finite(std::span<const double> values, const std::string& what);

// Single-threaded reference kernels. Kept for tests and benchmarks; results
// are bit-identical to the parallel versions above.
namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix cosine_similarity_matrix(const Matrix& x);
}  // namespace serial

}  // namespace gatae
