#include "gatae/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gatae/error.hpp"

namespace gatae {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 14;

void check_matmul(const Matrix& a, const Matrix& b, std::size_t inner_a, std::size_t inner_b,
                  const char* op) {
  if (inner_a != inner_b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                     b.shape_string());
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                     gatae::shape_string(rows_, cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  Matrix m;
  for (const auto& r : rows) m.append_row(r);
  return m;
}

Vector Matrix::row_vector(std::size_t r) const {
  auto s = row(r);
  return {s.begin(), s.end()};
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) {
      throw ShapeError("row index " + std::to_string(indices[i]) + " out of range for " +
                       shape_string());
    }
    std::copy_n(row(indices[i]).begin(), cols_, out.row(i).begin());
  }
  return out;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) {
    cols_ = values.size();
  } else if (values.size() != cols_) {
    throw ShapeError("append_row: row of length " + std::to_string(values.size()) +
                     " into " + shape_string());
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

std::string Matrix::shape_string() const { return gatae::shape_string(rows_, cols_); }

std::string shape_string(std::size_t rows, std::size_t cols) {
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_matmul(a, b, a.cols(), b.rows(), "matmul");
  const std::size_t n = a.rows(), m = b.cols(), inner = a.cols();
  Matrix c(n, m);
  const bool par = n * m * inner >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i) {
    auto out = c.row(i);
    auto ai = a.row(i);
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = ai[k];
      auto bk = b.row(k);
      for (std::size_t j = 0; j < m; ++j) out[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  check_matmul(a, b, a.cols(), b.cols(), "matmul_transposed");
  const std::size_t n = a.rows(), m = b.rows();
  Matrix c(n, m);
  const bool par = n * m * a.cols() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < m; ++j) c(i, j) = dot(ai, b.row(j));
  }
  return c;
}

Matrix transposed_matmul(const Matrix& a, const Matrix& b) {
  check_matmul(a, b, a.rows(), b.rows(), "transposed_matmul");
  const std::size_t n = a.cols(), m = b.cols(), inner = a.rows();
  Matrix c(n, m);
  const bool par = n * m * inner >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < inner; ++k) {
      const double aki = a(k, i);
      auto bk = b.row(k);
      for (std::size_t j = 0; j < m; ++j) out[j] += aki * bk[j];
    }
  }
  return c;
}

double dot(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ShapeError("dot: lengths " + std::to_string(u.size()) + " and " +
                     std::to_string(v.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ShapeError("cosine_similarity: dims " + std::to_string(u.size()) + " and " +
                     std::to_string(v.size()));
  }
  const double nu = l2_norm(u), nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) throw ZeroVectorError("cosine_similarity: zero-norm vector");
  return dot(u, v) / (nu * nv);
}

namespace {

Vector row_norms(const Matrix& x) {
  Vector norms(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    norms[i] = l2_norm(x.row(i));
    if (norms[i] == 0.0) {
      throw ZeroVectorError("cosine_similarity_matrix: row " + std::to_string(i) +
                            " has zero norm");
    }
  }
  return norms;
}

}  // namespace

Matrix cosine_similarity_matrix(const Matrix& x) {
  const Vector norms = row_norms(x);
  const std::size_t n = x.rows();
  Matrix s(n, n);
  const bool par = n * n * x.cols() >= 2 * kParallelWork;
  // Dynamic schedule: row i has n - i entries in the upper triangle.
#pragma omp parallel for schedule(dynamic, 8) if (par)
  for (std::size_t i = 0; i < n; ++i) {
    s(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = dot(x.row(i), x.row(j)) / (norms[i] * norms[j]);
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

Vector cosine_similarity_to(const Matrix& x, std::span<const double> q) {
  if (q.size() != x.cols()) {
    throw ShapeError("cosine_similarity_to: query dim " + std::to_string(q.size()) +
                     " vs matrix " + x.shape_string());
  }
  Vector out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = cosine_similarity(x.row(i), q);
  return out;
}

Vector softmax(std::span<const double> scores) {
  if (scores.empty()) throw ArgumentError("softmax: empty input");
  const double mx = *std::max_element(scores.begin(), scores.end());
  Vector out(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

double mse(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("mse: shapes " + a.shape_string() + " and " + b.shape_string());
  }
  if (a.empty()) throw ShapeError("mse: empty matrices");
  double s = 0.0;
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    s += d * d;
  }
  return s / static_cast<double>(da.size());
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void require_finite(std::span<const double> values, const std::string& what) {
  if (!all_finite(values)) throw NumericalError(what + ": non-finite value");
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_matmul(a, b, a.cols(), b.rows(), "serial::matmul");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

Matrix cosine_similarity_matrix(const Matrix& x) {
  const Vector norms = row_norms(x);
  const std::size_t n = x.rows();
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    s(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      s(i, j) = s(j, i) = dot(x.row(i), x.row(j)) / (norms[i] * norms[j]);
    }
  }
  return s;
}

}  // namespace serial

}  // namespace gatae
