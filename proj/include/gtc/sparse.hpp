#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gtc/tensor.hpp"

namespace gtc {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

enum class Duplicates { sum, keep_one };

/// Compressed sparse row matrix of doubles.
///
/// Column indices are sorted and unique within each row and every stored
/// value is finite. Instances are immutable after construction.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols);
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
               std::vector<std::size_t> col_idx, std::vector<double> values);

  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries,
                                    Duplicates dup = Duplicates::sum);
  static SparseMatrix from_dense(const Tensor& dense);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return col_idx_.size(); }
  bool square() const { return rows_ == cols_; }

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::size_t>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }

  std::span<const std::size_t> row_cols(std::size_t r) const {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::size_t row_nnz(std::size_t r) const { return row_ptr_[r + 1] - row_ptr_[r]; }

  // Binary search within the row; 0 when absent.
  double get(std::size_t r, std::size_t c) const;
  bool contains(std::size_t r, std::size_t c) const;

  Tensor to_dense() const;
  SparseMatrix transpose() const;
  // Same pattern with every value set to 1.
  SparseMatrix binarized() const;
  std::vector<double> row_sums() const;
  bool is_symmetric(double tol = 0.0) const;

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  void validate() const;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

// Sparse-sparse product (row-wise Gustavson accumulation). Explicit zeros
// produced by cancellation are dropped.
SparseMatrix multiply(const SparseMatrix& a, const SparseMatrix& b);
SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b);

// Sparse-dense product A * X where X is (A.cols x d).
Tensor multiply(const SparseMatrix& a, const Tensor& x);
// y (A.rows x d) += A * x (A.cols x d); raw row-major buffers.
void multiply_accumulate(const SparseMatrix& a, const double* x, std::size_t d, double* y);
// y (A.cols x d) += A^T * x (A.rows x d).
void multiply_transpose_accumulate(const SparseMatrix& a, const double* x, std::size_t d, double* y);

// D^{-1/2} A D^{-1/2} with d_i the row sums of A; zero-degree rows and
// columns come out all zero.
SparseMatrix normalize_sym(const SparseMatrix& a);
// D^{-1} A (mean aggregation over the row); empty rows stay empty.
SparseMatrix normalize_rows(const SparseMatrix& a);
// (D+I)^{-1/2} (A+I) (D+I)^{-1/2}, the self-looped GCN propagation matrix.
SparseMatrix gcn_normalize(const SparseMatrix& a);

// Running count of scalar multiply-adds performed by the sparse-dense
// kernels in this process. Used to measure tokenization cost.
std::uint64_t sparse_dense_macs();
void reset_sparse_dense_macs();

}  // namespace gtc
