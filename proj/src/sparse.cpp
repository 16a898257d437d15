#include "gtc/sparse.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "gtc/error.hpp"
#include "gtc/parallel.hpp"

namespace gtc {
namespace {

std::atomic<std::uint64_t> g_macs{0};

std::string dims(std::size_t r, std::size_t c) { return std::to_string(r) + "x" + std::to_string(c); }

}  // namespace

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                           std::vector<std::size_t> col_idx, std::vector<double> values)
    : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)), values_(std::move(values)) {
  validate();
}

void SparseMatrix::validate() const {
  if (row_ptr_.size() != rows_ + 1) throw ShapeError("csr: row pointer length " + std::to_string(row_ptr_.size()) + " for " + std::to_string(rows_) + " rows");
  if (row_ptr_.front() != 0 || row_ptr_.back() != col_idx_.size()) throw ShapeError("csr: row pointers do not span the index array");
  if (col_idx_.size() != values_.size()) throw ShapeError("csr: index/value length mismatch");
  for (std::size_t r = 0; r < rows_; ++r) {
    if (row_ptr_[r] > row_ptr_[r + 1]) throw ShapeError("csr: row pointers decrease at row " + std::to_string(r));
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      if (col_idx_[p] >= cols_) throw ShapeError("csr: column " + std::to_string(col_idx_[p]) + " out of range in row " + std::to_string(r));
      if (p > row_ptr_[r] && col_idx_[p] <= col_idx_[p - 1]) throw ShapeError("csr: unsorted or duplicate column in row " + std::to_string(r));
      if (!std::isfinite(values_[p])) throw NumericError("csr: non-finite value in row " + std::to_string(r));
    }
  }
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries, Duplicates dup) {
  for (const auto& t : entries) {
    if (t.row >= rows || t.col >= cols) {
      throw ShapeError("csr: entry (" + std::to_string(t.row) + "," + std::to_string(t.col) + ") outside " + dims(rows, cols));
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> row_ptr(rows + 1, 0);
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
  col_idx.reserve(entries.size());
  values.reserve(entries.size());
  std::size_t prev_row = rows;
  for (const auto& t : entries) {
    if (!col_idx.empty() && prev_row == t.row && col_idx.back() == t.col) {
      if (dup == Duplicates::sum) values.back() += t.value;
      continue;
    }
    col_idx.push_back(t.col);
    values.push_back(t.value);
    ++row_ptr[t.row + 1];
    prev_row = t.row;
  }
  for (std::size_t r = 0; r < rows; ++r) row_ptr[r + 1] += row_ptr[r];
  return SparseMatrix(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
}

SparseMatrix SparseMatrix::from_dense(const Tensor& dense) {
  if (dense.rank() != 2) throw ShapeError("csr: from_dense needs a matrix, got " + shape_str(dense.shape()));
  std::vector<Triplet> entries;
  for (std::size_t r = 0; r < dense.rows(); ++r) {
    for (std::size_t c = 0; c < dense.cols(); ++c) {
      if (dense.at(r, c) != 0.0) entries.push_back({r, c, dense.at(r, c)});
    }
  }
  return from_triplets(dense.rows(), dense.cols(), std::move(entries));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<std::size_t> row_ptr(n + 1), col_idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    row_ptr[i + 1] = i + 1;
    col_idx[i] = i;
  }
  return SparseMatrix(n, n, std::move(row_ptr), std::move(col_idx), std::vector<double>(n, 1.0));
}

double SparseMatrix::get(std::size_t r, std::size_t c) const {
  const auto cols = row_cols(r);
  const auto it = std::lower_bound(cols.begin(), cols.end(), c);
  if (it == cols.end() || *it != c) return 0.0;
  return values_[row_ptr_[r] + static_cast<std::size_t>(it - cols.begin())];
}

bool SparseMatrix::contains(std::size_t r, std::size_t c) const {
  const auto cols = row_cols(r);
  return std::binary_search(cols.begin(), cols.end(), c);
}

Tensor SparseMatrix::to_dense() const {
  Tensor out({rows_, cols_});
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) out.at(r, col_idx_[p]) = values_[p];
  }
  return out;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<std::size_t> row_ptr(cols_ + 1, 0);
  for (auto c : col_idx_) ++row_ptr[c + 1];
  for (std::size_t c = 0; c < cols_; ++c) row_ptr[c + 1] += row_ptr[c];
  std::vector<std::size_t> col_idx(nnz());
  std::vector<double> values(nnz());
  std::vector<std::size_t> next(row_ptr.begin(), row_ptr.end() - 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      const std::size_t dst = next[col_idx_[p]]++;
      col_idx[dst] = r;
      values[dst] = values_[p];
    }
  }
  return SparseMatrix(cols_, rows_, std::move(row_ptr), std::move(col_idx), std::move(values));
}

SparseMatrix SparseMatrix::binarized() const {
  return SparseMatrix(rows_, cols_, row_ptr_, col_idx_, std::vector<double>(nnz(), 1.0));
}

std::vector<double> SparseMatrix::row_sums() const {
  std::vector<double> sums(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) sums[r] += values_[p];
  }
  return sums;
}

bool SparseMatrix::is_symmetric(double tol) const {
  if (!square()) return false;
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      if (std::abs(values_[p] - get(col_idx_[p], r)) > tol) return false;
    }
  }
  // Entries present only in the transpose position are caught when scanning
  // that row, because get() returns 0 for the missing mirror.
  return true;
}

SparseMatrix multiply(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("spgemm: " + dims(a.rows(), a.cols()) + " times " + dims(b.rows(), b.cols()));
  }
  std::vector<std::size_t> row_ptr(a.rows() + 1, 0);
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
  std::vector<double> acc(b.cols(), 0.0);
  std::vector<char> used(b.cols(), 0);
  std::vector<std::size_t> touched;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    touched.clear();
    const auto acols = a.row_cols(r);
    const auto avals = a.row_values(r);
    for (std::size_t p = 0; p < acols.size(); ++p) {
      const std::size_t k = acols[p];
      const auto bcols = b.row_cols(k);
      const auto bvals = b.row_values(k);
      for (std::size_t q = 0; q < bcols.size(); ++q) {
        const std::size_t c = bcols[q];
        if (!used[c]) {
          used[c] = 1;
          touched.push_back(c);
        }
        acc[c] += avals[p] * bvals[q];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (auto c : touched) {
      if (acc[c] != 0.0) {
        col_idx.push_back(c);
        values.push_back(acc[c]);
      }
      acc[c] = 0.0;
      used[c] = 0;
    }
    row_ptr[r + 1] = col_idx.size();
  }
  return SparseMatrix(a.rows(), b.cols(), std::move(row_ptr), std::move(col_idx), std::move(values));
}

SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("sparse add: " + dims(a.rows(), a.cols()) + " plus " + dims(b.rows(), b.cols()));
  }
  std::vector<std::size_t> row_ptr(a.rows() + 1, 0);
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto ac = a.row_cols(r), bc = b.row_cols(r);
    const auto av = a.row_values(r), bv = b.row_values(r);
    std::size_t i = 0, j = 0;
    while (i < ac.size() || j < bc.size()) {
      std::size_t c;
      double v;
      if (j == bc.size() || (i < ac.size() && ac[i] < bc[j])) {
        c = ac[i];
        v = av[i++];
      } else if (i == ac.size() || bc[j] < ac[i]) {
        c = bc[j];
        v = bv[j++];
      } else {
        c = ac[i];
        v = av[i++] + bv[j++];
      }
      if (v != 0.0) {
        col_idx.push_back(c);
        values.push_back(v);
      }
    }
    row_ptr[r + 1] = col_idx.size();
  }
  return SparseMatrix(a.rows(), a.cols(), std::move(row_ptr), std::move(col_idx), std::move(values));
}

void multiply_accumulate(const SparseMatrix& a, const double* x, std::size_t d, double* y) {
  const auto& rp = a.row_ptr();
  const auto& ci = a.col_idx();
  const auto& vv = a.values();
  parallel_for(0, a.rows(), 64, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      double* out = y + r * d;
      for (std::size_t p = rp[r]; p < rp[r + 1]; ++p) {
        const double w = vv[p];
        const double* in = x + ci[p] * d;
        for (std::size_t k = 0; k < d; ++k) out[k] += w * in[k];
      }
    }
  });
  g_macs.fetch_add(static_cast<std::uint64_t>(a.nnz()) * d, std::memory_order_relaxed);
}

void multiply_transpose_accumulate(const SparseMatrix& a, const double* x, std::size_t d, double* y) {
  const auto& rp = a.row_ptr();
  const auto& ci = a.col_idx();
  const auto& vv = a.values();
  // Scatter form; sequential so the accumulation order is fixed.
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* in = x + r * d;
    for (std::size_t p = rp[r]; p < rp[r + 1]; ++p) {
      const double w = vv[p];
      double* out = y + ci[p] * d;
      for (std::size_t k = 0; k < d; ++k) out[k] += w * in[k];
    }
  }
  g_macs.fetch_add(static_cast<std::uint64_t>(a.nnz()) * d, std::memory_order_relaxed);
}

Tensor multiply(const SparseMatrix& a, const Tensor& x) {
  if (x.rank() != 2 || x.rows() != a.cols()) {
    throw ShapeError("spmm: " + dims(a.rows(), a.cols()) + " times " + shape_str(x.shape()));
  }
  Tensor y({a.rows(), x.cols()});
  multiply_accumulate(a, x.data(), x.cols(), y.data());
  return y;
}

SparseMatrix normalize_sym(const SparseMatrix& a) {
  if (!a.square()) throw ShapeError("normalize_sym: matrix is " + dims(a.rows(), a.cols()) + ", expected square");
  const auto deg = a.row_sums();
  for (std::size_t i = 0; i < deg.size(); ++i) {
    if (deg[i] < 0.0) throw ArgumentError("normalize_sym: negative degree at row " + std::to_string(i));
  }
  std::vector<double> values(a.values());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t p = a.row_ptr()[r]; p < a.row_ptr()[r + 1]; ++p) {
      const double dd = deg[r] * deg[a.col_idx()[p]];
      values[p] = dd > 0.0 ? values[p] / std::sqrt(dd) : 0.0;
    }
  }
  return SparseMatrix(a.rows(), a.cols(), a.row_ptr(), a.col_idx(), std::move(values));
}

SparseMatrix normalize_rows(const SparseMatrix& a) {
  const auto deg = a.row_sums();
  std::vector<double> values(a.values());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double s = deg[r] != 0.0 ? 1.0 / deg[r] : 0.0;
    for (std::size_t p = a.row_ptr()[r]; p < a.row_ptr()[r + 1]; ++p) values[p] *= s;
  }
  return SparseMatrix(a.rows(), a.cols(), a.row_ptr(), a.col_idx(), std::move(values));
}

SparseMatrix gcn_normalize(const SparseMatrix& a) {
  if (!a.square()) throw ShapeError("gcn_normalize: matrix is " + dims(a.rows(), a.cols()) + ", expected square");
  return normalize_sym(add(a, SparseMatrix::identity(a.rows())));
}

std::uint64_t sparse_dense_macs() { return g_macs.load(); }
void reset_sparse_dense_macs() { g_macs.store(0); }

}  // namespace gtc
