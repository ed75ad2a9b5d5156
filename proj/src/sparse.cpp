#include "wmd/sparse.hpp"

#include <algorithm>
#include <sstream>

#include "wmd/error.hpp"

namespace wmd {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ArgumentError("dense matrix data length " + std::to_string(data_.size()) +
                        " does not match shape " + std::to_string(rows_) + "x" +
                        std::to_string(cols_));
  }
}

void DenseMatrix::reshape(std::size_t rows, std::size_t cols) {
  rows_ = rows;
  cols_ = cols;
  data_.resize(rows * cols);
}

void DenseMatrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

std::vector<double> SparseVector::to_dense() const {
  std::vector<double> out(length, 0.0);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= length) {
      throw ArgumentError("sparse vector index " + std::to_string(indices[k]) +
                          " outside length " + std::to_string(length));
    }
    out[indices[k]] = values[k];
  }
  return out;
}

CsrMatrix csr_from_triplets(std::span<const Triplet> entries, std::size_t n_rows,
                            std::size_t n_cols) {
  for (const Triplet& t : entries) {
    if (t.row >= n_rows || t.col >= n_cols) {
      std::ostringstream msg;
      msg << "triplet (" << t.row << ", " << t.col << ", " << t.value
          << ") out of bounds for " << n_rows << "x" << n_cols << " matrix";
      throw StructuralError(msg.str());
    }
  }

  // Stable sort keeps duplicates in input order, but a shuffled input may
  // still sum duplicates in a different order. Sorting by value as a final
  // key makes the summation order a function of the multiset alone.
  std::vector<Triplet> sorted(entries.begin(), entries.end());
  std::sort(sorted.begin(), sorted.end(), [](const Triplet& a, const Triplet& b) {
    if (a.row != b.row) return a.row < b.row;
    if (a.col != b.col) return a.col < b.col;
    return a.value < b.value;
  });

  CsrMatrix m;
  m.n_rows = n_rows;
  m.n_cols = n_cols;
  m.row_ptr.assign(n_rows + 1, 0);
  m.col_idx.reserve(sorted.size());
  m.values.reserve(sorted.size());

  std::size_t k = 0;
  while (k < sorted.size()) {
    const std::size_t row = sorted[k].row;
    const std::size_t col = sorted[k].col;
    double sum = 0.0;
    while (k < sorted.size() && sorted[k].row == row && sorted[k].col == col) {
      sum += sorted[k].value;
      ++k;
    }
    if (sum != 0.0) {
      m.col_idx.push_back(col);
      m.values.push_back(sum);
      ++m.row_ptr[row + 1];
    }
  }
  for (std::size_t r = 0; r < n_rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
  return m;
}

std::vector<Triplet> csr_to_triplets(const CsrMatrix& m) {
  std::vector<Triplet> out;
  out.reserve(m.nnz());
  for (std::size_t r = 0; r < m.n_rows; ++r) {
    for (std::size_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
      out.push_back({r, m.col_idx[k], m.values[k]});
    }
  }
  return out;
}

std::vector<CsrViolation> csr_validate(const CsrMatrix& m) {
  using Kind = CsrViolation::Kind;
  std::vector<CsrViolation> out;
  auto add = [&out](Kind kind, std::size_t loc, std::string msg) {
    out.push_back({kind, loc, std::move(msg)});
  };

  if (m.row_ptr.size() != m.n_rows + 1) {
    add(Kind::shape, 0,
        "row_ptr length " + std::to_string(m.row_ptr.size()) + " != n_rows+1 (" +
            std::to_string(m.n_rows + 1) + ")");
    // Nothing else can be located reliably without a well-formed row_ptr.
    return out;
  }
  if (m.values.size() != m.col_idx.size()) {
    add(Kind::array_length, 0,
        "values length " + std::to_string(m.values.size()) + " != col_idx length " +
            std::to_string(m.col_idx.size()));
  }
  if (m.row_ptr.front() != 0) {
    add(Kind::row_ptr_start, 0, "row_ptr[0] is " + std::to_string(m.row_ptr.front()) + ", not 0");
  }
  if (m.row_ptr.back() != m.nnz()) {
    add(Kind::row_ptr_end, m.n_rows,
        "row_ptr[n_rows] is " + std::to_string(m.row_ptr.back()) + " but nnz is " +
            std::to_string(m.nnz()));
  }

  const std::size_t nnz = m.nnz();
  for (std::size_t r = 0; r < m.n_rows; ++r) {
    const std::size_t begin = m.row_ptr[r];
    const std::size_t end = m.row_ptr[r + 1];
    if (begin > end) {
      add(Kind::row_ptr_order, r, "row_ptr non-decreasing at row " + std::to_string(r));
      continue;
    }
    for (std::size_t k = begin; k < std::min(end, nnz); ++k) {
      if (m.col_idx[k] >= m.n_cols) {
        add(Kind::col_out_of_range, k,
            "col_idx " + std::to_string(m.col_idx[k]) + " out of range at row " +
                std::to_string(r) + ", position " + std::to_string(k));
      }
      if (k > begin && m.col_idx[k] <= m.col_idx[k - 1]) {
        add(Kind::col_order, k,
            "col_idx strictly increasing violated at row " + std::to_string(r) +
                ", position " + std::to_string(k));
      }
    }
  }
  for (std::size_t k = 0; k < m.values.size(); ++k) {
    if (!(m.values[k] >= 0.0)) {
      add(Kind::negative_value, k, "value at position " + std::to_string(k) + " is negative or NaN");
    }
  }
  return out;
}

CsrMatrix csr_select_columns(const CsrMatrix& m, std::span<const std::size_t> cols) {
  constexpr std::size_t absent = static_cast<std::size_t>(-1);
  std::vector<std::size_t> remap(m.n_cols, absent);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (cols[k] >= m.n_cols) {
      throw ArgumentError("column " + std::to_string(cols[k]) + " out of range");
    }
    if (remap[cols[k]] != absent) {
      throw ArgumentError("column " + std::to_string(cols[k]) + " selected twice");
    }
    remap[cols[k]] = k;
  }
  std::vector<Triplet> kept;
  for (std::size_t r = 0; r < m.n_rows; ++r) {
    for (std::size_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
      if (remap[m.col_idx[k]] != absent) kept.push_back({r, remap[m.col_idx[k]], m.values[k]});
    }
  }
  return csr_from_triplets(kept, m.n_rows, cols.size());
}

DenseMatrix csr_to_dense(const CsrMatrix& m) {
  DenseMatrix d(m.n_rows, m.n_cols);
  for (std::size_t r = 0; r < m.n_rows; ++r) {
    for (std::size_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) d(r, m.col_idx[k]) = m.values[k];
  }
  return d;
}

std::vector<double> csr_column_sums(const CsrMatrix& m) {
  std::vector<double> sums(m.n_cols, 0.0);
  for (std::size_t k = 0; k < m.nnz(); ++k) sums[m.col_idx[k]] += m.values[k];
  return sums;
}

std::vector<NnzPartition> nnz_partition(std::span<const std::size_t> row_ptr,
                                        std::size_t nnz, std::size_t workers) {
  if (workers == 0) throw ArgumentError("nnz_partition needs at least one worker");
  if (row_ptr.empty() || row_ptr.front() != 0 || row_ptr.back() != nnz) {
    throw ArgumentError("row_ptr does not describe " + std::to_string(nnz) + " nonzeros");
  }
  const std::size_t n_rows = row_ptr.size() - 1;
  const std::size_t base = nnz / workers;
  const std::size_t extra = nnz % workers;

  std::vector<NnzPartition> parts(workers);
  std::size_t offset = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    NnzPartition& p = parts[w];
    p.worker_id = w;
    p.nnz_begin = offset;
    p.nnz_end = offset + base + (w < extra ? 1 : 0);
    offset = p.nnz_end;
    if (p.nnz_begin == nnz) {
      p.start_row = n_rows;
    } else {
      // Last row whose start is <= nnz_begin; empty rows share a start with
      // the following row, so upper_bound skips past them.
      const auto it = std::upper_bound(row_ptr.begin(), row_ptr.end(), p.nnz_begin);
      p.start_row = static_cast<std::size_t>(it - row_ptr.begin()) - 1;
    }
  }
  return parts;
}

}  // namespace wmd
