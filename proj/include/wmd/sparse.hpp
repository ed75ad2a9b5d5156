#pragma once

// Core numeric containers shared by every stage of the pipeline.
//
// All containers are plain value types. They are built single-threaded and
// treated as read-only afterwards, so any number of workers may share them.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace wmd {

/// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<const double> values() const noexcept { return data_; }

  /// Changes the shape. Storage capacity is kept, so shrinking and regrowing
  /// up to a previous size never reallocates. Contents are unspecified.
  void reshape(std::size_t rows, std::size_t cols);
  void fill(double value);

  DenseMatrix transposed() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Sorted sparse vector, e.g. a normalized word histogram.
struct SparseVector {
  std::size_t length = 0;
  std::vector<std::size_t> indices;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return indices.size(); }
  std::vector<double> to_dense() const;

  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

/// Compressed sparse rows. Rows are vocabulary words and columns documents
/// when the matrix holds a corpus.
struct CsrMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_idx;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return col_idx.size(); }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Builds a sorted CSR. Duplicate coordinates are summed and entries that
/// end up exactly zero are dropped. Throws StructuralError naming the first
/// out-of-bounds triplet.
CsrMatrix csr_from_triplets(std::span<const Triplet> entries, std::size_t n_rows,
                            std::size_t n_cols);

/// Expands a CSR to triplets in storage order.
std::vector<Triplet> csr_to_triplets(const CsrMatrix& m);

struct CsrViolation {
  enum class Kind {
    shape,
    row_ptr_start,
    row_ptr_order,
    row_ptr_end,
    array_length,
    col_out_of_range,
    col_order,
    negative_value,
  };
  Kind kind;
  std::size_t location;  // row index, or nonzero position for per-entry checks
  std::string message;
};

/// Lists every violated CSR invariant. An empty result means the matrix is
/// valid. Column sums are not checked here.
std::vector<CsrViolation> csr_validate(const CsrMatrix& m);

/// Keeps the listed columns, renumbered 0..cols.size()-1 in the given order.
CsrMatrix csr_select_columns(const CsrMatrix& m, std::span<const std::size_t> cols);

DenseMatrix csr_to_dense(const CsrMatrix& m);

/// Column sums of a CSR, accumulated in storage order.
std::vector<double> csr_column_sums(const CsrMatrix& m);

/// One worker's slice of the nonzeros of a CSR. Slices may begin or end in
/// the middle of a row.
struct NnzPartition {
  std::size_t worker_id = 0;
  std::size_t nnz_begin = 0;
  std::size_t nnz_end = 0;
  /// Row holding nnz_begin; equals the row count for empty trailing slices.
  std::size_t start_row = 0;

  std::size_t size() const noexcept { return nnz_end - nnz_begin; }

  friend bool operator==(const NnzPartition&, const NnzPartition&) = default;
};

/// Splits [0, nnz) into `workers` contiguous slices whose sizes differ by at
/// most one, locating each slice's first row with a binary search over
/// `row_ptr`. The first nnz % workers slices carry the extra element.
std::vector<NnzPartition> nnz_partition(std::span<const std::size_t> row_ptr,
                                        std::size_t nnz, std::size_t workers);

}  // namespace wmd
