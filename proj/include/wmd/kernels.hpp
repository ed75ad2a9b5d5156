#pragma once

// Sparse Sinkhorn kernels.
//
// Layout conventions:
//   * Vocabulary-indexed matrices (M_T, K_T, K_over_r_T, KM_T) are V x v_r,
//     so row i holds word i's costs against every query word contiguously.
//   * The public kernels take iterates u and x as v_r x N. Each one also has
//     a *_doc_major form taking N x v_r iterates, which is what the solver
//     keeps between iterations; with that layout, the per-nonzero dot product
//     and scatter both run at unit stride. The public forms transpose
//     into the doc-major form and back, which is exact.
//
// Every kernel walks c's nonzeros in one of two ways:
//   * Accumulation::atomic: nonzeros are split evenly across workers (rows
//     may straddle workers) and colliding column updates use atomic adds.
//     Results are within rounding of the serial result.
//   * Accumulation::deterministic: columns are split across workers, and
//     each column's nonzeros are visited in increasing row order. Each
//     output column is then accumulated in the same order as a serial CSR
//     sweep, so results are bitwise identical for every worker count.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "wmd/parallel.hpp"
#include "wmd/sparse.hpp"

namespace wmd {

struct SinkhornMatrices {
  DenseMatrix M_T;         // V x v_r word-to-query-word distances
  DenseMatrix K_T;         // exp(-lambda * M_T)
  DenseMatrix K_over_r_T;  // K_T[i][a] / r[a]
  DenseMatrix KM_T;        // K_T[i][a] * M_T[i][a]
  double lambda = 0.0;

  std::size_t query_words() const noexcept { return M_T.cols(); }
};

struct QuerySelection {
  std::vector<std::size_t> sel;  // word ids with positive weight, increasing
  std::vector<double> r;         // matching weights
};

/// Keeps the positive entries of a dense histogram. Throws EmptyInputError
/// for an all-zero histogram and ArgumentError for a negative entry.
QuerySelection select_nonzero(std::span<const double> r_full);

/// V x |sel| matrix of Euclidean distances from every vocabulary word to
/// each selected word. Only these |sel| columns of the full V x V distance
/// matrix are ever formed.
DenseMatrix euclidean_rows(const DenseMatrix& vecs, std::span<const std::size_t> sel,
                           std::size_t workers = 1);
void euclidean_rows_into(const DenseMatrix& vecs, std::span<const std::size_t> sel,
                         DenseMatrix& M_T, std::size_t workers = 1);

/// Elementwise construction of K, K/r and K*M from M_T.
SinkhornMatrices precompute(DenseMatrix M_T, std::span<const double> r, double lambda,
                            std::size_t workers = 1);
/// Same, reusing the storage already in `mats`; mats.M_T must be filled.
void precompute_into(SinkhornMatrices& mats, std::span<const double> r, double lambda,
                     std::size_t workers = 1);

enum class Accumulation { atomic, deterministic };

/// Multiply-accumulate tally. Kernels add to it only when a context points
/// at one.
struct WorkCounter {
  std::atomic<std::uint64_t> macs{0};
};

/// c's nonzeros grouped by column, rows increasing within a column.
struct ColumnView {
  std::vector<std::size_t> col_ptr;  // n_cols + 1
  std::vector<std::size_t> row;      // row of each entry
  std::vector<std::size_t> pos;      // position of the entry in c's CSR arrays
  std::vector<IndexRange> ranges;    // column range owned by each worker
};

/// How a kernel call splits its work. Built once per (c, workers, mode) and
/// reused for every iteration; it is only valid with the matrix it was built
/// from.
struct KernelContext {
  std::size_t workers = 1;
  Accumulation accumulation = Accumulation::atomic;
  std::vector<NnzPartition> partitions;
  ColumnView columns;  // filled for Accumulation::deterministic only
  WorkCounter* counter = nullptr;

  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::size_t nnz = 0;
};

/// Validates c (throws StructuralError on the first violation) and builds
/// the work split.
KernelContext make_kernel_context(const CsrMatrix& c, std::size_t workers,
                                  Accumulation accumulation = Accumulation::atomic);

// Standalone SDDMM: w(i,j) = c(i,j) / sum_a K_T[i][a] * u[a][j], evaluated
// only at c's nonzeros. Returned values align with c.col_idx. A zero
// denominator throws NumericalError naming (i, j).
std::vector<double> sddmm(const CsrMatrix& c, const DenseMatrix& K_T, const DenseMatrix& u,
                          const KernelContext& ctx);
void sddmm_doc_major(const CsrMatrix& c, const DenseMatrix& K_T, const DenseMatrix& u_docs,
                     std::span<double> w, const KernelContext& ctx);

// Standalone SpMM: x[a][j] = sum_i K_over_r_T[i][a] * w(i,j) over c's pattern.
DenseMatrix spmm(const CsrMatrix& c, std::span<const double> w, const DenseMatrix& K_over_r_T,
                 const KernelContext& ctx);
/// Adds into x_docs (N x v_r), which the caller zeroes.
void spmm_doc_major(const CsrMatrix& c, std::span<const double> w, const DenseMatrix& K_over_r_T,
                    DenseMatrix& x_docs, const KernelContext& ctx);

/// One Sinkhorn update, SDDMM fused with SpMM. For every nonzero (i,j) the
/// SDDMM value is computed and immediately scattered into x column j
/// without being stored. x_out must be zero on entry.
void fused_iteration(const CsrMatrix& c, const SinkhornMatrices& mats, const DenseMatrix& u,
                     DenseMatrix& x_out, const KernelContext& ctx);
void fused_iteration_doc_major(const CsrMatrix& c, const SinkhornMatrices& mats,
                               const DenseMatrix& u_docs, DenseMatrix& x_docs,
                               const KernelContext& ctx);

/// Final distance evaluation, fused. Per nonzero: v = c(i,j) / (K_T[i] . u_j),
/// then wmd[j] += v * (KM_T[i] . u_j).
std::vector<double> fused_final(const CsrMatrix& c, const SinkhornMatrices& mats,
                                const DenseMatrix& u, const KernelContext& ctx);
void fused_final_doc_major(const CsrMatrix& c, const SinkhornMatrices& mats,
                           const DenseMatrix& u_docs, std::span<double> wmd,
                           const KernelContext& ctx);

/// Unfused counterpart of the final step's second half: given v on c's
/// pattern, wmd[j] = sum_i v(i,j) * (KM_T[i] . u_j).
std::vector<double> weighted_cost(const CsrMatrix& c, std::span<const double> v,
                                  const DenseMatrix& KM_T, const DenseMatrix& u,
                                  const KernelContext& ctx);
void weighted_cost_doc_major(const CsrMatrix& c, std::span<const double> v,
                             const DenseMatrix& KM_T, const DenseMatrix& u_docs,
                             std::span<double> wmd, const KernelContext& ctx);

}  // namespace wmd
