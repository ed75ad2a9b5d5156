#pragma once

// Sinkhorn-Knopp distance of one query document against every column of a
// corpus matrix.

#include <cstddef>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wmd/kernels.hpp"
#include "wmd/sparse.hpp"

namespace wmd {

struct SolverConfig {
  double lambda = 10.0;
  std::size_t max_iter = 15;
  /// Early exit once max |x_new - x_old| < tol. Unset runs exactly max_iter.
  std::optional<double> tol;
  std::size_t workers = 1;
  bool deterministic = false;

  /// Throws ArgumentError when a field is out of range.
  void validate() const;
};

/// Wall-clock seconds per solver phase.
struct PhaseTimings {
  double select = 0.0;
  double distance = 0.0;
  double precompute = 0.0;
  double init = 0.0;
  double loop = 0.0;
  double final_step = 0.0;
  double total = 0.0;
};

struct SolverResult {
  std::vector<double> wmd;  // one distance per corpus column
  std::size_t iterations_run = 0;
  bool converged = false;  // only ever true when a tolerance was given
  PhaseTimings timings;
  DenseMatrix x;  // final iterate, v_r x N
  std::vector<std::size_t> query_words;
};

enum class KernelVariant {
  fused,    // SDDMM and SpMM in one pass
  unfused,  // standalone SDDMM, materialized values, then SpMM
};

/// Buffers reused across iterations and across queries of a batch.
struct SinkhornWorkspace {
  SinkhornMatrices mats;
  DenseMatrix x_docs;  // N x v_r
  DenseMatrix u_docs;  // N x v_r
  DenseMatrix x_prev;  // N x v_r, used only with a tolerance
  std::vector<double> pattern_values;  // nnz, used only by the unfused variant

  /// Grows every buffer to fit v_r query words against a V x N corpus.
  void reserve(std::size_t vocab, std::size_t query_words, std::size_t docs, std::size_t nnz);
};

/// v_r x N matrix with every entry 1 / v_r.
DenseMatrix init_x(std::size_t query_words, std::size_t n_docs);

/// Elementwise reciprocal. Throws NumericalError on a nonpositive entry.
DenseMatrix update_u(const DenseMatrix& x);
void update_u_into(const DenseMatrix& x, DenseMatrix& u, std::size_t workers = 1);

/// Query given as a dense histogram over the vocabulary.
SolverResult sinkhorn_wmd(std::span<const double> r_full, const CsrMatrix& c,
                          const DenseMatrix& vecs, const SolverConfig& cfg,
                          KernelVariant variant = KernelVariant::fused);

/// Lower-level entry for callers that hold a workspace and a kernel context
/// across calls. The context must match c, cfg.workers and cfg.deterministic.
SolverResult run_sinkhorn(std::span<const double> r_full, const CsrMatrix& c,
                          const DenseMatrix& vecs, const SolverConfig& cfg,
                          KernelVariant variant, SinkhornWorkspace& ws,
                          const KernelContext& ctx);

struct BatchOutcome {
  std::optional<SolverResult> result;
  std::exception_ptr error;  // set when result is empty
  std::string message;

  bool ok() const noexcept { return result.has_value(); }
};

/// Runs every query against c with one shared workspace. A failing query is
/// reported in its own outcome and does not stop the rest of the batch.
std::vector<BatchOutcome> sinkhorn_wmd_batch(std::span<const SparseVector> queries,
                                             const CsrMatrix& c, const DenseMatrix& vecs,
                                             const SolverConfig& cfg,
                                             KernelVariant variant = KernelVariant::fused);

}  // namespace wmd
