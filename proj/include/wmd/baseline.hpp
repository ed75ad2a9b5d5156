#pragma once

// Reference implementations used to check the fused solver.
//
// sinkhorn_wmd_dense is a literal dense translation of the textbook
// algorithm: every product is a full dense matrix multiplication and every
// intermediate is materialized, including the V x N quotient matrix. It is
// meant to be obviously correct and slow.
//
// unfused_sparse_wmd runs the sparse algorithm with standalone SDDMM and
// SpMM kernels and a stored intermediate, i.e. the same math as the fused
// solver without the fusion.

#include <span>
#include <vector>

#include "wmd/solver.hpp"
#include "wmd/sparse.hpp"

namespace wmd {

/// Single-threaded; cfg.workers and cfg.deterministic are ignored. Honors
/// cfg.max_iter and cfg.tol like the sparse solver.
std::vector<double> sinkhorn_wmd_dense(std::span<const double> r_full, const DenseMatrix& c_dense,
                                       const DenseMatrix& vecs, const SolverConfig& cfg);

std::vector<double> unfused_sparse_wmd(std::span<const double> r_full, const CsrMatrix& c,
                                       const DenseMatrix& vecs, const SolverConfig& cfg);

}  // namespace wmd
