#include "wmd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wmd/error.hpp"

namespace wmd {

namespace {

// All kernels share these two loops so that fused and unfused paths round
// identically. Count instantiations tally one MAC per loop trip.
// Four independent partial sums break the add latency chain.
template <bool Count>
inline double dot(const double* a, const double* b, std::size_t n, std::uint64_t& macs) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  if constexpr (Count) macs += n;
  return (s0 + s1) + (s2 + s3);
}

template <bool Count, bool Atomic>
inline void axpy(double* y, const double* x, double alpha, std::size_t n, std::uint64_t& macs) {
  for (std::size_t k = 0; k < n; ++k) {
    if constexpr (Atomic) {
      std::atomic_ref<double>(y[k]).fetch_add(x[k] * alpha, std::memory_order_relaxed);
    } else {
      y[k] += x[k] * alpha;
    }
    if constexpr (Count) ++macs;
  }
}

template <bool Atomic>
inline void accumulate(double& y, double value) {
  if constexpr (Atomic) {
    std::atomic_ref<double>(y).fetch_add(value, std::memory_order_relaxed);
  } else {
    y += value;
  }
}

[[noreturn]] void throw_zero_denominator(std::size_t i, std::size_t j) {
  throw NumericalError("zero SDDMM denominator at nonzero (" + std::to_string(i) + ", " +
                       std::to_string(j) + ")");
}

// Calls body(row, col, pos) for each nonzero owned by worker w.
template <class Body>
void for_each_nonzero(const CsrMatrix& c, const KernelContext& ctx, std::size_t w, Body&& body) {
  if (ctx.accumulation == Accumulation::deterministic) {
    const ColumnView& cv = ctx.columns;
    const IndexRange cols = cv.ranges[w];
    for (std::size_t j = cols.begin; j < cols.end; ++j) {
      for (std::size_t e = cv.col_ptr[j]; e < cv.col_ptr[j + 1]; ++e) body(cv.row[e], j, cv.pos[e]);
    }
    return;
  }
  const NnzPartition& part = ctx.partitions[w];
  std::size_t row = part.start_row;
  std::size_t k = part.nnz_begin;
  while (k < part.nnz_end) {
    const std::size_t row_end = std::min(c.row_ptr[row + 1], part.nnz_end);
    for (; k < row_end; ++k) body(row, c.col_idx[k], k);
    ++row;
  }
}

// Picks the <Count, Atomic> instantiation for this context.
template <class Impl>
void dispatch(const KernelContext& ctx, Impl&& impl) {
  const bool count = ctx.counter != nullptr;
  const bool atomic = ctx.accumulation == Accumulation::atomic && ctx.workers > 1;
  if (count) {
    if (atomic) {
      impl.template operator()<true, true>();
    } else {
      impl.template operator()<true, false>();
    }
  } else {
    if (atomic) {
      impl.template operator()<false, true>();
    } else {
      impl.template operator()<false, false>();
    }
  }
}

template <bool Count>
void publish(const KernelContext& ctx, std::uint64_t macs) {
  if constexpr (Count) ctx.counter->macs.fetch_add(macs, std::memory_order_relaxed);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ArgumentError(what);
}

void check_context(const CsrMatrix& c, const KernelContext& ctx) {
  require(ctx.n_rows == c.n_rows && ctx.n_cols == c.n_cols && ctx.nnz == c.nnz(),
          "kernel context was built for a different matrix");
}

void check_vocab_matrix(const CsrMatrix& c, const DenseMatrix& m, const char* name) {
  require(m.rows() == c.n_rows, std::string(name) + " has " + std::to_string(m.rows()) +
                                    " rows, expected " + std::to_string(c.n_rows));
}

void check_doc_major(const CsrMatrix& c, const DenseMatrix& it, std::size_t vr, const char* name) {
  require(it.rows() == c.n_cols && it.cols() == vr,
          std::string(name) + " must be " + std::to_string(c.n_cols) + "x" + std::to_string(vr));
}

void check_query_major(const CsrMatrix& c, const DenseMatrix& it, std::size_t vr,
                       const char* name) {
  require(it.rows() == vr && it.cols() == c.n_cols,
          std::string(name) + " must be " + std::to_string(vr) + "x" + std::to_string(c.n_cols));
}

void check_pattern_values(const CsrMatrix& c, std::span<const double> w) {
  require(w.size() == c.nnz(), "pattern values must have one entry per nonzero of c");
}

}  // namespace

QuerySelection select_nonzero(std::span<const double> r_full) {
  QuerySelection out;
  for (std::size_t i = 0; i < r_full.size(); ++i) {
    if (r_full[i] < 0.0 || std::isnan(r_full[i])) {
      throw ArgumentError("query histogram entry " + std::to_string(i) + " is negative");
    }
    if (r_full[i] > 0.0) {
      out.sel.push_back(i);
      out.r.push_back(r_full[i]);
    }
  }
  if (out.sel.empty()) throw EmptyInputError("empty query: histogram has no positive entry");
  return out;
}

DenseMatrix euclidean_rows(const DenseMatrix& vecs, std::span<const std::size_t> sel,
                           std::size_t workers) {
  DenseMatrix M_T;
  euclidean_rows_into(vecs, sel, M_T, workers);
  return M_T;
}

void euclidean_rows_into(const DenseMatrix& vecs, std::span<const std::size_t> sel,
                         DenseMatrix& M_T, std::size_t workers) {
  for (std::size_t s : sel) {
    if (s >= vecs.rows()) {
      throw ArgumentError("selected word " + std::to_string(s) + " outside the " +
                          std::to_string(vecs.rows()) + "-word vocabulary");
    }
  }
  const std::size_t V = vecs.rows();
  const std::size_t vr = sel.size();
  const std::size_t dim = vecs.cols();
  M_T.reshape(V, vr);

  // Query vectors transposed to dim x v_r, so the inner loop runs across query
  // words and vectorizes. Each sum still accumulates over k in order.
  std::vector<double> query_t(dim * vr);
  for (std::size_t a = 0; a < vr; ++a) {
    for (std::size_t k = 0; k < dim; ++k) query_t[k * vr + a] = vecs(sel[a], k);
  }
  run_workers(workers, [&](std::size_t w) {
    const IndexRange rows = split_range(V, workers, w);
    for (std::size_t j = rows.begin; j < rows.end; ++j) {
      const double* word = vecs.row(j).data();
      double* out = M_T.row(j).data();
      std::fill(out, out + vr, 0.0);
      for (std::size_t k = 0; k < dim; ++k) {
        const double* q = query_t.data() + k * vr;
        const double x = word[k];
        for (std::size_t a = 0; a < vr; ++a) {
          const double d = q[a] - x;
          out[a] += d * d;
        }
      }
      for (std::size_t a = 0; a < vr; ++a) out[a] = std::sqrt(out[a]);
    }
  });
}

SinkhornMatrices precompute(DenseMatrix M_T, std::span<const double> r, double lambda,
                            std::size_t workers) {
  SinkhornMatrices mats;
  mats.M_T = std::move(M_T);
  precompute_into(mats, r, lambda, workers);
  return mats;
}

void precompute_into(SinkhornMatrices& mats, std::span<const double> r, double lambda,
                     std::size_t workers) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw ArgumentError("lambda must be positive and finite, got " + std::to_string(lambda));
  }
  const std::size_t V = mats.M_T.rows();
  const std::size_t vr = mats.M_T.cols();
  require(r.size() == vr, "r has " + std::to_string(r.size()) + " entries, M_T has " +
                              std::to_string(vr) + " columns");
  for (std::size_t a = 0; a < vr; ++a) {
    if (!(r[a] > 0.0)) throw ArgumentError("r entry " + std::to_string(a) + " is not positive");
  }

  mats.lambda = lambda;
  mats.K_T.reshape(V, vr);
  mats.K_over_r_T.reshape(V, vr);
  mats.KM_T.reshape(V, vr);
  run_workers(workers, [&](std::size_t w) {
    const IndexRange rows = split_range(V, workers, w);
    for (std::size_t i = rows.begin; i < rows.end; ++i) {
      for (std::size_t a = 0; a < vr; ++a) {
        const double m = mats.M_T(i, a);
        const double k = std::exp(-lambda * m);
        mats.K_T(i, a) = k;
        mats.K_over_r_T(i, a) = k / r[a];
        mats.KM_T(i, a) = k * m;
      }
    }
  });
}

KernelContext make_kernel_context(const CsrMatrix& c, std::size_t workers,
                                  Accumulation accumulation) {
  if (workers == 0) throw ArgumentError("worker count must be at least 1");
  const auto violations = csr_validate(c);
  if (!violations.empty()) {
    throw StructuralError("invalid CSR (" + std::to_string(violations.size()) +
                          " violation(s)): " + violations.front().message);
  }

  KernelContext ctx;
  ctx.workers = workers;
  ctx.accumulation = accumulation;
  ctx.n_rows = c.n_rows;
  ctx.n_cols = c.n_cols;
  ctx.nnz = c.nnz();
  ctx.partitions = nnz_partition(c.row_ptr, c.nnz(), workers);

  if (accumulation == Accumulation::deterministic) {
    ColumnView& cv = ctx.columns;
    cv.col_ptr.assign(c.n_cols + 1, 0);
    for (std::size_t col : c.col_idx) ++cv.col_ptr[col + 1];
    for (std::size_t j = 0; j < c.n_cols; ++j) cv.col_ptr[j + 1] += cv.col_ptr[j];
    cv.row.resize(c.nnz());
    cv.pos.resize(c.nnz());
    std::vector<std::size_t> fill(cv.col_ptr.begin(), cv.col_ptr.end() - 1);
    for (std::size_t i = 0; i < c.n_rows; ++i) {
      for (std::size_t k = c.row_ptr[i]; k < c.row_ptr[i + 1]; ++k) {
        const std::size_t slot = fill[c.col_idx[k]]++;
        cv.row[slot] = i;
        cv.pos[slot] = k;
      }
    }
    // Column ranges holding roughly nnz / workers entries each.
    std::vector<std::size_t> bounds(workers + 1, c.n_cols);
    bounds[0] = 0;
    for (std::size_t w = 1; w < workers; ++w) {
      const std::size_t target = split_range(c.nnz(), workers, w).begin;
      bounds[w] = static_cast<std::size_t>(
          std::lower_bound(cv.col_ptr.begin(), cv.col_ptr.end() - 1, target) -
          cv.col_ptr.begin());
    }
    cv.ranges.resize(workers);
    for (std::size_t w = 0; w < workers; ++w) cv.ranges[w] = {bounds[w], bounds[w + 1]};
  }
  return ctx;
}

void sddmm_doc_major(const CsrMatrix& c, const DenseMatrix& K_T, const DenseMatrix& u_docs,
                     std::span<double> w, const KernelContext& ctx) {
  check_context(c, ctx);
  check_vocab_matrix(c, K_T, "K_T");
  check_doc_major(c, u_docs, K_T.cols(), "u");
  check_pattern_values(c, w);
  const std::size_t vr = K_T.cols();

  dispatch(ctx, [&]<bool Count, bool Atomic>() {
    run_workers(ctx.workers, [&](std::size_t worker) {
      std::uint64_t macs = 0;
      for_each_nonzero(c, ctx, worker, [&](std::size_t i, std::size_t j, std::size_t pos) {
        const double s = dot<Count>(K_T.row(i).data(), u_docs.row(j).data(), vr, macs);
        if (s == 0.0) throw_zero_denominator(i, j);
        w[pos] = c.values[pos] / s;
      });
      publish<Count>(ctx, macs);
    });
  });
}

std::vector<double> sddmm(const CsrMatrix& c, const DenseMatrix& K_T, const DenseMatrix& u,
                          const KernelContext& ctx) {
  check_query_major(c, u, K_T.cols(), "u");
  std::vector<double> w(c.nnz());
  sddmm_doc_major(c, K_T, u.transposed(), w, ctx);
  return w;
}

void spmm_doc_major(const CsrMatrix& c, std::span<const double> w, const DenseMatrix& K_over_r_T,
                    DenseMatrix& x_docs, const KernelContext& ctx) {
  check_context(c, ctx);
  check_vocab_matrix(c, K_over_r_T, "K_over_r_T");
  check_doc_major(c, x_docs, K_over_r_T.cols(), "x");
  check_pattern_values(c, w);
  const std::size_t vr = K_over_r_T.cols();

  dispatch(ctx, [&]<bool Count, bool Atomic>() {
    run_workers(ctx.workers, [&](std::size_t worker) {
      std::uint64_t macs = 0;
      for_each_nonzero(c, ctx, worker, [&](std::size_t i, std::size_t j, std::size_t pos) {
        axpy<Count, Atomic>(x_docs.row(j).data(), K_over_r_T.row(i).data(), w[pos], vr, macs);
      });
      publish<Count>(ctx, macs);
    });
  });
}

DenseMatrix spmm(const CsrMatrix& c, std::span<const double> w, const DenseMatrix& K_over_r_T,
                 const KernelContext& ctx) {
  DenseMatrix x_docs(c.n_cols, K_over_r_T.cols(), 0.0);
  spmm_doc_major(c, w, K_over_r_T, x_docs, ctx);
  return x_docs.transposed();
}

void fused_iteration_doc_major(const CsrMatrix& c, const SinkhornMatrices& mats,
                               const DenseMatrix& u_docs, DenseMatrix& x_docs,
                               const KernelContext& ctx) {
  check_context(c, ctx);
  check_vocab_matrix(c, mats.K_T, "K_T");
  check_vocab_matrix(c, mats.K_over_r_T, "K_over_r_T");
  const std::size_t vr = mats.query_words();
  check_doc_major(c, u_docs, vr, "u");
  check_doc_major(c, x_docs, vr, "x");
  const DenseMatrix& K_T = mats.K_T;
  const DenseMatrix& K_over_r_T = mats.K_over_r_T;

  dispatch(ctx, [&]<bool Count, bool Atomic>() {
    run_workers(ctx.workers, [&](std::size_t worker) {
      std::uint64_t macs = 0;
      for_each_nonzero(c, ctx, worker, [&](std::size_t i, std::size_t j, std::size_t pos) {
        const double s = dot<Count>(K_T.row(i).data(), u_docs.row(j).data(), vr, macs);
        if (s == 0.0) throw_zero_denominator(i, j);
        const double wv = c.values[pos] / s;
        axpy<Count, Atomic>(x_docs.row(j).data(), K_over_r_T.row(i).data(), wv, vr, macs);
      });
      publish<Count>(ctx, macs);
    });
  });
}

void fused_iteration(const CsrMatrix& c, const SinkhornMatrices& mats, const DenseMatrix& u,
                     DenseMatrix& x_out, const KernelContext& ctx) {
  const std::size_t vr = mats.query_words();
  check_query_major(c, u, vr, "u");
  check_query_major(c, x_out, vr, "x_out");
  DenseMatrix x_docs(c.n_cols, vr, 0.0);
  fused_iteration_doc_major(c, mats, u.transposed(), x_docs, ctx);
  for (std::size_t a = 0; a < vr; ++a) {
    for (std::size_t j = 0; j < c.n_cols; ++j) x_out(a, j) += x_docs(j, a);
  }
}

void fused_final_doc_major(const CsrMatrix& c, const SinkhornMatrices& mats,
                           const DenseMatrix& u_docs, std::span<double> wmd,
                           const KernelContext& ctx) {
  check_context(c, ctx);
  check_vocab_matrix(c, mats.K_T, "K_T");
  check_vocab_matrix(c, mats.KM_T, "KM_T");
  const std::size_t vr = mats.query_words();
  check_doc_major(c, u_docs, vr, "u");
  require(wmd.size() == c.n_cols, "wmd output must have one entry per document");
  std::fill(wmd.begin(), wmd.end(), 0.0);
  const DenseMatrix& K_T = mats.K_T;
  const DenseMatrix& KM_T = mats.KM_T;

  dispatch(ctx, [&]<bool Count, bool Atomic>() {
    run_workers(ctx.workers, [&](std::size_t worker) {
      std::uint64_t macs = 0;
      for_each_nonzero(c, ctx, worker, [&](std::size_t i, std::size_t j, std::size_t pos) {
        const double* uj = u_docs.row(j).data();
        const double s = dot<Count>(K_T.row(i).data(), uj, vr, macs);
        if (s == 0.0) throw_zero_denominator(i, j);
        const double v = c.values[pos] / s;
        const double cost = dot<Count>(KM_T.row(i).data(), uj, vr, macs);
        accumulate<Atomic>(wmd[j], v * cost);
      });
      publish<Count>(ctx, macs);
    });
  });
}

std::vector<double> fused_final(const CsrMatrix& c, const SinkhornMatrices& mats,
                                const DenseMatrix& u, const KernelContext& ctx) {
  check_query_major(c, u, mats.query_words(), "u");
  std::vector<double> wmd(c.n_cols);
  fused_final_doc_major(c, mats, u.transposed(), wmd, ctx);
  return wmd;
}

void weighted_cost_doc_major(const CsrMatrix& c, std::span<const double> v,
                             const DenseMatrix& KM_T, const DenseMatrix& u_docs,
                             std::span<double> wmd, const KernelContext& ctx) {
  check_context(c, ctx);
  check_vocab_matrix(c, KM_T, "KM_T");
  const std::size_t vr = KM_T.cols();
  check_doc_major(c, u_docs, vr, "u");
  check_pattern_values(c, v);
  require(wmd.size() == c.n_cols, "wmd output must have one entry per document");
  std::fill(wmd.begin(), wmd.end(), 0.0);

  dispatch(ctx, [&]<bool Count, bool Atomic>() {
    run_workers(ctx.workers, [&](std::size_t worker) {
      std::uint64_t macs = 0;
      for_each_nonzero(c, ctx, worker, [&](std::size_t i, std::size_t j, std::size_t pos) {
        const double cost = dot<Count>(KM_T.row(i).data(), u_docs.row(j).data(), vr, macs);
        accumulate<Atomic>(wmd[j], v[pos] * cost);
      });
      publish<Count>(ctx, macs);
    });
  });
}

std::vector<double> weighted_cost(const CsrMatrix& c, std::span<const double> v,
                                  const DenseMatrix& KM_T, const DenseMatrix& u,
                                  const KernelContext& ctx) {
  check_query_major(c, u, KM_T.cols(), "u");
  std::vector<double> wmd(c.n_cols);
  weighted_cost_doc_major(c, v, KM_T, u.transposed(), wmd, ctx);
  return wmd;
}

}  // namespace wmd
