#include "wmd/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "wmd/error.hpp"
#include "wmd/parallel.hpp"

namespace wmd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Accumulation accumulation_for(const SolverConfig& cfg) {
  return cfg.deterministic ? Accumulation::deterministic : Accumulation::atomic;
}

double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b) {
  double worst = 0.0;
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(pa[k] - pb[k]));
  return worst;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw ArgumentError("lambda must be positive and finite");
  }
  if (max_iter < 1) throw ArgumentError("max_iter must be at least 1");
  if (workers < 1) throw ArgumentError("workers must be at least 1");
  if (tol && !(*tol >= 0.0)) throw ArgumentError("tol must be non-negative");
}

void SinkhornWorkspace::reserve(std::size_t vocab, std::size_t query_words, std::size_t docs,
                                std::size_t nnz) {
  for (DenseMatrix* m : {&mats.M_T, &mats.K_T, &mats.K_over_r_T, &mats.KM_T}) {
    if (m->size() < vocab * query_words) m->reshape(vocab, query_words);
  }
  for (DenseMatrix* m : {&x_docs, &u_docs, &x_prev}) {
    if (m->size() < docs * query_words) m->reshape(docs, query_words);
  }
  if (pattern_values.size() < nnz) pattern_values.resize(nnz);
}

DenseMatrix init_x(std::size_t query_words, std::size_t n_docs) {
  if (query_words == 0 || n_docs == 0) {
    throw ArgumentError("init_x needs at least one query word and one document");
  }
  return DenseMatrix(query_words, n_docs, 1.0 / static_cast<double>(query_words));
}

void update_u_into(const DenseMatrix& x, DenseMatrix& u, std::size_t workers) {
  u.reshape(x.rows(), x.cols());
  const double* src = x.data();
  double* dst = u.data();
  run_workers(workers, [&](std::size_t w) {
    const IndexRange range = split_range(x.size(), workers, w);
    for (std::size_t k = range.begin; k < range.end; ++k) {
      if (!(src[k] > 0.0)) {
        throw NumericalError("nonpositive iterate x(" + std::to_string(k / x.cols()) + ", " +
                             std::to_string(k % x.cols()) + ")");
      }
      dst[k] = 1.0 / src[k];
    }
  });
}

DenseMatrix update_u(const DenseMatrix& x) {
  DenseMatrix u;
  update_u_into(x, u);
  return u;
}

SolverResult run_sinkhorn(std::span<const double> r_full, const CsrMatrix& c,
                          const DenseMatrix& vecs, const SolverConfig& cfg,
                          KernelVariant variant, SinkhornWorkspace& ws,
                          const KernelContext& ctx) {
  cfg.validate();
  if (c.n_rows != vecs.rows() || r_full.size() != vecs.rows()) {
    throw ArgumentError("shape mismatch: query length " + std::to_string(r_full.size()) +
                        ", corpus rows " + std::to_string(c.n_rows) + ", embedding rows " +
                        std::to_string(vecs.rows()));
  }
  if (c.n_cols == 0) throw ArgumentError("corpus has no documents");
  if (ctx.workers != cfg.workers || ctx.accumulation != accumulation_for(cfg)) {
    throw ArgumentError("kernel context does not match the solver configuration");
  }

  const std::size_t workers = cfg.workers;
  const std::size_t n_docs = c.n_cols;
  SolverResult result;
  PhaseTimings& t = result.timings;
  const auto solve_start = Clock::now();

  auto phase = Clock::now();
  QuerySelection query = select_nonzero(r_full);
  const std::size_t vr = query.sel.size();
  t.select = seconds_since(phase);

  phase = Clock::now();
  euclidean_rows_into(vecs, query.sel, ws.mats.M_T, workers);
  t.distance = seconds_since(phase);

  phase = Clock::now();
  precompute_into(ws.mats, query.r, cfg.lambda, workers);
  t.precompute = seconds_since(phase);

  phase = Clock::now();
  ws.x_docs.reshape(n_docs, vr);
  ws.x_docs.fill(1.0 / static_cast<double>(vr));
  ws.u_docs.reshape(n_docs, vr);
  if (cfg.tol) ws.x_prev.reshape(n_docs, vr);
  std::span<double> pattern;
  if (variant == KernelVariant::unfused) {
    if (ws.pattern_values.size() < c.nnz()) ws.pattern_values.resize(c.nnz());
    pattern = std::span<double>(ws.pattern_values.data(), c.nnz());
  }
  t.init = seconds_since(phase);

  phase = Clock::now();
  for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
    update_u_into(ws.x_docs, ws.u_docs, workers);
    if (cfg.tol) std::swap(ws.x_docs, ws.x_prev);
    ws.x_docs.fill(0.0);
    if (variant == KernelVariant::fused) {
      fused_iteration_doc_major(c, ws.mats, ws.u_docs, ws.x_docs, ctx);
    } else {
      sddmm_doc_major(c, ws.mats.K_T, ws.u_docs, pattern, ctx);
      spmm_doc_major(c, pattern, ws.mats.K_over_r_T, ws.x_docs, ctx);
    }
    result.iterations_run = it;
    if (cfg.tol && max_abs_difference(ws.x_docs, ws.x_prev) < *cfg.tol) {
      result.converged = true;
      break;
    }
  }
  t.loop = seconds_since(phase);

  phase = Clock::now();
  update_u_into(ws.x_docs, ws.u_docs, workers);
  result.wmd.resize(n_docs);
  if (variant == KernelVariant::fused) {
    fused_final_doc_major(c, ws.mats, ws.u_docs, result.wmd, ctx);
  } else {
    sddmm_doc_major(c, ws.mats.K_T, ws.u_docs, pattern, ctx);
    weighted_cost_doc_major(c, pattern, ws.mats.KM_T, ws.u_docs, result.wmd, ctx);
  }
  t.final_step = seconds_since(phase);
  t.total = seconds_since(solve_start);

  result.x = ws.x_docs.transposed();
  result.query_words = std::move(query.sel);
  return result;
}

SolverResult sinkhorn_wmd(std::span<const double> r_full, const CsrMatrix& c,
                          const DenseMatrix& vecs, const SolverConfig& cfg,
                          KernelVariant variant) {
  cfg.validate();
  const KernelContext ctx = make_kernel_context(c, cfg.workers, accumulation_for(cfg));
  SinkhornWorkspace ws;
  return run_sinkhorn(r_full, c, vecs, cfg, variant, ws, ctx);
}

std::vector<BatchOutcome> sinkhorn_wmd_batch(std::span<const SparseVector> queries,
                                             const CsrMatrix& c, const DenseMatrix& vecs,
                                             const SolverConfig& cfg, KernelVariant variant) {
  cfg.validate();
  const KernelContext ctx = make_kernel_context(c, cfg.workers, accumulation_for(cfg));

  std::size_t widest = 0;
  for (const SparseVector& q : queries) widest = std::max(widest, q.nnz());
  SinkhornWorkspace ws;
  ws.reserve(c.n_rows, widest, c.n_cols, variant == KernelVariant::unfused ? c.nnz() : 0);

  std::vector<BatchOutcome> out(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    try {
      if (queries[q].length != c.n_rows) {
        throw ArgumentError("query " + std::to_string(q) + " has length " +
                            std::to_string(queries[q].length) + ", vocabulary has " +
                            std::to_string(c.n_rows) + " words");
      }
      const std::vector<double> r_full = queries[q].to_dense();
      out[q].result = run_sinkhorn(r_full, c, vecs, cfg, variant, ws, ctx);
    } catch (const std::exception& e) {
      out[q].error = std::current_exception();
      out[q].message = e.what();
    }
  }
  return out;
}

}  // namespace wmd
