#include "wmd/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "wmd/error.hpp"

namespace wmd {

namespace {

// out = a @ b, naive triple loop.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

DenseMatrix reciprocal(const DenseMatrix& m) {
  DenseMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (m(i, j) == 0.0) {
        throw NumericalError("division by zero at (" + std::to_string(i) + ", " +
                             std::to_string(j) + ") in dense reference");
      }
      out(i, j) = 1.0 / m(i, j);
    }
  }
  return out;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) * b(i, j);
  }
  return out;
}

}  // namespace

std::vector<double> sinkhorn_wmd_dense(std::span<const double> r_full, const DenseMatrix& c_dense,
                                       const DenseMatrix& vecs, const SolverConfig& cfg) {
  cfg.validate();
  const std::size_t V = vecs.rows();
  if (r_full.size() != V || c_dense.rows() != V) {
    throw ArgumentError("shape mismatch in dense reference");
  }
  const std::size_t N = c_dense.cols();

  std::vector<std::size_t> sel;
  std::vector<double> r;
  for (std::size_t i = 0; i < V; ++i) {
    if (r_full[i] > 0.0) {
      sel.push_back(i);
      r.push_back(r_full[i]);
    }
  }
  if (sel.empty()) throw EmptyInputError("empty query");
  const std::size_t vr = sel.size();

  // M = cdist(vecs[sel], vecs), v_r x V.
  DenseMatrix M(vr, V);
  for (std::size_t a = 0; a < vr; ++a) {
    for (std::size_t j = 0; j < V; ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < vecs.cols(); ++k) {
        const double d = vecs(sel[a], k) - vecs(j, k);
        sq += d * d;
      }
      M(a, j) = std::sqrt(sq);
    }
  }

  DenseMatrix K(vr, V);
  DenseMatrix K_over_r(vr, V);
  for (std::size_t a = 0; a < vr; ++a) {
    for (std::size_t j = 0; j < V; ++j) {
      K(a, j) = std::exp(-cfg.lambda * M(a, j));
      K_over_r(a, j) = (1.0 / r[a]) * K(a, j);
    }
  }
  const DenseMatrix KT = K.transposed();

  DenseMatrix x(vr, N, 1.0 / static_cast<double>(vr));
  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    const DenseMatrix u = reciprocal(x);
    const DenseMatrix v = hadamard(c_dense, reciprocal(matmul(KT, u)));
    DenseMatrix next = matmul(K_over_r, v);
    double change = 0.0;
    for (std::size_t a = 0; a < vr; ++a) {
      for (std::size_t j = 0; j < N; ++j) change = std::max(change, std::abs(next(a, j) - x(a, j)));
    }
    x = std::move(next);
    if (cfg.tol && change < *cfg.tol) break;
  }

  const DenseMatrix u = reciprocal(x);
  const DenseMatrix v = hadamard(c_dense, reciprocal(matmul(KT, u)));
  const DenseMatrix weighted = hadamard(u, matmul(hadamard(K, M), v));
  std::vector<double> wmd(N, 0.0);
  for (std::size_t a = 0; a < vr; ++a) {
    for (std::size_t j = 0; j < N; ++j) wmd[j] += weighted(a, j);
  }
  return wmd;
}

std::vector<double> unfused_sparse_wmd(std::span<const double> r_full, const CsrMatrix& c,
                                       const DenseMatrix& vecs, const SolverConfig& cfg) {
  return sinkhorn_wmd(r_full, c, vecs, cfg, KernelVariant::unfused).wmd;
}

}  // namespace wmd
