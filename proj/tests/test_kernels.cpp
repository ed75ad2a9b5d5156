#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wmd/error.hpp"
#include "wmd/kernels.hpp"

using namespace wmd;

namespace {

struct Instance {
  CsrMatrix c;
  SinkhornMatrices mats;
  DenseMatrix u;  // v_r x N
};

// Random kernel inputs: nonnegative c, strictly positive K-derived matrices
// and u.
Instance random_instance(std::mt19937_64& rng, std::size_t V, std::size_t N, std::size_t vr,
                         double density) {
  Instance inst;
  inst.c = oracle::random_csr(rng, V, N, density);
  DenseMatrix M_T = oracle::random_dense(rng, V, vr, 0.0, 2.0);
  std::vector<double> r(vr);
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  for (double& x : r) x = weight(rng);
  inst.mats = precompute(std::move(M_T), r, 1.5);
  inst.u = oracle::random_dense(rng, vr, N, 0.5, 4.0);
  return inst;
}

DenseMatrix zeros_like_x(const Instance& inst) {
  return DenseMatrix(inst.mats.query_words(), inst.c.n_cols, 0.0);
}

// Two-word vocabulary {a: (0,0), b: (1,0)}, query = a, target = b, lambda 1.
struct Singleton {
  CsrMatrix c = csr_from_triplets(std::vector<Triplet>{{1, 0, 1.0}}, 2, 1);
  DenseMatrix vecs = DenseMatrix(2, 2, {0, 0, 1, 0});
  std::vector<std::size_t> sel{0};
  std::vector<double> r{1.0};
  SinkhornMatrices mats = precompute(euclidean_rows(vecs, sel), r, 1.0);
};

}  // namespace

TEST(SelectNonzero, PicksPositiveEntries) {
  const std::vector<double> r{0, 0.5, 0, 0.5};
  const QuerySelection q = select_nonzero(r);
  EXPECT_EQ(q.sel, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(q.r, (std::vector<double>{0.5, 0.5}));
}

TEST(SelectNonzero, SingleWord) {
  const std::vector<double> r{1.0};
  EXPECT_EQ(select_nonzero(r).sel, (std::vector<std::size_t>{0}));
}

TEST(SelectNonzero, EmptyQuery) {
  const std::vector<double> r{0.0, 0.0};
  EXPECT_THROW(select_nonzero(r), EmptyInputError);
  const std::vector<double> neg{0.5, -0.5};
  EXPECT_THROW(select_nonzero(neg), ArgumentError);
}

TEST(EuclideanRows, ThreeFourFive) {
  const DenseMatrix vecs(3, 2, {0, 0, 3, 4, 0, 1});
  const std::vector<std::size_t> first{0};
  EXPECT_EQ(euclidean_rows(vecs, first), DenseMatrix(3, 1, {0, 5, 1}));
  const std::vector<std::size_t> second{1};
  EXPECT_EQ(euclidean_rows(vecs, second), DenseMatrix(3, 1, {5, 0, std::sqrt(18.0)}));
}

TEST(EuclideanRows, MatchesScalarLoop) {
  std::mt19937_64 rng(41);
  const DenseMatrix vecs = oracle::random_dense(rng, 8, 4, -2.0, 2.0);
  const std::vector<std::size_t> sel{1, 4, 6};
  for (std::size_t workers : {1, 3}) {
    const DenseMatrix M_T = euclidean_rows(vecs, sel, workers);
    ASSERT_EQ(M_T.rows(), 8u);
    ASSERT_EQ(M_T.cols(), 3u);
    for (std::size_t j = 0; j < 8; ++j) {
      for (std::size_t a = 0; a < 3; ++a) {
        EXPECT_NEAR(M_T(j, a), oracle::distance(vecs, sel[a], j), 1e-15);
      }
    }
    for (std::size_t a = 0; a < 3; ++a) EXPECT_EQ(M_T(sel[a], a), 0.0);
  }
}

TEST(EuclideanRows, OutOfBoundsSelection) {
  const DenseMatrix vecs(2, 2);
  const std::vector<std::size_t> sel{2};
  EXPECT_THROW(euclidean_rows(vecs, sel), ArgumentError);
}

TEST(Precompute, ZeroCost) {
  const std::vector<double> r{1.0};
  const SinkhornMatrices m = precompute(DenseMatrix(1, 1, 0.0), r, 1.0);
  EXPECT_EQ(m.K_T(0, 0), 1.0);
  EXPECT_EQ(m.KM_T(0, 0), 0.0);
}

TEST(Precompute, UnitCost) {
  const std::vector<double> r{0.5};
  const SinkhornMatrices m = precompute(DenseMatrix(1, 1, 1.0), r, 1.0);
  const double e = std::exp(-1.0);
  EXPECT_DOUBLE_EQ(m.K_T(0, 0), e);
  EXPECT_DOUBLE_EQ(m.K_over_r_T(0, 0), 2.0 * e);
  EXPECT_DOUBLE_EQ(m.KM_T(0, 0), e);
}

TEST(Precompute, MatchesElementwiseRecomputation) {
  std::mt19937_64 rng(43);
  const DenseMatrix M_T = oracle::random_dense(rng, 20, 5, 0.0, 3.0);
  const std::vector<double> r{0.1, 0.2, 0.3, 0.15, 0.25};
  const SinkhornMatrices m = precompute(M_T, r, 10.0, 4);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t a = 0; a < 5; ++a) {
      const double k = std::exp(-10.0 * M_T(i, a));
      EXPECT_LE(oracle::relative_error(m.K_T(i, a), k), 1e-15);
      EXPECT_LE(oracle::relative_error(m.K_over_r_T(i, a), k / r[a]), 1e-15);
      EXPECT_LE(oracle::relative_error(m.KM_T(i, a), k * M_T(i, a)), 1e-15);
      EXPECT_GT(m.K_T(i, a), 0.0);
      EXPECT_LE(m.K_T(i, a), 1.0);
    }
  }
}

TEST(Precompute, RejectsBadArguments) {
  const std::vector<double> r{1.0};
  EXPECT_THROW(precompute(DenseMatrix(1, 1, 1.0), r, 0.0), ArgumentError);
  EXPECT_THROW(precompute(DenseMatrix(1, 1, 1.0), r, -2.0), ArgumentError);
  const std::vector<double> zero{0.0};
  EXPECT_THROW(precompute(DenseMatrix(1, 1, 1.0), zero, 1.0), ArgumentError);
}

TEST(Sddmm, SingleNonzero) {
  const CsrMatrix c = csr_from_triplets(std::vector<Triplet>{{1, 0, 1.0}}, 2, 1);
  const DenseMatrix K_T(2, 1, {1.0, 2.0});
  const DenseMatrix u(1, 1, {0.5});
  const auto w = sddmm(c, K_T, u, make_kernel_context(c, 1));
  EXPECT_EQ(w, (std::vector<double>{1.0}));
}

TEST(Sddmm, HandDotProduct) {
  const CsrMatrix c = csr_from_triplets(std::vector<Triplet>{{0, 0, 0.5}}, 1, 1);
  const DenseMatrix K_T(1, 2, {1.0, 1.0});
  const DenseMatrix u(2, 1, {1.0, 3.0});
  const auto w = sddmm(c, K_T, u, make_kernel_context(c, 1));
  EXPECT_EQ(w, (std::vector<double>{0.125}));
}

TEST(Sddmm, MatchesDenseOracle) {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    Instance inst = random_instance(rng, 6, 4, 3, 0.4);
    const auto w = sddmm(inst.c, inst.mats.K_T, inst.u, make_kernel_context(inst.c, 1));
    const DenseMatrix want = oracle::sddmm_dense(inst.c, inst.mats.K_T, inst.u);
    EXPECT_LE(oracle::max_relative_error(oracle::pattern_to_dense(inst.c, w), want), 1e-12);
    ASSERT_EQ(w.size(), inst.c.nnz());
  }
}

TEST(Sddmm, ZeroDenominatorNamesPosition) {
  const CsrMatrix c = csr_from_triplets(std::vector<Triplet>{{1, 2, 1.0}}, 2, 3);
  const DenseMatrix K_T(2, 1, {1.0, 0.0});
  const DenseMatrix u(1, 3, {1.0, 1.0, 1.0});
  try {
    sddmm(c, K_T, u, make_kernel_context(c, 1));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("(1, 2)"), std::string::npos) << e.what();
  }
}

TEST(Sddmm, InverseScaleCovariance) {
  std::mt19937_64 rng(53);
  Instance inst = random_instance(rng, 30, 10, 4, 0.2);
  const KernelContext ctx = make_kernel_context(inst.c, 1);
  const auto base = sddmm(inst.c, inst.mats.K_T, inst.u, ctx);
  for (double alpha : {0.25, 8.0, 3.7, 0.013}) {
    DenseMatrix scaled = inst.u;
    for (std::size_t k = 0; k < scaled.size(); ++k) scaled.data()[k] *= alpha;
    const auto w = sddmm(inst.c, inst.mats.K_T, scaled, ctx);
    for (std::size_t k = 0; k < w.size(); ++k) {
      // Powers of two scale exactly; other factors within a few ulps.
      if (alpha == 0.25 || alpha == 8.0) {
        EXPECT_EQ(w[k], base[k] / alpha);
      } else {
        EXPECT_LE(oracle::relative_error(w[k], base[k] / alpha), 1e-14);
      }
    }
  }
}

TEST(Spmm, SingleNonzero) {
  const CsrMatrix c = csr_from_triplets(std::vector<Triplet>{{1, 0, 1.0}}, 2, 1);
  const DenseMatrix K_over_r_T(2, 1, {0.3, 0.7});
  const std::vector<double> w{1.0};
  EXPECT_EQ(spmm(c, w, K_over_r_T, make_kernel_context(c, 1)), DenseMatrix(1, 1, {0.7}));
}

TEST(Spmm, ZeroValuesAnnihilate) {
  std::mt19937_64 rng(59);
  Instance inst = random_instance(rng, 12, 5, 3, 0.3);
  const std::vector<double> w(inst.c.nnz(), 0.0);
  const DenseMatrix x = spmm(inst.c, w, inst.mats.K_over_r_T, make_kernel_context(inst.c, 1));
  EXPECT_EQ(x, DenseMatrix(3, 5, 0.0));
}

TEST(Spmm, MatchesDenseOracle) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    Instance inst = random_instance(rng, 9, 6, 4, 0.35);
    std::vector<double> w(inst.c.nnz());
    std::uniform_real_distribution<double> value(0.1, 2.0);
    for (double& x : w) x = value(rng);
    const DenseMatrix x = spmm(inst.c, w, inst.mats.K_over_r_T, make_kernel_context(inst.c, 1));
    const DenseMatrix want = oracle::spmm_dense(oracle::pattern_to_dense(inst.c, w),
                                                inst.mats.K_over_r_T);
    EXPECT_LE(oracle::max_relative_error(x, want), 1e-12);
  }
}

TEST(FusedIteration, BitwiseEqualToComposition) {
  std::mt19937_64 rng(67);
  for (int trial = 0; trial < 30; ++trial) {
    Instance inst = random_instance(rng, 25, 7, 5, 0.25);
    const KernelContext ctx = make_kernel_context(inst.c, 1);
    DenseMatrix fused = zeros_like_x(inst);
    fused_iteration(inst.c, inst.mats, inst.u, fused, ctx);
    const auto w = sddmm(inst.c, inst.mats.K_T, inst.u, ctx);
    EXPECT_EQ(fused, spmm(inst.c, w, inst.mats.K_over_r_T, ctx));
  }
}

TEST(FusedIteration, Singleton) {
  Singleton s;
  DenseMatrix x(1, 1, 0.0);
  fused_iteration(s.c, s.mats, DenseMatrix(1, 1, 1.0), x, make_kernel_context(s.c, 1));
  EXPECT_NEAR(x(0, 0), 1.0, 1e-15);
}

TEST(FusedIteration, MatchesDenseIteration) {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 10; ++trial) {
    Instance inst = random_instance(rng, 32, 8, 4, 0.2);
    DenseMatrix x = zeros_like_x(inst);
    fused_iteration(inst.c, inst.mats, inst.u, x, make_kernel_context(inst.c, 1));
    const DenseMatrix want = oracle::spmm_dense(
        oracle::sddmm_dense(inst.c, inst.mats.K_T, inst.u), inst.mats.K_over_r_T);
    EXPECT_LE(oracle::max_relative_error(x, want), 1e-12);
  }
}

TEST(FusedIteration, WorkerCountInvariance) {
  std::mt19937_64 rng(73);
  Instance inst = random_instance(rng, 200, 40, 6, 0.05);
  DenseMatrix serial = zeros_like_x(inst);
  fused_iteration(inst.c, inst.mats, inst.u, serial, make_kernel_context(inst.c, 1));
  for (std::size_t p : {2, 3, 8, 13}) {
    DenseMatrix atomic = zeros_like_x(inst);
    fused_iteration(inst.c, inst.mats, inst.u, atomic, make_kernel_context(inst.c, p));
    EXPECT_LE(oracle::max_relative_error(atomic, serial), 1e-12);

    DenseMatrix det = zeros_like_x(inst);
    fused_iteration(inst.c, inst.mats, inst.u, det,
                    make_kernel_context(inst.c, p, Accumulation::deterministic));
    EXPECT_EQ(det, serial) << "p=" << p;
  }
}

TEST(FusedIteration, WorkCount) {
  std::mt19937_64 rng(79);
  for (int trial = 0; trial < 10; ++trial) {
    Instance inst = random_instance(rng, 40, 9, 3 + trial % 4, 0.2);
    const std::uint64_t expected = 2ull * inst.c.nnz() * inst.mats.query_words();
    for (auto mode : {Accumulation::atomic, Accumulation::deterministic}) {
      for (std::size_t p : {1, 4}) {
        WorkCounter counter;
        KernelContext ctx = make_kernel_context(inst.c, p, mode);
        ctx.counter = &counter;
        DenseMatrix x = zeros_like_x(inst);
        fused_iteration(inst.c, inst.mats, inst.u, x, ctx);
        EXPECT_EQ(counter.macs.load(), expected);
      }
    }
  }
}

TEST(FusedIteration, ShapeAndContextChecks) {
  std::mt19937_64 rng(83);
  Instance inst = random_instance(rng, 10, 4, 2, 0.3);
  Instance other = random_instance(rng, 11, 4, 2, 0.3);
  DenseMatrix x = zeros_like_x(inst);
  EXPECT_THROW(fused_iteration(inst.c, inst.mats, inst.u, x, make_kernel_context(other.c, 1)),
               ArgumentError);
  DenseMatrix wrong(3, 4, 0.0);
  EXPECT_THROW(fused_iteration(inst.c, inst.mats, inst.u, wrong, make_kernel_context(inst.c, 1)),
               ArgumentError);
}

TEST(KernelContext, RejectsCorruptMatrix) {
  CsrMatrix c{2, 2, {0, 2, 1}, {0}, {1.0}};
  EXPECT_THROW(make_kernel_context(c, 1), StructuralError);
  CsrMatrix ok{2, 2, {0, 1, 1}, {0}, {1.0}};
  EXPECT_THROW(make_kernel_context(ok, 0), ArgumentError);
}

TEST(KernelContext, ColumnRangesCoverAllColumns) {
  std::mt19937_64 rng(89);
  for (int trial = 0; trial < 50; ++trial) {
    const CsrMatrix c = oracle::random_csr(rng, 15, 1 + trial % 9, 0.3);
    for (std::size_t p = 1; p <= 10; ++p) {
      const KernelContext ctx = make_kernel_context(c, p, Accumulation::deterministic);
      ASSERT_EQ(ctx.columns.ranges.size(), p);
      std::size_t next = 0;
      for (const IndexRange& r : ctx.columns.ranges) {
        EXPECT_EQ(r.begin, next);
        EXPECT_LE(r.begin, r.end);
        next = r.end;
      }
      EXPECT_EQ(next, c.n_cols);
    }
  }
}

TEST(FusedFinal, IdenticalSingletonIsZero) {
  const CsrMatrix c = csr_from_triplets(std::vector<Triplet>{{0, 0, 1.0}}, 2, 1);
  const DenseMatrix vecs(2, 2, {0, 0, 1, 0});
  const std::vector<std::size_t> sel{0};
  const std::vector<double> r{1.0};
  const SinkhornMatrices mats = precompute(euclidean_rows(vecs, sel), r, 1.0);
  const auto wmd = fused_final(c, mats, DenseMatrix(1, 1, 1.0), make_kernel_context(c, 1));
  EXPECT_EQ(wmd, (std::vector<double>{0.0}));
}

TEST(FusedFinal, DistanceOneSingleton) {
  // One Sinkhorn step from x = 1 gives x ~ 1, hence u ~ 1.
  Singleton s;
  const KernelContext ctx = make_kernel_context(s.c, 1);
  DenseMatrix x(1, 1, 0.0);
  fused_iteration(s.c, s.mats, DenseMatrix(1, 1, 1.0), x, ctx);
  const DenseMatrix u(1, 1, {1.0 / x(0, 0)});
  const auto wmd = fused_final(s.c, s.mats, u, ctx);
  EXPECT_NEAR(wmd[0], 1.0, 1e-12);
}

TEST(FusedFinal, MatchesDenseOracleAndComposition) {
  std::mt19937_64 rng(97);
  for (int trial = 0; trial < 15; ++trial) {
    Instance inst = random_instance(rng, 30, 8, 4, 0.25);
    const KernelContext ctx = make_kernel_context(inst.c, 1);
    const auto wmd = fused_final(inst.c, inst.mats, inst.u, ctx);

    const DenseMatrix v = oracle::sddmm_dense(inst.c, inst.mats.K_T, inst.u);
    std::vector<double> want(inst.c.n_cols, 0.0);
    for (std::size_t j = 0; j < inst.c.n_cols; ++j) {
      for (std::size_t a = 0; a < inst.mats.query_words(); ++a) {
        double inner = 0.0;
        for (std::size_t i = 0; i < inst.c.n_rows; ++i) inner += inst.mats.KM_T(i, a) * v(i, j);
        want[j] += inst.u(a, j) * inner;
      }
    }
    EXPECT_LE(oracle::max_relative_error(wmd, want), 1e-12);
    for (double d : wmd) EXPECT_GE(d, 0.0);

    const auto pattern = sddmm(inst.c, inst.mats.K_T, inst.u, ctx);
    EXPECT_EQ(weighted_cost(inst.c, pattern, inst.mats.KM_T, inst.u, ctx), wmd);
  }
}

TEST(FusedFinal, WorkCountAndDeterminism) {
  std::mt19937_64 rng(101);
  Instance inst = random_instance(rng, 120, 30, 5, 0.08);
  const auto serial = fused_final(inst.c, inst.mats, inst.u, make_kernel_context(inst.c, 1));
  for (std::size_t p : {2, 5}) {
    WorkCounter counter;
    KernelContext ctx = make_kernel_context(inst.c, p, Accumulation::deterministic);
    ctx.counter = &counter;
    EXPECT_EQ(fused_final(inst.c, inst.mats, inst.u, ctx), serial);
    EXPECT_EQ(counter.macs.load(), 2ull * inst.c.nnz() * inst.mats.query_words());
    const auto atomic = fused_final(inst.c, inst.mats, inst.u, make_kernel_context(inst.c, p));
    EXPECT_LE(oracle::max_relative_error(atomic, serial), 1e-12);
  }
}
