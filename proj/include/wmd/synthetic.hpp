#pragma once

// Seeded random problem instances for tests, validation and benchmarks.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "wmd/sparse.hpp"

namespace wmd {

struct SyntheticSpec {
  std::size_t vocab = 10000;
  std::size_t docs = 1000;
  double density = 0.003;  // expected fraction of nonzero corpus entries
  std::size_t query_words = 19;
  std::size_t dim = 64;
  std::uint64_t seed = 1;
};

struct SyntheticInstance {
  DenseMatrix vecs;            // vocab x dim
  CsrMatrix c;                 // vocab x docs, columns sum to 1, none empty
  std::vector<double> r_full;  // query histogram with query_words entries
};

/// Embedding entries are uniform in [-1, 1] / sqrt(dim), which keeps typical
/// word distances near 1. Word counts are small integers normalized per
/// document; every document has at least one word.
SyntheticInstance make_synthetic(const SyntheticSpec& spec);

/// Normalized random histogram over `vocab` words with `words` nonzeros.
std::vector<double> make_random_query(std::size_t vocab, std::size_t words, std::uint64_t seed);

}  // namespace wmd
