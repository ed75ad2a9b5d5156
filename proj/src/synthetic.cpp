#include "wmd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

#include "wmd/error.hpp"

namespace wmd {

namespace {

std::vector<std::size_t> distinct_indices(std::size_t n, std::size_t count, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::unordered_set<std::size_t> chosen;
  while (chosen.size() < count) chosen.insert(pick(rng));
  std::vector<std::size_t> out(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<double> make_random_query(std::size_t vocab, std::size_t words, std::uint64_t seed) {
  if (words == 0 || words > vocab) throw ArgumentError("query word count must be in [1, vocab]");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(1, 3);
  std::vector<double> r(vocab, 0.0);
  const auto ids = distinct_indices(vocab, words, rng);
  double total = 0.0;
  std::vector<double> counts(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    counts[k] = count(rng);
    total += counts[k];
  }
  for (std::size_t k = 0; k < ids.size(); ++k) r[ids[k]] = counts[k] / total;
  return r;
}

SyntheticInstance make_synthetic(const SyntheticSpec& spec) {
  if (spec.vocab == 0 || spec.docs == 0 || spec.dim == 0) {
    throw ArgumentError("synthetic instance needs a nonempty vocabulary, corpus and embedding");
  }
  if (!(spec.density > 0.0 && spec.density <= 1.0)) {
    throw ArgumentError("density must be in (0, 1]");
  }
  std::mt19937_64 rng(spec.seed);
  SyntheticInstance inst;

  inst.vecs = DenseMatrix(spec.vocab, spec.dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.dim));
  std::uniform_real_distribution<double> coord(-scale, scale);
  for (std::size_t i = 0; i < spec.vocab; ++i) {
    for (double& x : inst.vecs.row(i)) x = coord(rng);
  }

  std::binomial_distribution<std::size_t> words_per_doc(spec.vocab, spec.density);
  std::uniform_int_distribution<int> count(1, 4);
  std::vector<Triplet> entries;
  for (std::size_t j = 0; j < spec.docs; ++j) {
    const std::size_t k = std::max<std::size_t>(1, words_per_doc(rng));
    const auto rows = distinct_indices(spec.vocab, k, rng);
    std::vector<double> counts(rows.size());
    double total = 0.0;
    for (double& c : counts) {
      c = count(rng);
      total += c;
    }
    for (std::size_t e = 0; e < rows.size(); ++e) entries.push_back({rows[e], j, counts[e] / total});
  }
  inst.c = csr_from_triplets(entries, spec.vocab, spec.docs);

  inst.r_full = make_random_query(spec.vocab, std::min(spec.query_words, spec.vocab), rng());
  return inst;
}

}  // namespace wmd
