#pragma once

// Command-line front end: solve, bench and validate subcommands.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace wmd::cli {

enum ExitCode : int {
  exit_ok = 0,
  exit_validation = 1,
  exit_io = 2,
  exit_numerical = 3,
};

enum class Mode { solve, bench, validate };

struct RunManifest {
  Mode mode = Mode::solve;

  std::string embedding_path;
  std::string corpus_path;
  std::string queries;     // corpus line indices, e.g. "0-9,12"
  std::string query_file;  // one query document per line
  std::string stopwords_path;
  std::optional<std::size_t> vocab_limit;
  std::optional<std::size_t> max_docs;
  bool label_prefix = false;
  bool drop_empty = false;

  std::optional<double> lambda;
  std::size_t max_iter = 15;
  std::optional<double> tol;
  std::size_t workers = 1;
  bool deterministic = false;

  std::string output_path;  // empty writes to stdout
  std::uint64_t seed = 1;

  // bench
  std::size_t repeats = 5;
  std::size_t synth_vocab = 10000;
  std::size_t synth_docs = 1000;
  double synth_density = 0.003;
  std::size_t synth_query_words = 19;
  std::size_t synth_dim = 64;

  // validate
  std::size_t instances = 20;
  bool inject_corrupt_csr = false;

  /// Throws ArgumentError when a mode-specific field is missing or invalid.
  void validate() const;
};

/// Parses "0-9,12" into {0..9, 12}, keeping order and rejecting duplicates.
std::vector<std::size_t> parse_index_list(const std::string& spec);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

int cmd_solve(const RunManifest& m, std::ostream& out, std::ostream& log);
int cmd_bench(const RunManifest& m, std::ostream& out, std::ostream& log);
int cmd_validate(const RunManifest& m, std::ostream& out, std::ostream& log);

/// Full entry point: parses argv, dispatches, maps exceptions to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& log);

}  // namespace wmd::cli
