#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "wmd/baseline.hpp"
#include "wmd/error.hpp"
#include "wmd/ingest.hpp"
#include "wmd/parallel.hpp"
#include "wmd/solver.hpp"
#include "wmd/synthetic.hpp"

namespace wmd::cli {

namespace {

Accumulation accumulation_of(const RunManifest& m) {
  return m.deterministic ? Accumulation::deterministic : Accumulation::atomic;
}

SolverConfig solver_config(const RunManifest& m) {
  SolverConfig cfg;
  cfg.lambda = m.lambda.value_or(cfg.lambda);
  cfg.max_iter = m.max_iter;
  cfg.tol = m.tol;
  cfg.workers = m.workers;
  cfg.deterministic = m.deterministic;
  cfg.validate();
  return cfg;
}

// Output goes to --out when given, otherwise to the fallback stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw IoError("cannot open " + path + " for writing");
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }
  void finish() {
    stream_->flush();
    if (!*stream_) throw IoError("write failed");
  }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool has_in_vocab_token(const Document& doc, const Vocabulary& vocab) {
  return std::any_of(doc.tokens.begin(), doc.tokens.end(),
                     [&](const std::string& t) { return vocab.find(t).has_value(); });
}

struct LoadedData {
  Embeddings emb;
  std::vector<Document> targets;
  std::vector<Document> queries;
  CsrMatrix c;
};

LoadedData load_data(const RunManifest& m, std::ostream& log) {
  LoadedData d;
  const StopWords stop =
      m.stopwords_path.empty() ? default_stopwords() : load_stopwords(m.stopwords_path);
  d.emb = load_embeddings(m.embedding_path, m.vocab_limit);
  log << "embeddings: " << d.emb.vocab.size() << " words, dim " << d.emb.vocab.embedding_dim();
  if (d.emb.duplicates_skipped) log << ", " << d.emb.duplicates_skipped << " duplicates skipped";
  log << '\n';

  CorpusOptions opts;
  opts.label_prefix = m.label_prefix;
  opts.max_docs = m.max_docs;
  std::vector<Document> docs = load_corpus(m.corpus_path, stop, opts);

  if (!m.query_file.empty()) {
    CorpusOptions qopts;
    qopts.label_prefix = m.label_prefix;
    d.queries = load_corpus(m.query_file, stop, qopts);
  } else {
    for (std::size_t id : parse_index_list(m.queries.empty() ? "0" : m.queries)) {
      if (id >= docs.size()) {
        throw ArgumentError("query index " + std::to_string(id) + " beyond the " +
                            std::to_string(docs.size()) + " loaded documents");
      }
      d.queries.push_back(docs[id]);
    }
  }

  if (m.drop_empty) {
    std::size_t dropped = 0;
    for (Document& doc : docs) {
      if (has_in_vocab_token(doc, d.emb.vocab)) {
        d.targets.push_back(std::move(doc));
      } else {
        ++dropped;
      }
    }
    if (dropped) log << "dropped " << dropped << " documents with no in-vocabulary tokens\n";
  } else {
    d.targets = std::move(docs);
  }
  try {
    d.c = build_corpus_matrix(d.targets, d.emb.vocab);
  } catch (const EmptyInputError& e) {
    throw EmptyInputError(std::string(e.what()) + "; pass --drop-empty to skip such documents");
  }
  log << "corpus: " << d.targets.size() << " target documents, " << d.c.nnz() << " nonzeros\n";
  return d;
}

void print_timings(std::ostream& log, const PhaseTimings& t) {
  log << std::fixed << std::setprecision(6) << "timings [s]: select " << t.select << ", distance "
      << t.distance << ", precompute " << t.precompute << ", init " << t.init << ", loop "
      << t.loop << ", final " << t.final_step << ", total " << t.total << '\n'
      << std::defaultfloat;
}

}  // namespace

void RunManifest::validate() const {
  if (mode == Mode::solve) {
    if (embedding_path.empty()) throw ArgumentError("solve needs --embeddings");
    if (corpus_path.empty()) throw ArgumentError("solve needs --corpus");
    if (!lambda) throw ArgumentError("solve needs --lambda");
    if (!queries.empty() && !query_file.empty()) {
      throw ArgumentError("--queries and --query-file are mutually exclusive");
    }
  }
  if (mode == Mode::bench && embedding_path.empty() != corpus_path.empty()) {
    throw ArgumentError("bench needs both --embeddings and --corpus, or neither");
  }
  if (repeats == 0) throw ArgumentError("--repeats must be at least 1");
  if (instances == 0) throw ArgumentError("--instances must be at least 1");
  if (!(synth_density > 0.0 && synth_density <= 1.0)) {
    throw ArgumentError("--density must be in (0, 1]");
  }
  SolverConfig cfg;
  cfg.lambda = lambda.value_or(cfg.lambda);
  cfg.max_iter = max_iter;
  cfg.tol = tol;
  cfg.workers = workers;
  cfg.validate();
}

std::vector<std::size_t> parse_index_list(const std::string& spec) {
  auto parse_number = [&](std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      throw ArgumentError("bad query index '" + std::string(s) + "' in '" + spec + "'");
    }
    return value;
  };

  std::vector<std::size_t> out;
  std::string_view rest = spec;
  while (true) {
    const std::size_t comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    const std::size_t dash = item.find('-');
    if (dash == std::string_view::npos) {
      out.push_back(parse_number(item));
    } else {
      const std::size_t lo = parse_number(item.substr(0, dash));
      const std::size_t hi = parse_number(item.substr(dash + 1));
      if (hi < lo) throw ArgumentError("empty query range in '" + spec + "'");
      for (std::size_t i = lo; i <= hi; ++i) out.push_back(i);
    }
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  std::vector<std::size_t> sorted = out;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ArgumentError("query index listed twice in '" + spec + "'");
  }
  return out;
}

std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

int cmd_solve(const RunManifest& m, std::ostream& out, std::ostream& log) {
  m.validate();
  const SolverConfig cfg = solver_config(m);
  const LoadedData d = load_data(m, log);

  // Queries with no in-vocabulary token never reach the solver.
  std::vector<SparseVector> histograms;
  std::vector<std::size_t> solved;  // positions in d.queries
  int status = exit_ok;
  for (std::size_t q = 0; q < d.queries.size(); ++q) {
    try {
      histograms.push_back(build_histogram(d.queries[q], d.emb.vocab).weights);
      solved.push_back(q);
    } catch (const EmptyInputError&) {
      log << "query " << d.queries[q].doc_id << ": no in-vocabulary tokens\n";
      status = std::max<int>(status, exit_io);
    }
  }

  const auto outcomes = sinkhorn_wmd_batch(histograms, d.c, d.emb.vecs, cfg);

  Sink sink(m.output_path, out);
  std::ostream& csv = sink.get();
  csv << "query_id,doc_id,wmd,iterations\n";
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    const std::size_t query_id = d.queries[solved[k]].doc_id;
    const BatchOutcome& o = outcomes[k];
    if (!o.ok()) {
      log << "query " << query_id << ": " << o.message << '\n';
      try {
        std::rethrow_exception(o.error);
      } catch (const NumericalError&) {
        status = std::max<int>(status, exit_numerical);
      } catch (...) {
        status = std::max<int>(status, exit_io);
      }
      continue;
    }
    const SolverResult& r = *o.result;
    for (std::size_t j = 0; j < r.wmd.size(); ++j) {
      csv << query_id << ',' << d.targets[j].doc_id << ',' << format_double(r.wmd[j]) << ','
          << r.iterations_run << '\n';
    }
    log << "query " << query_id << ": " << r.query_words.size() << " words, "
        << r.iterations_run << " iterations\n";
    print_timings(log, r.timings);
  }
  sink.finish();
  return status;
}

int cmd_bench(const RunManifest& m, std::ostream& out, std::ostream& log) {
  m.validate();
  const SolverConfig base = solver_config(m);

  DenseMatrix vecs;
  CsrMatrix c;
  std::vector<double> r_full;
  if (m.embedding_path.empty()) {
    SyntheticSpec spec;
    spec.vocab = m.synth_vocab;
    spec.docs = m.synth_docs;
    spec.density = m.synth_density;
    spec.query_words = m.synth_query_words;
    spec.dim = m.synth_dim;
    spec.seed = m.seed;
    SyntheticInstance inst = make_synthetic(spec);
    vecs = std::move(inst.vecs);
    c = std::move(inst.c);
    r_full = std::move(inst.r_full);
    log << "synthetic data: V=" << spec.vocab << " N=" << spec.docs << " nnz=" << c.nnz()
        << " v_r=" << spec.query_words << " dim=" << spec.dim << '\n';
  } else {
    LoadedData d = load_data(m, log);
    r_full = build_histogram(d.queries.at(0), d.emb.vocab).weights.to_dense();
    vecs = std::move(d.emb.vecs);
    c = std::move(d.c);
  }

  std::vector<std::size_t> sweep;
  for (std::size_t p = 1; p < m.workers; p *= 2) sweep.push_back(p);
  sweep.push_back(m.workers);

  struct Row {
    const char* variant;
    std::size_t workers;
    PhaseTimings median;
  };
  using Samples = std::map<std::string, std::vector<double>>;
  auto add_sample = [](Samples& s, const PhaseTimings& t) {
    s["select"].push_back(t.select);
    s["distance"].push_back(t.distance);
    s["precompute"].push_back(t.precompute);
    s["init"].push_back(t.init);
    s["loop"].push_back(t.loop);
    s["final_step"].push_back(t.final_step);
    s["total"].push_back(t.total);
  };
  auto medians = [](Samples& s) {
    PhaseTimings t;
    t.select = median(s["select"]);
    t.distance = median(s["distance"]);
    t.precompute = median(s["precompute"]);
    t.init = median(s["init"]);
    t.loop = median(s["loop"]);
    t.final_step = median(s["final_step"]);
    t.total = median(s["total"]);
    return t;
  };

  std::vector<Row> fused_rows, unfused_rows;
  for (std::size_t p : sweep) {
    SolverConfig cfg = base;
    cfg.workers = p;
    const KernelContext ctx = make_kernel_context(c, p, accumulation_of(m));
    SinkhornWorkspace ws;
    auto solve = [&](KernelVariant v) { return run_sinkhorn(r_full, c, vecs, cfg, v, ws, ctx); };
    solve(KernelVariant::fused);  // warm-up
    solve(KernelVariant::unfused);
    // Alternate which variant goes first so drift in machine load hits both.
    Samples fused, unfused;
    for (std::size_t rep = 0; rep < m.repeats; ++rep) {
      if (rep % 2 == 0) {
        add_sample(fused, solve(KernelVariant::fused).timings);
        add_sample(unfused, solve(KernelVariant::unfused).timings);
      } else {
        add_sample(unfused, solve(KernelVariant::unfused).timings);
        add_sample(fused, solve(KernelVariant::fused).timings);
      }
    }
    fused_rows.push_back({"fused", p, medians(fused)});
    unfused_rows.push_back({"unfused", p, medians(unfused)});
  }
  std::vector<Row> rows = fused_rows;
  rows.insert(rows.end(), unfused_rows.begin(), unfused_rows.end());

  auto find = [&](const char* variant, std::size_t p) -> const PhaseTimings& {
    for (const Row& r : rows) {
      if (std::string_view(r.variant) == variant && r.workers == p) return r.median;
    }
    throw std::logic_error("missing bench row");
  };

  out << "median of " << m.repeats << " runs, seconds\n";
  out << std::left << std::setw(8) << "workers" << std::setw(14) << "fused_total"
      << std::setw(14) << "unfused_total" << std::setw(12) << "fused_loop" << std::setw(14)
      << "unfused_loop" << std::setw(16) << "fused/unfused" << "speedup_vs_1\n";
  const double serial_total = find("fused", sweep.front()).total;
  for (std::size_t p : sweep) {
    const PhaseTimings& f = find("fused", p);
    const PhaseTimings& u = find("unfused", p);
    out << std::left << std::setw(8) << p << std::setw(14) << f.total << std::setw(14) << u.total
        << std::setw(12) << f.loop << std::setw(14) << u.loop << std::setw(16)
        << f.total / u.total << serial_total / f.total << '\n';
  }
  const PhaseTimings& f_max = find("fused", sweep.back());
  const PhaseTimings& u_max = find("unfused", sweep.back());
  out << "fusion speedup at " << sweep.back() << " workers: " << u_max.total / f_max.total
      << "x\n";
  out << "strong scaling 1 -> " << sweep.back() << " workers: " << serial_total / f_max.total
      << "x\n";

  Sink sink(m.output_path, out);
  std::ostream& csv = sink.get();
  if (m.output_path.empty()) csv << '\n';
  csv << "variant,workers,phase,seconds\n";
  for (const Row& r : rows) {
    const std::pair<const char*, double> phases[] = {
        {"select", r.median.select},         {"distance", r.median.distance},
        {"precompute", r.median.precompute}, {"init", r.median.init},
        {"loop", r.median.loop},             {"final_step", r.median.final_step},
        {"total", r.median.total}};
    for (const auto& [phase, seconds] : phases) {
      csv << r.variant << ',' << r.workers << ',' << phase << ',' << format_double(seconds) << '\n';
    }
  }
  sink.finish();
  return exit_ok;
}

int cmd_validate(const RunManifest& m, std::ostream& out, std::ostream& /*log*/) {
  m.validate();

  struct Check {
    explicit Check(std::string n) : name(std::move(n)) {}
    std::string name;
    bool pass = true;
    double max_rel = 0.0;
    std::vector<std::string> notes;
    void record(double rel, double bound, const std::string& where) {
      max_rel = std::max(max_rel, rel);
      if (!(rel <= bound)) {
        pass = false;
        notes.push_back(where);
      }
    }
  };
  Check csr{"csr_structure"}, dense_fused{"dense_vs_fused"}, dense_unfused{"dense_vs_unfused"},
      fusion{"fusion_exactness"}, threads{"deterministic_threads"}, parts{"partitions"},
      nonneg{"non_negative"};

  auto rel = [](double a, double b) {
    return a == b ? 0.0 : std::abs(a - b) / std::max(std::abs(a), std::abs(b));
  };
  auto max_rel = [&](std::span<const double> a, std::span<const double> b) {
    double worst = a.size() == b.size() ? 0.0 : 1.0;
    for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) {
      worst = std::max(worst, rel(a[k], b[k]));
    }
    return worst;
  };

  std::mt19937_64 rng(m.seed);
  for (std::size_t k = 0; k < m.instances; ++k) {
    const std::string where = "instance " + std::to_string(k);
    SyntheticSpec spec;
    spec.vocab = std::uniform_int_distribution<std::size_t>(8, 64)(rng);
    spec.docs = std::uniform_int_distribution<std::size_t>(1, 16)(rng);
    spec.query_words = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    spec.dim = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    spec.density = 0.15;
    spec.seed = rng();
    SyntheticInstance inst = make_synthetic(spec);
    if (m.inject_corrupt_csr && k == 0) inst.c.col_idx.front() = inst.c.n_cols;

    const auto violations = csr_validate(inst.c);
    if (!violations.empty()) {
      csr.pass = false;
      for (const auto& v : violations) csr.notes.push_back(where + ": " + v.message);
      continue;
    }

    for (std::size_t p = 1; p <= 8; ++p) {
      std::size_t expected_begin = 0;
      for (const NnzPartition& part : nnz_partition(inst.c.row_ptr, inst.c.nnz(), p)) {
        const bool balanced = part.size() == inst.c.nnz() / p ||
                              part.size() == (inst.c.nnz() + p - 1) / p;
        const bool contiguous = part.nnz_begin == expected_begin;
        const bool located =
            part.size() == 0 || (inst.c.row_ptr[part.start_row] <= part.nnz_begin &&
                                 part.nnz_begin < inst.c.row_ptr[part.start_row + 1]);
        parts.record(balanced && contiguous && located ? 0.0 : 1.0, 0.0,
                     where + ", p=" + std::to_string(p));
        expected_begin = part.nnz_end;
      }
      parts.record(expected_begin == inst.c.nnz() ? 0.0 : 1.0, 0.0, where + " coverage");
    }

    SolverConfig cfg = solver_config(m);
    cfg.lambda = m.lambda.value_or(k % 2 ? 10.0 : 1.0);
    cfg.workers = 1;
    cfg.deterministic = true;
    const auto dense = sinkhorn_wmd_dense(inst.r_full, csr_to_dense(inst.c), inst.vecs, cfg);
    const auto fused = sinkhorn_wmd(inst.r_full, inst.c, inst.vecs, cfg).wmd;
    const auto unfused = unfused_sparse_wmd(inst.r_full, inst.c, inst.vecs, cfg);
    dense_fused.record(max_rel(fused, dense), 1e-9, where);
    dense_unfused.record(max_rel(unfused, dense), 1e-9, where);
    for (double d : fused) nonneg.record(d >= 0.0 ? 0.0 : 1.0, 0.0, where);

    for (std::size_t p : {2, 4}) {
      SolverConfig par = cfg;
      par.workers = p;
      threads.record(fused == sinkhorn_wmd(inst.r_full, inst.c, inst.vecs, par).wmd ? 0.0 : 1.0,
                     0.0, where + ", p=" + std::to_string(p));
    }

    const QuerySelection q = select_nonzero(inst.r_full);
    const SinkhornMatrices mats =
        precompute(euclidean_rows(inst.vecs, q.sel), q.r, cfg.lambda);
    DenseMatrix u(q.sel.size(), inst.c.n_cols);
    std::uniform_real_distribution<double> value(0.5, 4.0);
    for (std::size_t e = 0; e < u.size(); ++e) u.data()[e] = value(rng);
    const KernelContext ctx = make_kernel_context(inst.c, 1);
    DenseMatrix x(q.sel.size(), inst.c.n_cols, 0.0);
    fused_iteration(inst.c, mats, u, x, ctx);
    const DenseMatrix composed =
        spmm(inst.c, sddmm(inst.c, mats.K_T, u, ctx), mats.K_over_r_T, ctx);
    fusion.record(max_rel(x.values(), composed.values()), 0.0, where);
  }

  bool all_pass = true;
  out << "validating " << m.instances << " seeded instances (seed " << m.seed << ")\n";
  for (const Check* c : {&csr, &dense_fused, &dense_unfused, &fusion, &threads, &parts, &nonneg}) {
    all_pass = all_pass && c->pass;
    out << std::left << std::setw(24) << c->name << (c->pass ? "PASS" : "FAIL")
        << "  max_rel_err=" << format_double(c->max_rel) << '\n';
    for (std::size_t n = 0; n < std::min<std::size_t>(c->notes.size(), 5); ++n) {
      out << "    " << c->notes[n] << '\n';
    }
  }
  out << (all_pass ? "all checks passed\n" : "validation FAILED\n");
  return all_pass ? exit_ok : exit_validation;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& log) {
  RunManifest m;
  m.workers = hardware_workers();

  CLI::App app{"Sinkhorn word mover's distance with fused sparse kernels"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--embeddings", m.embedding_path, "word vectors, text format");
    sub->add_option("--corpus", m.corpus_path, "one document per line");
    sub->add_option("--queries", m.queries, "corpus line indices, e.g. 0-9,12");
    sub->add_option("--query-file", m.query_file, "one query document per line");
    sub->add_option("--stopwords", m.stopwords_path, "one stop-word per line");
    sub->add_option("--vocab-limit", m.vocab_limit, "keep the first N embeddings");
    sub->add_option("--max-docs", m.max_docs, "read at most N corpus lines");
    sub->add_flag("--label-prefix", m.label_prefix, "strip text up to the first comma");
    sub->add_flag("--drop-empty", m.drop_empty, "skip documents with no known word");
    sub->add_option("--max-iter", m.max_iter, "Sinkhorn iterations")->capture_default_str();
    sub->add_option("--tol", m.tol, "stop once max |x change| falls below this");
    sub->add_option("--workers", m.workers, "worker threads")->capture_default_str();
    sub->add_flag("--deterministic", m.deterministic, "bitwise-reproducible accumulation");
    sub->add_option("--out", m.output_path, "output CSV (default stdout)");
    sub->add_option("--seed", m.seed, "random seed")->capture_default_str();
  };

  CLI::App* solve = app.add_subcommand("solve", "distances from each query to every document");
  add_common(solve);
  solve->add_option("--lambda", m.lambda, "entropy regularization (10 is a common choice)")
      ->required();

  CLI::App* bench = app.add_subcommand("bench", "fused vs unfused timing over a worker sweep");
  add_common(bench);
  bench->add_option("--lambda", m.lambda, "entropy regularization")->default_str("10");
  bench->add_option("--repeats", m.repeats, "runs per setting")->capture_default_str();
  bench->add_option("--vocab", m.synth_vocab, "synthetic vocabulary size")->capture_default_str();
  bench->add_option("--docs", m.synth_docs, "synthetic documents")->capture_default_str();
  bench->add_option("--density", m.synth_density, "synthetic corpus density")
      ->capture_default_str();
  bench->add_option("--query-words", m.synth_query_words, "synthetic query length")
      ->capture_default_str();
  bench->add_option("--dim", m.synth_dim, "synthetic embedding dimension")->capture_default_str();

  CLI::App* validate = app.add_subcommand("validate", "self-check on seeded random instances");
  add_common(validate);
  validate->add_option("--lambda", m.lambda, "entropy regularization (default alternates 1, 10)");
  validate->add_option("--instances", m.instances, "random instances")->capture_default_str();
  validate->add_flag("--inject-corrupt-csr", m.inject_corrupt_csr, "test hook");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, log);
    return code == 0 ? exit_ok : exit_validation;
  }

  try {
    if (solve->parsed()) {
      m.mode = Mode::solve;
      return cmd_solve(m, out, log);
    }
    if (bench->parsed()) {
      m.mode = Mode::bench;
      return cmd_bench(m, out, log);
    }
    m.mode = Mode::validate;
    return cmd_validate(m, out, log);
  } catch (const ArgumentError& e) {
    log << "error: " << e.what() << '\n';
    return exit_validation;
  } catch (const NumericalError& e) {
    log << "numerical error: " << e.what() << '\n';
    return exit_numerical;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return exit_io;
  }
}

}  // namespace wmd::cli
