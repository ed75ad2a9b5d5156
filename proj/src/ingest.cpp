#include "wmd/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iostream>

#include "wmd/error.hpp"

namespace wmd {

std::size_t Vocabulary::add(const std::string& word) {
  auto [it, inserted] = index_.try_emplace(word, words_.size());
  if (inserted) words_.push_back(word);
  return it->second;
}

std::optional<std::size_t> Vocabulary::find(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_count(std::string_view s, std::size_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

Embeddings load_embeddings(const std::filesystem::path& path,
                           std::optional<std::size_t> vocab_limit) {
  std::ifstream in = open_or_throw(path);

  std::size_t dim = 0;
  bool dim_known = false;
  std::vector<std::string> words;
  std::vector<double> data;
  std::unordered_set<std::string> seen;
  std::size_t duplicates = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (vocab_limit && words.size() >= *vocab_limit) break;
    const auto fields = split_whitespace(line);
    if (fields.empty()) continue;

    if (line_no == 1 && fields.size() == 2) {
      std::size_t count = 0;
      std::size_t header_dim = 0;
      if (parse_count(fields[0], count) && parse_count(fields[1], header_dim)) {
        dim = header_dim;
        dim_known = true;
        continue;
      }
    }

    if (!dim_known) {
      if (fields.size() < 2) throw ParseError("embedding line has no vector components", line_no);
      dim = fields.size() - 1;
      dim_known = true;
    }
    if (fields.size() != dim + 1) {
      throw ParseError("expected " + std::to_string(dim) + " floats, found " +
                           std::to_string(fields.size() - 1),
                       line_no);
    }

    std::string word(fields[0]);
    if (!seen.insert(word).second) {
      ++duplicates;
      continue;
    }
    const std::size_t offset = data.size();
    data.resize(offset + dim);
    for (std::size_t k = 0; k < dim; ++k) {
      if (!parse_double(fields[k + 1], data[offset + k])) {
        throw ParseError("bad float '" + std::string(fields[k + 1]) + "'", line_no);
      }
    }
    words.push_back(std::move(word));
  }
  if (in.bad()) throw IoError("read error on " + path.string());

  Embeddings out;
  out.vocab = Vocabulary(dim);
  for (const auto& w : words) out.vocab.add(w);
  out.vecs = DenseMatrix(words.size(), dim, std::move(data));
  out.duplicates_skipped = duplicates;
  if (duplicates > 0) {
    std::cerr << "warning: " << duplicates << " duplicate word(s) in " << path.string()
              << " ignored\n";
  }
  return out;
}

const StopWords& default_stopwords() {
  static const StopWords words = {
      "a",       "about",  "above",   "after",   "again",  "against", "all",    "am",
      "an",      "and",    "any",     "are",     "as",     "at",      "be",     "because",
      "been",    "before", "being",   "below",   "between", "both",   "but",    "by",
      "can",     "could",  "did",     "do",      "does",   "doing",   "down",   "during",
      "each",    "few",    "for",     "from",    "further", "had",    "has",    "have",
      "having",  "he",     "her",     "here",    "hers",   "herself", "him",    "himself",
      "his",     "how",    "i",       "if",      "in",     "into",    "is",     "it",
      "its",     "itself", "just",    "me",      "more",   "most",    "my",     "myself",
      "no",      "nor",    "not",     "now",     "of",     "off",     "on",     "once",
      "only",    "or",     "other",   "our",     "ours",   "ourselves", "out",  "over",
      "own",     "s",      "same",    "she",     "should", "so",      "some",   "such",
      "t",       "than",   "that",    "the",     "their",  "theirs",  "them",   "themselves",
      "then",    "there",  "these",   "they",    "this",   "those",   "through", "to",
      "too",     "under",  "until",   "up",      "very",   "was",     "we",     "were",
      "what",    "when",   "where",   "which",   "while",  "who",     "whom",   "why",
      "will",    "with",   "would",   "you",     "your",   "yours",   "yourself", "yourselves",
  };
  return words;
}

StopWords load_stopwords(const std::filesystem::path& path) {
  std::ifstream in = open_or_throw(path);
  StopWords out;
  std::string line;
  while (std::getline(in, line)) {
    for (auto field : split_whitespace(line)) {
      std::string w(field);
      std::transform(w.begin(), w.end(), w.begin(),
                     [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
      out.insert(std::move(w));
    }
  }
  return out;
}

std::vector<std::string> preprocess(std::string_view raw_text, const StopWords& stopwords) {
  auto is_word_char = [](unsigned char ch) { return ch >= 0x80 || std::isalnum(ch); };

  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && !stopwords.contains(current)) tokens.push_back(current);
    current.clear();
  };
  for (char raw : raw_text) {
    const auto ch = static_cast<unsigned char>(raw);
    if (is_word_char(ch)) {
      current.push_back(static_cast<char>(ch < 0x80 ? std::tolower(ch) : ch));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::vector<Document> load_corpus(const std::filesystem::path& path, const StopWords& stopwords,
                                  const CorpusOptions& options) {
  std::ifstream in = open_or_throw(path);
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    if (options.max_docs && docs.size() >= *options.max_docs) break;
    std::string_view text = line;
    if (options.label_prefix) {
      const auto comma = text.find(',');
      text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    }
    docs.push_back({line_no, preprocess(text, stopwords)});
    ++line_no;
  }
  if (in.bad()) throw IoError("read error on " + path.string());
  return docs;
}

Histogram build_histogram(const Document& doc, const Vocabulary& vocab) {
  Histogram out;
  std::vector<std::size_t> ids;
  ids.reserve(doc.tokens.size());
  for (const auto& token : doc.tokens) {
    if (auto id = vocab.find(token)) {
      ids.push_back(*id);
    } else {
      ++out.skipped_tokens;
    }
  }
  if (ids.empty()) {
    throw EmptyInputError("document " + std::to_string(doc.doc_id) +
                          " has no in-vocabulary tokens");
  }
  std::sort(ids.begin(), ids.end());

  const auto total = static_cast<double>(ids.size());
  out.weights.length = vocab.size();
  for (std::size_t k = 0; k < ids.size();) {
    std::size_t run = k;
    while (run < ids.size() && ids[run] == ids[k]) ++run;
    out.weights.indices.push_back(ids[k]);
    out.weights.values.push_back(static_cast<double>(run - k) / total);
    k = run;
  }
  return out;
}

CsrMatrix build_corpus_matrix(const std::vector<Document>& docs, const Vocabulary& vocab) {
  std::vector<Triplet> entries;
  for (std::size_t j = 0; j < docs.size(); ++j) {
    const Histogram h = build_histogram(docs[j], vocab);
    for (std::size_t k = 0; k < h.weights.nnz(); ++k) {
      entries.push_back({h.weights.indices[k], j, h.weights.values[k]});
    }
  }
  return csr_from_triplets(entries, vocab.size(), docs.size());
}

}  // namespace wmd
