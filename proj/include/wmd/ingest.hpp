#pragma once

// Loading embeddings and documents, and turning documents into normalized
// bag-of-words histograms.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "wmd/sparse.hpp"

namespace wmd {

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::size_t embedding_dim) : embedding_dim_(embedding_dim) {}

  /// Adds a word and returns its id; an existing word keeps its id.
  std::size_t add(const std::string& word);
  std::optional<std::size_t> find(const std::string& word) const;

  const std::string& word(std::size_t id) const { return words_.at(id); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  std::size_t size() const noexcept { return words_.size(); }
  std::size_t embedding_dim() const noexcept { return embedding_dim_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t embedding_dim_ = 0;
};

struct Document {
  std::size_t doc_id = 0;
  std::vector<std::string> tokens;
};

using StopWords = std::unordered_set<std::string>;

struct Embeddings {
  Vocabulary vocab;
  DenseMatrix vecs;  // one row per word id
  std::size_t duplicates_skipped = 0;
};

/// Reads the whitespace-separated text format: an optional "count dim"
/// header, then a word followed by dim floats per line. Only the first
/// `vocab_limit` distinct words are kept. Repeated words keep their first
/// vector and are tallied in `duplicates_skipped`.
Embeddings load_embeddings(const std::filesystem::path& path,
                           std::optional<std::size_t> vocab_limit = std::nullopt);

/// Built-in English stop-word list (lowercase).
const StopWords& default_stopwords();

/// One word per line; blank lines ignored; words are lowercased.
StopWords load_stopwords(const std::filesystem::path& path);

/// Lowercases ASCII, splits on runs of characters that are not ASCII letters
/// or digits, and drops stop-words. Bytes >= 0x80 count as word characters so
/// UTF-8 words stay whole.
std::vector<std::string> preprocess(std::string_view raw_text, const StopWords& stopwords);

struct CorpusOptions {
  /// Strip a leading class label ("label,text") up to the first comma.
  bool label_prefix = false;
  std::optional<std::size_t> max_docs;
};

/// One document per line; the zero-based line number becomes the doc_id.
std::vector<Document> load_corpus(const std::filesystem::path& path, const StopWords& stopwords,
                                  const CorpusOptions& options = {});

struct Histogram {
  SparseVector weights;
  std::size_t skipped_tokens = 0;  // out-of-vocabulary tokens
};

/// Normalized in-vocabulary word counts. Throws EmptyInputError when no token
/// is in the vocabulary.
Histogram build_histogram(const Document& doc, const Vocabulary& vocab);

/// V x N matrix whose column j is the histogram of docs[j]. Throws
/// EmptyInputError naming the doc_id of the first empty document.
CsrMatrix build_corpus_matrix(const std::vector<Document>& docs, const Vocabulary& vocab);

}  // namespace wmd
