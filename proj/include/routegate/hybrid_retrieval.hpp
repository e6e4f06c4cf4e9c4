#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "routegate/experience_memory.hpp"

namespace routegate {

struct RetrievalConfig {
  std::size_t k = 5;
  // Weight of the sparse (BM25) component in the fused score.
  double alpha = 0.5;
  double bm25_k1 = 1.2;
  double bm25_b = 0.75;
  std::size_t embed_dim = 256;

  bool operator==(const RetrievalConfig&) const = default;
};

/// Throws ConfigInvalid naming the offending retrieval.* key.
void validate(const RetrievalConfig& config);

/// Lowercased word tokens. Any non-alphanumeric code point separates words;
/// non-ASCII letters are kept (with simple case folding for Latin-1,
/// Latin Extended-A, Greek and Cyrillic).
std::vector<std::string> tokenize(std::string_view text);

struct Embedding {
  std::vector<double> values;
  // True when the text produced no trigrams; values is then all zeros.
  bool empty = false;
};

/// Hashed character-trigram TF-IDF embedder. Before fit() every bucket has
/// IDF 1, i.e. the vector is plain trigram term frequency.
class TrigramEmbedder {
 public:
  explicit TrigramEmbedder(std::size_t dim = 256);

  void fit(std::span<const std::string> documents);
  Embedding embed(std::string_view text) const;

  std::size_t dim() const { return idf_.size(); }
  std::span<const double> idf() const { return idf_; }
  void set_idf(std::vector<double> idf) { idf_ = std::move(idf); }

  bool operator==(const TrigramEmbedder&) const = default;

 private:
  std::vector<std::uint32_t> bucket_counts(std::string_view text) const;

  std::vector<double> idf_;
};

Embedding embed_text(std::string_view text, std::size_t dim = 256);

/// u.v / (|u| |v|), 0 when either norm is 0. Throws DimensionMismatch.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

struct DocumentStats {
  std::map<std::string, std::uint32_t> term_freq;
  std::size_t length = 0;

  bool operator==(const DocumentStats&) const = default;
};

/// Sparse and dense structures over the question text of every memory record.
/// Immutable once built.
class Index {
 public:
  static constexpr int kFormatVersion = 1;

  std::size_t size() const { return ids_.size(); }
  const RetrievalConfig& config() const { return config_; }
  std::span<const std::string> ids() const { return ids_; }
  std::optional<std::size_t> position(std::string_view id) const;

  const DocumentStats& document(std::size_t i) const { return docs_[i]; }
  std::uint32_t doc_freq(const std::string& term) const;
  double avg_doc_length() const { return avg_doc_length_; }
  std::span<const double> vector(std::size_t i) const { return vectors_[i]; }
  const TrigramEmbedder& embedder() const { return embedder_; }

  bool operator==(const Index&) const = default;

 private:
  friend Index build_index(const Memory& memory, const RetrievalConfig& config);
  friend Index load_index(const std::filesystem::path& path);

  RetrievalConfig config_;
  std::vector<std::string> ids_;
  std::vector<DocumentStats> docs_;
  std::map<std::string, std::uint32_t> doc_freq_;
  double avg_doc_length_ = 0.0;
  std::vector<std::vector<double>> vectors_;
  TrigramEmbedder embedder_;
};

/// Throws EmptyMemory, or ConfigInvalid for a bad config.
Index build_index(const Memory& memory, const RetrievalConfig& config = {});

/// Okapi BM25 of the record's question for the distinct query terms, using
/// idf = ln(1 + (N - df + 0.5) / (df + 0.5)). Throws UnknownRecord.
double bm25_score(std::span<const std::string> query_tokens, std::string_view record_id,
                  const Index& index);

struct RetrievedCase {
  std::string record_id;
  double sparse_score = 0.0;
  double dense_score = 0.0;
  double fused_score = 0.0;
  std::size_t rank = 0;
};

/// Exhaustive hybrid scoring. fused = alpha * minmax(bm25) + (1 - alpha) * (cos + 1) / 2,
/// where an all-equal BM25 pool normalizes to 0.5. Sorted by fused score
/// descending, then record id ascending. Throws InvalidK for k == 0.
std::vector<RetrievedCase> retrieve_top_k(const Index& index, std::string_view query, std::size_t k);
std::vector<RetrievedCase> retrieve_top_k(const Index& index, std::string_view query, std::size_t k,
                                          double alpha);

void save_index(const Index& index, const std::filesystem::path& path);
/// Throws FileNotFound, or IndexFormat on a wrong format version or bad content.
Index load_index(const std::filesystem::path& path);

/// True when the index was built over exactly the memory's records, in order.
bool index_matches(const Index& index, const Memory& memory);

}  // namespace routegate
