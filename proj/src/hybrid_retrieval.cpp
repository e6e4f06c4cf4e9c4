#include "routegate/hybrid_retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

namespace routegate {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Splits valid UTF-8 into one string_view per code point.
std::vector<std::string_view> code_points(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= s.size(); ++i) {
    if (i == s.size() || (static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
      out.push_back(s.substr(start, i - start));
      start = i;
    }
  }
  return out;
}

}  // namespace

void validate(const RetrievalConfig& config) {
  if (config.k < 1) fail(ErrorCode::ConfigInvalid, "retrieval.k must be >= 1");
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0))
    fail(ErrorCode::ConfigInvalid, fmt::format("retrieval.alpha must be in [0, 1], got {}", config.alpha));
  if (!(config.bm25_k1 >= 0.0) || !std::isfinite(config.bm25_k1))
    fail(ErrorCode::ConfigInvalid, fmt::format("retrieval.bm25_k1 must be >= 0, got {}", config.bm25_k1));
  if (!(config.bm25_b >= 0.0 && config.bm25_b <= 1.0))
    fail(ErrorCode::ConfigInvalid, fmt::format("retrieval.bm25_b must be in [0, 1], got {}", config.bm25_b));
  if (config.embed_dim < 1) fail(ErrorCode::ConfigInvalid, "retrieval.embed_dim must be >= 1");
}

TrigramEmbedder::TrigramEmbedder(std::size_t dim) : idf_(dim, 1.0) {
  if (dim == 0) fail(ErrorCode::ConfigInvalid, "embedding dimension must be >= 1");
}

std::vector<std::uint32_t> TrigramEmbedder::bucket_counts(std::string_view text) const {
  std::vector<std::uint32_t> counts(dim(), 0);
  for (const std::string& token : tokenize(text)) {
    std::string padded = " " + token + " ";
    auto cps = code_points(padded);
    for (std::size_t i = 0; i + 2 < cps.size(); ++i) {
      const char* begin = cps[i].data();
      const char* end = cps[i + 2].data() + cps[i + 2].size();
      ++counts[fnv1a(std::string_view(begin, static_cast<std::size_t>(end - begin))) % dim()];
    }
  }
  return counts;
}

void TrigramEmbedder::fit(std::span<const std::string> documents) {
  std::vector<std::uint32_t> df(dim(), 0);
  for (const auto& doc : documents) {
    auto counts = bucket_counts(doc);
    for (std::size_t j = 0; j < counts.size(); ++j)
      if (counts[j] > 0) ++df[j];
  }
  const double n = static_cast<double>(documents.size());
  for (std::size_t j = 0; j < df.size(); ++j)
    idf_[j] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[j]))) + 1.0;
}

Embedding TrigramEmbedder::embed(std::string_view text) const {
  auto counts = bucket_counts(text);
  Embedding e;
  e.values.assign(dim(), 0.0);
  double norm2 = 0.0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    e.values[j] = static_cast<double>(counts[j]) * idf_[j];
    norm2 += e.values[j] * e.values[j];
  }
  if (norm2 == 0.0) {
    e.empty = true;
    return e;
  }
  const double norm = std::sqrt(norm2);
  for (double& v : e.values) v /= norm;
  return e;
}

Embedding embed_text(std::string_view text, std::size_t dim) { return TrigramEmbedder(dim).embed(text); }

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    fail(ErrorCode::DimensionMismatch, fmt::format("vector sizes differ: {} vs {}", u.size(), v.size()));
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

std::optional<std::size_t> Index::position(std::string_view id) const {
  auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

std::uint32_t Index::doc_freq(const std::string& term) const {
  auto it = doc_freq_.find(term);
  return it == doc_freq_.end() ? 0 : it->second;
}

Index build_index(const Memory& memory, const RetrievalConfig& config) {
  validate(config);
  if (memory.empty()) fail(ErrorCode::EmptyMemory, "cannot index an empty memory");

  Index index;
  index.config_ = config;
  index.embedder_ = TrigramEmbedder(config.embed_dim);

  std::vector<std::string> questions;
  std::size_t total_length = 0;
  for (const auto& record : memory.records()) {
    index.ids_.push_back(record.id);
    questions.push_back(record.question);
    DocumentStats doc;
    for (auto& token : tokenize(record.question)) {
      ++doc.term_freq[token];
      ++doc.length;
    }
    for (const auto& [term, _] : doc.term_freq) ++index.doc_freq_[term];
    total_length += doc.length;
    index.docs_.push_back(std::move(doc));
  }
  index.avg_doc_length_ = static_cast<double>(total_length) / static_cast<double>(memory.size());

  index.embedder_.fit(questions);
  for (const auto& q : questions) index.vectors_.push_back(index.embedder_.embed(q).values);
  return index;
}

namespace {

double bm25_at(std::span<const std::string> distinct_terms, std::size_t pos, const Index& index) {
  const auto& cfg = index.config();
  const auto& doc = index.document(pos);
  const double n = static_cast<double>(index.size());
  const double avgdl = index.avg_doc_length();
  const double length_norm =
      avgdl > 0.0 ? 1.0 - cfg.bm25_b + cfg.bm25_b * static_cast<double>(doc.length) / avgdl : 1.0;
  double score = 0.0;
  for (const auto& term : distinct_terms) {
    auto it = doc.term_freq.find(term);
    if (it == doc.term_freq.end()) continue;
    const double df = index.doc_freq(term);
    const double idf = std::max(0.0, std::log(1.0 + (n - df + 0.5) / (df + 0.5)));
    const double tf = it->second;
    score += idf * (tf * (cfg.bm25_k1 + 1.0)) / (tf + cfg.bm25_k1 * length_norm);
  }
  return score;
}

std::vector<std::string> distinct(std::span<const std::string> tokens) {
  std::set<std::string> seen(tokens.begin(), tokens.end());
  return {seen.begin(), seen.end()};
}

}  // namespace

double bm25_score(std::span<const std::string> query_tokens, std::string_view record_id,
                  const Index& index) {
  auto pos = index.position(record_id);
  if (!pos) fail(ErrorCode::UnknownRecord, fmt::format("record '{}' is not indexed", record_id));
  return bm25_at(distinct(query_tokens), *pos, index);
}

std::vector<RetrievedCase> retrieve_top_k(const Index& index, std::string_view query, std::size_t k) {
  return retrieve_top_k(index, query, k, index.config().alpha);
}

std::vector<RetrievedCase> retrieve_top_k(const Index& index, std::string_view query, std::size_t k,
                                          double alpha) {
  if (k < 1) fail(ErrorCode::InvalidK, "k must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    fail(ErrorCode::ConfigInvalid, fmt::format("retrieval.alpha must be in [0, 1], got {}", alpha));
  const std::size_t n = index.size();
  if (n == 0) return {};

  const auto terms = distinct(tokenize(query));
  const auto query_vec = index.embedder().embed(query);

  std::vector<RetrievedCase> pool(n);
  for (std::size_t i = 0; i < n; ++i) {
    pool[i].record_id = index.ids()[i];
    pool[i].sparse_score = bm25_at(terms, i, index);
    pool[i].dense_score = cosine_similarity(query_vec.values, index.vector(i));
  }

  auto [lo, hi] = std::minmax_element(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
    return a.sparse_score < b.sparse_score;
  });
  const double min_sparse = lo->sparse_score;
  const double range = hi->sparse_score - min_sparse;
  for (auto& c : pool) {
    const double sparse_norm = range > 0.0 ? (c.sparse_score - min_sparse) / range : 0.5;
    const double dense_norm = (c.dense_score + 1.0) / 2.0;
    c.fused_score = std::clamp(alpha * sparse_norm + (1.0 - alpha) * dense_norm, 0.0, 1.0);
  }

  const std::size_t take = std::min(k, n);
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(),
                    [](const RetrievedCase& a, const RetrievedCase& b) {
                      if (a.fused_score != b.fused_score) return a.fused_score > b.fused_score;
                      return a.record_id < b.record_id;
                    });
  pool.resize(take);
  for (std::size_t i = 0; i < take; ++i) pool[i].rank = i + 1;
  return pool;
}

void save_index(const Index& index, const std::filesystem::path& path) {
  json docs = json::array();
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& d = index.document(i);
    docs.push_back({{"length", d.length}, {"term_freq", d.term_freq}});
  }
  json vectors = json::array();
  for (std::size_t i = 0; i < index.size(); ++i) {
    auto v = index.vector(i);
    vectors.push_back(std::vector<double>(v.begin(), v.end()));
  }
  const auto& cfg = index.config();
  auto idf = index.embedder().idf();
  json doc = {{"format", "routegate-index"},
              {"format_version", Index::kFormatVersion},
              {"config",
               {{"k", cfg.k},
                {"alpha", cfg.alpha},
                {"bm25_k1", cfg.bm25_k1},
                {"bm25_b", cfg.bm25_b},
                {"embed_dim", cfg.embed_dim}}},
              {"ids", std::vector<std::string>(index.ids().begin(), index.ids().end())},
              {"documents", docs},
              {"vectors", vectors},
              {"idf", std::vector<double>(idf.begin(), idf.end())}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, fmt::format("cannot write index file '{}'", path.string()));
  out << doc.dump() << '\n';
}

Index load_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::FileNotFound, fmt::format("cannot open index file '{}'", path.string()));
  Index index;
  try {
    json doc = json::parse(in);
    if (doc.value("format", "") != "routegate-index")
      fail(ErrorCode::IndexFormat, "not a routegate index file");
    if (!doc.contains("format_version") || doc["format_version"] != Index::kFormatVersion)
      fail(ErrorCode::IndexFormat,
           fmt::format("unsupported index format_version (expected {})", Index::kFormatVersion));
    const auto& c = doc.at("config");
    index.config_.k = c.at("k").get<std::size_t>();
    index.config_.alpha = c.at("alpha").get<double>();
    index.config_.bm25_k1 = c.at("bm25_k1").get<double>();
    index.config_.bm25_b = c.at("bm25_b").get<double>();
    index.config_.embed_dim = c.at("embed_dim").get<std::size_t>();
    validate(index.config_);
    index.ids_ = doc.at("ids").get<std::vector<std::string>>();
    std::size_t total_length = 0;
    for (const auto& d : doc.at("documents")) {
      DocumentStats stats;
      stats.length = d.at("length").get<std::size_t>();
      stats.term_freq = d.at("term_freq").get<std::map<std::string, std::uint32_t>>();
      for (const auto& [term, _] : stats.term_freq) ++index.doc_freq_[term];
      total_length += stats.length;
      index.docs_.push_back(std::move(stats));
    }
    index.vectors_ = doc.at("vectors").get<std::vector<std::vector<double>>>();
    index.embedder_ = TrigramEmbedder(index.config_.embed_dim);
    auto idf = doc.at("idf").get<std::vector<double>>();
    const std::size_t n = index.ids_.size();
    if (n == 0 || index.docs_.size() != n || index.vectors_.size() != n ||
        idf.size() != index.config_.embed_dim)
      fail(ErrorCode::IndexFormat, "index sections have inconsistent sizes");
    for (const auto& v : index.vectors_) {
      if (v.size() != index.config_.embed_dim) fail(ErrorCode::IndexFormat, "vector dimension mismatch");
    }
    index.embedder_.set_idf(std::move(idf));
    index.avg_doc_length_ = static_cast<double>(total_length) / static_cast<double>(n);
  } catch (const json::exception& e) {
    fail(ErrorCode::IndexFormat, fmt::format("malformed index file '{}': {}", path.string(), e.what()));
  }
  return index;
}

bool index_matches(const Index& index, const Memory& memory) {
  if (index.size() != memory.size()) return false;
  for (std::size_t i = 0; i < memory.size(); ++i) {
    if (index.ids()[i] != memory[i].id) return false;
    DocumentStats expected;
    for (auto& token : tokenize(memory[i].question)) {
      ++expected.term_freq[token];
      ++expected.length;
    }
    if (!(expected == index.document(i))) return false;
  }
  return true;
}

}  // namespace routegate
