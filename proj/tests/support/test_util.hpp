#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "routegate/experience_memory.hpp"
#include "routegate/hybrid_retrieval.hpp"

#ifndef ROUTEGATE_FIXTURE_DIR
#error "ROUTEGATE_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace routegate::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(ROUTEGATE_FIXTURE_DIR) / name;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("routegate-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline ExperienceRecord make_record(std::string id, std::string question, double llm_s = 1.0,
                                    double agent_s = 100.0) {
  ExperienceRecord r;
  r.id = std::move(id);
  r.question = std::move(question);
  r.llm_answer = "llm answer for " + r.id;
  r.llm_latency_s = llm_s;
  r.agent_answer = "agent answer for " + r.id;
  r.agent_latency_s = agent_s;
  return r;
}

inline Memory memory_of(const std::vector<std::string>& questions) {
  Memory m;
  for (std::size_t i = 0; i < questions.size(); ++i) m.append(make_record(auto_record_id(i + 1), questions[i]));
  return m;
}

inline const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> words = {
      "what",   "is",      "the",     "capital", "of",      "france",  "binary", "search",  "tree",
      "sort",   "array",   "energy",  "plant",   "light",   "revolution", "war", "year",   "who",
      "wrote",  "novel",   "compute", "integral", "prime",  "number",  "river", "longest", "city",
      "agent",  "tool",    "browse",  "paper",   "GAIA",    "MMLU",    "2024",  "x2",      "Ünïcödé",
      "naïve",  "日本",    "λ",       "émigré",  "data",    "model",   "fast",  "slow"};
  return words;
}

inline std::string random_sentence(std::mt19937_64& rng, std::size_t min_words = 1, std::size_t max_words = 9) {
  const auto& words = word_pool();
  std::uniform_int_distribution<std::size_t> len(min_words, max_words);
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  std::uniform_int_distribution<int> punct(0, 5);
  std::string s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += punct(rng) == 0 ? ", " : " ";
    s += words[pick(rng)];
  }
  if (punct(rng) < 2) s += "?";
  return s;
}

// Random Unicode text drawn from assorted planes, including JSON-hostile characters.
inline std::string random_unicode(std::mt19937_64& rng, std::size_t max_cps = 40) {
  static const std::vector<std::pair<char32_t, char32_t>> ranges = {
      {0x20, 0x7E}, {0x00A0, 0x024F}, {0x0370, 0x03FF}, {0x0400, 0x04FF}, {0x4E00, 0x4FFF},
      {0x1F300, 0x1F64F}, {0x0600, 0x06FF}};
  static const std::u32string specials = U"\"\\\n\t\r/{}";
  std::uniform_int_distribution<std::size_t> len(1, max_cps);
  std::uniform_int_distribution<std::size_t> which(0, ranges.size());
  std::string out;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = which(rng);
    char32_t cp;
    if (r == ranges.size()) {
      cp = specials[std::uniform_int_distribution<std::size_t>(0, specials.size() - 1)(rng)];
    } else {
      cp = std::uniform_int_distribution<char32_t>(ranges[r].first, ranges[r].second)(rng);
    }
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }
  if (out.find_first_not_of(" \t\r\n") == std::string::npos) out += "q";
  return out;
}

inline Memory random_memory(std::mt19937_64& rng, std::size_t n, bool unicode) {
  Memory m;
  std::uniform_real_distribution<double> latency(0.001, 500.0);
  std::uniform_int_distribution<int> coin(0, 3);
  for (std::size_t i = 0; i < n; ++i) {
    ExperienceRecord r;
    r.id = auto_record_id(i + 1);
    r.question = unicode ? random_unicode(rng) : random_sentence(rng);
    r.llm_answer = unicode ? random_unicode(rng) : random_sentence(rng, 0, 4);
    r.agent_answer = unicode ? random_unicode(rng, 120) : random_sentence(rng, 0, 12);
    r.llm_latency_s = latency(rng);
    r.agent_latency_s = latency(rng);
    if (coin(rng) == 0) r.source = coin(rng) < 2 ? "GAIA" : "MMLU";
    if (coin(rng) == 1) r.created_at = "2026-01-0" + std::to_string(1 + coin(rng)) + "T00:00:00Z";
    m.append(std::move(r));
  }
  return m;
}

struct OracleHit {
  std::string id;
  double fused;
};

// Exhaustive scoring straight from the formulas, without touching Index internals.
inline std::vector<OracleHit> brute_force_ranking(const Memory& memory, const std::string& query,
                                                  const RetrievalConfig& cfg, double alpha) {
  const std::size_t n = memory.size();
  std::vector<std::vector<std::string>> docs;
  for (const auto& r : memory.records()) docs.push_back(tokenize(r.question));
  double avgdl = 0.0;
  for (const auto& d : docs) avgdl += static_cast<double>(d.size());
  avgdl /= static_cast<double>(n);

  auto qtokens = tokenize(query);
  std::set<std::string> qterms(qtokens.begin(), qtokens.end());
  std::vector<double> sparse(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double len_norm = avgdl > 0 ? 1 - cfg.bm25_b + cfg.bm25_b * static_cast<double>(docs[i].size()) / avgdl : 1.0;
    for (const auto& term : qterms) {
      const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), term));
      if (tf == 0) continue;
      double df = 0;
      for (const auto& d : docs) df += std::find(d.begin(), d.end(), term) != d.end() ? 1 : 0;
      const double idf = std::max(0.0, std::log(1 + (static_cast<double>(n) - df + 0.5) / (df + 0.5)));
      sparse[i] += idf * tf * (cfg.bm25_k1 + 1) / (tf + cfg.bm25_k1 * len_norm);
    }
  }

  TrigramEmbedder embedder(cfg.embed_dim);
  std::vector<std::string> questions;
  for (const auto& r : memory.records()) questions.push_back(r.question);
  embedder.fit(questions);
  const auto qv = embedder.embed(query).values;

  const double lo = *std::min_element(sparse.begin(), sparse.end());
  const double hi = *std::max_element(sparse.begin(), sparse.end());
  std::vector<OracleHit> hits;
  for (std::size_t i = 0; i < n; ++i) {
    const auto dv = embedder.embed(questions[i]).values;
    double dot = 0, nq = 0, nd = 0;
    for (std::size_t j = 0; j < dv.size(); ++j) {
      dot += qv[j] * dv[j];
      nq += qv[j] * qv[j];
      nd += dv[j] * dv[j];
    }
    const double cos = (nq == 0 || nd == 0) ? 0.0 : std::clamp(dot / (std::sqrt(nq) * std::sqrt(nd)), -1.0, 1.0);
    const double sn = hi > lo ? (sparse[i] - lo) / (hi - lo) : 0.5;
    hits.push_back({memory[i].id, std::clamp(alpha * sn + (1 - alpha) * (cos + 1) / 2, 0.0, 1.0)});
  }
  std::stable_sort(hits.begin(), hits.end(), [](const OracleHit& a, const OracleHit& b) {
    return a.fused != b.fused ? a.fused > b.fused : a.id < b.id;
  });
  return hits;
}

}  // namespace routegate::testing
