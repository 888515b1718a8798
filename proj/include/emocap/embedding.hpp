#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "emocap/errors.hpp"
#include "emocap/rng.hpp"
#include "emocap/textproc.hpp"
#include "emocap/vec.hpp"

namespace emocap::embedding {

enum class Backend { kHashed, kTable };
enum class OovPolicy { kFallbackHashed, kError };

struct EmbedderConfig {
  std::size_t dimension = 64;      // D >= 2
  std::uint64_t seed = 1;
  Backend backend = Backend::kHashed;
  std::string table_path;          // only meaningful for Backend::kTable
  OovPolicy oov_policy = OovPolicy::kFallbackHashed;
};

inline std::string_view backend_name(Backend b) {
  return b == Backend::kHashed ? "hashed" : "table";
}

inline std::string_view oov_policy_name(OovPolicy p) {
  return p == OovPolicy::kFallbackHashed ? "fallback_hashed" : "error";
}

// In-memory embedding table. Rows keep file order so the content hash is
// stable across loads of the same file.
struct EmbeddingTable {
  std::size_t dimension = 0;
  std::vector<std::pair<std::string, SemanticVector>> rows;
  std::unordered_map<std::string, std::size_t> index;
  std::uint64_t content_hash = rng::kFnvOffset;
};

// Parses the table file: line 1 exactly `D=<int>`, then
// `<token>\t<f1> <f2> ... <fD>` per line; `#` lines are comments.
inline EmbeddingTable load_embedding_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("embedding table: cannot open " + path);

  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& what) {
    throw ParseError("embedding table " + path + ":" +
                     std::to_string(line_no) + ": " + what);
  };

  if (!std::getline(in, line)) fail("missing header line");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("D=", 0) != 0) fail("header must be D=<int>, got '" + line + "'");
  try {
    long d = std::stol(line.substr(2));
    if (d < 2) fail("dimension must be >= 2");
    table.dimension = static_cast<std::size_t>(d);
  } catch (const std::logic_error&) {
    fail("header must be D=<int>, got '" + line + "'");
  }

  std::uint64_t hash = rng::fnv1a64(line);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) fail("expected <token>\\t<floats>");
    std::string token = line.substr(0, tab);
    if (table.index.count(token) != 0) fail("duplicate token '" + token + "'");

    SemanticVector v;
    v.reserve(table.dimension);
    std::istringstream floats(line.substr(tab + 1));
    double x = 0.0;
    while (floats >> x) {
      if (!std::isfinite(x)) fail("non-finite value for token '" + token + "'");
      v.push_back(x);
    }
    if (!floats.eof()) fail("malformed float for token '" + token + "'");
    if (v.size() != table.dimension) {
      fail("row has " + std::to_string(v.size()) + " values, expected " +
           std::to_string(table.dimension));
    }
    hash = rng::fnv1a64(line, hash);
    table.index.emplace(token, table.rows.size());
    table.rows.emplace_back(std::move(token), std::move(v));
  }
  table.content_hash = hash;
  return table;
}

// Realizes the semantic embedding map from text to R^D. The hashed backend
// is fully deterministic from (token bytes, seed); the table backend serves
// externally exported vectors with a configurable out-of-vocabulary policy.
// Immutable after construction apart from the OOV counter.
class Embedder {
 public:
  explicit Embedder(EmbedderConfig config) : config_(std::move(config)) {
    if (config_.dimension < 2) {
      throw DataError("embedder dimension must be >= 2");
    }
    if (config_.backend == Backend::kTable) {
      table_ = load_embedding_table(config_.table_path);
      if (table_->dimension != config_.dimension) {
        throw DataError("embedding table dimension " +
                        std::to_string(table_->dimension) +
                        " does not match configured D=" +
                        std::to_string(config_.dimension));
      }
    }
  }

  const EmbedderConfig& config() const { return config_; }
  std::size_t dimension() const { return config_.dimension; }
  std::uint64_t oov_fallbacks() const { return oov_fallbacks_.load(); }

  // Identifies the latent space: config plus (for tables) file contents.
  // Anchor sets built under one fingerprint are refused under another.
  std::uint64_t fingerprint() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "emocap.embedder.v1;backend=%s;D=%zu;seed=%llu;oov=%s",
                  backend_name(config_.backend).data(), config_.dimension,
                  static_cast<unsigned long long>(config_.seed),
                  oov_policy_name(config_.oov_policy).data());
    std::uint64_t h = rng::fnv1a64(buf);
    if (table_) h = rng::fnv1a64_u64(table_->content_hash, h);
    return h;
  }

  SemanticVector embed_token(std::string_view token) const {
    if (token.empty()) throw DataError("embed_token: empty token");
    if (table_) {
      auto it = table_->index.find(std::string(token));
      if (it != table_->index.end()) return table_->rows[it->second].second;
      if (config_.oov_policy == OovPolicy::kError) {
        throw DataError("embedding table miss for token '" +
                        std::string(token) + "'");
      }
      oov_fallbacks_.fetch_add(1, std::memory_order_relaxed);
    }
    return hashed_vector(token);
  }

  // Mean of embed_token over tokenize(text). Empty tokenization yields the
  // flagged zero vector; callers must treat it as "undefined similarity".
  SemanticVector embed_text(std::string_view text) const {
    if (table_) {
      auto it = table_->index.find(std::string(text));
      if (it != table_->index.end()) return table_->rows[it->second].second;
    }
    const auto tokens = textproc::tokenize(text);
    SemanticVector acc(config_.dimension, 0.0);
    if (tokens.empty()) return acc;
    for (const auto& tok : tokens) {
      const SemanticVector v = embed_token(tok);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
    }
    for (auto& x : acc) x /= static_cast<double>(tokens.size());
    return acc;
  }

 private:
  SemanticVector hashed_vector(std::string_view token) const {
    rng::SplitMix64 stream(rng::fnv1a64(token) ^ config_.seed);
    SemanticVector v(config_.dimension);
    for (auto& x : v) x = stream.next_symmetric();
    const double n = vec::norm(v);
    if (n < vec::kDegenerateNorm) {
      // Unreachable in practice: D >= 2 independent uniform draws.
      throw DataError("hashed embedding collapsed to zero for token '" +
                      std::string(token) + "'");
    }
    for (auto& x : v) x /= n;
    return v;
  }

  EmbedderConfig config_;
  std::optional<EmbeddingTable> table_;
  mutable std::atomic<std::uint64_t> oov_fallbacks_{0};
};

}  // namespace emocap::embedding
