#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "emocap/embedding.hpp"
#include "emocap/errors.hpp"
#include "emocap/vec.hpp"

namespace emocap::emotion_space {

inline constexpr std::string_view kLexiconFormat = "emocap.lexicon.v1";
inline constexpr std::string_view kAnchorFormat = "emocap.anchors.v1";

struct EmotionLexicon {
  std::string name;                 // emotion label
  std::vector<std::string> words;   // non-empty, no duplicates
};

// Named anchor vectors, one per emotion, in a fixed label order. The
// fingerprint pins the embedder (and table contents) the anchors were
// built under; a set is meaningless in any other latent space.
struct EmotionAnchorSet {
  std::vector<std::string> labels;
  std::vector<SemanticVector> anchors;
  std::uint64_t embedder_fingerprint = 0;

  std::size_t size() const { return labels.size(); }
};

// The n-dimensional projection of a text: one cosine per anchor, in
// anchor order, each in [-1, 1].
using EmotionCoordinates = std::vector<double>;

// Centroid of the embedded lexical set, summed in the lexicon's given
// word order so anchors are bit-stable across platforms.
inline SemanticVector build_anchor(const EmotionLexicon& lexicon,
                                   const embedding::Embedder& embedder) {
  if (lexicon.words.empty()) {
    throw DataError("lexicon '" + lexicon.name + "' has no words");
  }
  {
    std::unordered_set<std::string_view> seen;
    for (const auto& w : lexicon.words) {
      if (!seen.insert(w).second) {
        throw DataError("lexicon '" + lexicon.name + "' repeats word '" + w +
                        "'");
      }
    }
  }
  SemanticVector acc(embedder.dimension(), 0.0);
  for (const auto& word : lexicon.words) {
    const SemanticVector v = embedder.embed_text(word);
    if (vec::is_degenerate(v)) {
      throw DataError("lexicon '" + lexicon.name + "': word '" + word +
                      "' embeds to the zero vector");
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
  }
  for (auto& x : acc) x /= static_cast<double>(lexicon.words.size());
  if (vec::is_degenerate(acc)) {
    throw DataError("lexicon '" + lexicon.name +
                    "' produces a degenerate anchor (norm < 1e-12)");
  }
  return acc;
}

inline EmotionAnchorSet build_anchor_set(
    const std::vector<EmotionLexicon>& lexicons,
    const embedding::Embedder& embedder) {
  if (lexicons.size() < 2) {
    throw DataError("anchor set needs at least 2 emotions, got " +
                    std::to_string(lexicons.size()));
  }
  EmotionAnchorSet set;
  set.embedder_fingerprint = embedder.fingerprint();
  std::unordered_set<std::string_view> labels;
  for (const auto& lex : lexicons) {
    if (!labels.insert(lex.name).second) {
      throw DataError("duplicate emotion label '" + lex.name + "'");
    }
    set.labels.push_back(lex.name);
    set.anchors.push_back(build_anchor(lex, embedder));
  }
  return set;
}

// Cosine of t against every anchor, in anchor order. Undefined (nullopt)
// when t carries no direction, which is how empty text propagates here.
inline std::optional<EmotionCoordinates> project(
    const SemanticVector& t, const EmotionAnchorSet& anchors) {
  if (vec::is_degenerate(t)) return std::nullopt;
  const double tnorm = vec::norm(t);
  EmotionCoordinates coords;
  coords.reserve(anchors.size());
  for (const auto& a : anchors.anchors) {
    coords.push_back(vec::dot(t, a) / (tnorm * vec::norm(a)));
  }
  return coords;
}

// Structural alignment of emotional content: cosine between the two
// texts' coordinate vectors. Undefined when either side degenerates;
// the reward layer maps that to its configured floor.
inline std::optional<double> emotion_reward(std::string_view gen,
                                            std::string_view ref,
                                            const EmotionAnchorSet& anchors,
                                            const embedding::Embedder& embedder) {
  const auto cg = project(embedder.embed_text(gen), anchors);
  const auto cr = project(embedder.embed_text(ref), anchors);
  if (!cg || !cr) return std::nullopt;
  if (vec::is_degenerate(*cg) || vec::is_degenerate(*cr)) return std::nullopt;
  return vec::cosine(*cg, *cr);
}

// ---------------------------------------------------------------------------
// Lexicon file: header line, then `<emotion>\t<word> <word> ...` per line.

inline std::vector<EmotionLexicon> load_lexicons(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("lexicon file: cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& what) {
    throw ParseError("lexicon file " + path + ":" + std::to_string(line_no) +
                     ": " + what);
  };
  if (!std::getline(in, line)) fail("missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kLexiconFormat) fail("expected header '" + std::string(kLexiconFormat) + "'");

  std::vector<EmotionLexicon> lexicons;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) fail("expected <emotion>\\t<words>");
    EmotionLexicon lex;
    lex.name = line.substr(0, tab);
    std::istringstream words(line.substr(tab + 1));
    std::string w;
    while (words >> w) lex.words.push_back(w);
    if (lex.words.empty()) fail("emotion '" + lex.name + "' has no words");
    lexicons.push_back(std::move(lex));
  }
  return lexicons;
}

inline void save_lexicons(const std::vector<EmotionLexicon>& lexicons,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("lexicon file: cannot write " + path);
  out << kLexiconFormat << "\n";
  for (const auto& lex : lexicons) {
    out << lex.name << '\t';
    for (std::size_t i = 0; i < lex.words.size(); ++i) {
      if (i > 0) out << ' ';
      out << lex.words[i];
    }
    out << "\n";
  }
  if (!out) throw ParseError("lexicon file: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Anchor snapshot: `emocap.anchors.v1 n=<n> D=<D> fingerprint=<hex>`,
// then one `<label>\t<floats>` row per anchor.

inline void save_anchor_snapshot(const EmotionAnchorSet& set,
                                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("anchor snapshot: cannot write " + path);
  const std::size_t dim = set.anchors.empty() ? 0 : set.anchors[0].size();
  char head[128];
  std::snprintf(head, sizeof(head), "%s n=%zu D=%zu fingerprint=%016llx",
                std::string(kAnchorFormat).c_str(), set.size(), dim,
                static_cast<unsigned long long>(set.embedder_fingerprint));
  out << head << "\n";
  char num[64];
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << set.labels[i] << '\t';
    for (std::size_t j = 0; j < set.anchors[i].size(); ++j) {
      if (j > 0) out << ' ';
      std::snprintf(num, sizeof(num), "%.17g", set.anchors[i][j]);
      out << num;
    }
    out << "\n";
  }
  if (!out) throw ParseError("anchor snapshot: write failed for " + path);
}

inline EmotionAnchorSet load_anchor_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("anchor snapshot: cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& what) {
    throw ParseError("anchor snapshot " + path + ":" + std::to_string(line_no) +
                     ": " + what);
  };
  if (!std::getline(in, line)) fail("missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();

  EmotionAnchorSet set;
  std::size_t n = 0;
  std::size_t dim = 0;
  {
    std::istringstream head(line);
    std::string tag, nf, df, ff;
    head >> tag >> nf >> df >> ff;
    if (tag != kAnchorFormat || nf.rfind("n=", 0) != 0 ||
        df.rfind("D=", 0) != 0 || ff.rfind("fingerprint=", 0) != 0) {
      fail("malformed header '" + line + "'");
    }
    try {
      n = static_cast<std::size_t>(std::stoul(nf.substr(2)));
      dim = static_cast<std::size_t>(std::stoul(df.substr(2)));
      set.embedder_fingerprint = std::stoull(ff.substr(12), nullptr, 16);
    } catch (const std::logic_error&) {
      fail("malformed header '" + line + "'");
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) fail("expected <label>\\t<floats>");
    set.labels.push_back(line.substr(0, tab));
    SemanticVector v;
    v.reserve(dim);
    std::istringstream floats(line.substr(tab + 1));
    double x = 0.0;
    while (floats >> x) v.push_back(x);
    if (!floats.eof() || v.size() != dim) {
      fail("anchor row must carry exactly " + std::to_string(dim) + " floats");
    }
    if (vec::is_degenerate(v)) fail("anchor '" + set.labels.back() + "' has zero norm");
    set.anchors.push_back(std::move(v));
  }
  if (set.size() != n) {
    throw ParseError("anchor snapshot " + path + ": header declares n=" +
                     std::to_string(n) + " but file has " +
                     std::to_string(set.size()) + " rows");
  }
  if (n < 2) throw ParseError("anchor snapshot " + path + ": n must be >= 2");
  return set;
}

// Refuses an anchor set built under a different embedder.
inline void require_matching_embedder(const EmotionAnchorSet& set,
                                      const embedding::Embedder& embedder) {
  const std::uint64_t actual = embedder.fingerprint();
  if (set.embedder_fingerprint != actual) {
    char msg[128];
    std::snprintf(msg, sizeof(msg),
                  "anchor fingerprint %016llx does not match embedder %016llx",
                  static_cast<unsigned long long>(set.embedder_fingerprint),
                  static_cast<unsigned long long>(actual));
    throw DataError(msg);
  }
}

inline EmotionAnchorSet load_anchor_snapshot(
    const std::string& path, const embedding::Embedder& embedder) {
  EmotionAnchorSet set = load_anchor_snapshot(path);
  require_matching_embedder(set, embedder);
  return set;
}

}  // namespace emocap::emotion_space
