#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "emocap/errors.hpp"
#include "emocap/textproc.hpp"

namespace emocap::metrics {

using textproc::TokenSequence;

inline constexpr std::string_view kStoplistFormat = "emocap.stoplist.v1";

namespace detail {

// n-grams as joined strings; 0x1f never occurs inside a token.
inline std::string ngram_key(const TokenSequence& toks, std::size_t start,
                             std::size_t n) {
  std::string key;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) key.push_back('\x1f');
    key.append(toks[start + i]);
  }
  return key;
}

inline std::unordered_map<std::string, std::size_t> ngram_counts(
    const TokenSequence& toks, std::size_t n) {
  std::unordered_map<std::string, std::size_t> counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++counts[ngram_key(toks, i, n)];
  }
  return counts;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// BLEU

// Clipped modified n-gram precision with geometric mean over orders
// 1..max_n and brevity penalty exp(1 - r/c) for c < r. The smoothed
// variant adds 1 to numerator and denominator of any zero-count order
// (sentence-level use inside the reward).
inline double bleu(const TokenSequence& hyp, const TokenSequence& ref,
                   std::size_t max_n = 4, bool smoothed = false) {
  if (max_n < 1) throw DataError("bleu: max_n must be >= 1");
  if (hyp.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto hyp_counts = detail::ngram_counts(hyp, n);
    const auto ref_counts = detail::ngram_counts(ref, n);
    double num = 0.0;
    double den = hyp.size() >= n ? static_cast<double>(hyp.size() - n + 1) : 0.0;
    for (const auto& [gram, count] : hyp_counts) {
      const auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) {
        num += static_cast<double>(std::min(count, it->second));
      }
    }
    if (smoothed && num == 0.0) {
      num += 1.0;
      den += 1.0;
    }
    if (num == 0.0 || den == 0.0) return 0.0;
    log_sum += std::log(num / den) / static_cast<double>(max_n);
  }
  const double c = static_cast<double>(hyp.size());
  const double r = static_cast<double>(ref.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum);
}

// ---------------------------------------------------------------------------
// ROUGE-L

inline std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// LCS F-measure with beta = 1.2.
inline double rouge_l(const TokenSequence& hyp, const TokenSequence& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(hyp, ref));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(hyp.size());
  const double r = lcs / static_cast<double>(ref.size());
  constexpr double kBeta = 1.2;
  constexpr double kBeta2 = kBeta * kBeta;
  return (1.0 + kBeta2) * p * r / (r + kBeta2 * p);
}

// ---------------------------------------------------------------------------
// METEOR (exact-match lite variant; no synonym database)

namespace detail {

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

// Exact minimum-chunk search over maximum matchings. State: next matchable
// hyp slot, bitmask of used ref slots, and the ref slot matched at the
// previous hyp position (0 = none). Value packs (matches, -chunks).
class ChunkMinimizer {
 public:
  ChunkMinimizer(std::vector<std::size_t> hyp_pos,
                 std::vector<std::size_t> ref_pos,
                 std::vector<std::uint32_t> hyp_tok,
                 std::vector<std::uint32_t> ref_tok)
      : hyp_pos_(std::move(hyp_pos)),
        ref_pos_(std::move(ref_pos)),
        hyp_tok_(std::move(hyp_tok)),
        ref_tok_(std::move(ref_tok)) {}

  MeteorAlignment solve() {
    const long best = search(0, 0, 0);
    MeteorAlignment out;
    out.matches = static_cast<std::size_t>((best + kChunkCap) / kMatchUnit);
    out.chunks =
        static_cast<std::size_t>(out.matches * kMatchUnit - best);
    return out;
  }

 private:
  static constexpr long kMatchUnit = 1 << 12;
  static constexpr long kChunkCap = kMatchUnit / 2;

  long search(std::size_t i, std::uint64_t mask, std::size_t prev_slot) {
    if (i == hyp_pos_.size()) return 0;
    const std::uint64_t key =
        (static_cast<std::uint64_t>(i) << 56) |
        (static_cast<std::uint64_t>(prev_slot) << 48) | mask;
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    long best = search(i + 1, mask, 0);  // leave hyp position i unmatched
    for (std::size_t s = 0; s < ref_pos_.size(); ++s) {
      if (mask & (1ULL << s)) continue;
      if (ref_tok_[s] != hyp_tok_[i]) continue;
      const bool continues = prev_slot != 0 &&
                             ref_pos_[s] == ref_pos_[prev_slot - 1] + 1;
      const std::size_t next_prev =
          i + 1 < hyp_pos_.size() && hyp_pos_[i + 1] == hyp_pos_[i] + 1
              ? s + 1
              : 0;
      const long sub = search(i + 1, mask | (1ULL << s), next_prev);
      best = std::max(best, sub + kMatchUnit - (continues ? 0 : 1));
    }
    memo_.emplace(key, best);
    return best;
  }

  std::vector<std::size_t> hyp_pos_;
  std::vector<std::size_t> ref_pos_;
  std::vector<std::uint32_t> hyp_tok_;
  std::vector<std::uint32_t> ref_tok_;
  std::unordered_map<std::uint64_t, long> memo_;
};

inline MeteorAlignment align_meteor(const TokenSequence& hyp,
                                    const TokenSequence& ref) {
  // Intern tokens and keep only positions whose token occurs on both sides.
  std::unordered_map<std::string_view, std::uint32_t> ids;
  const auto intern = [&](const std::string& s) {
    return ids.emplace(s, static_cast<std::uint32_t>(ids.size())).first->second;
  };
  std::vector<std::uint32_t> hyp_ids, ref_ids;
  hyp_ids.reserve(hyp.size());
  ref_ids.reserve(ref.size());
  for (const auto& t : hyp) hyp_ids.push_back(intern(t));
  for (const auto& t : ref) ref_ids.push_back(intern(t));
  std::unordered_set<std::uint32_t> hyp_set(hyp_ids.begin(), hyp_ids.end());
  std::unordered_set<std::uint32_t> ref_set(ref_ids.begin(), ref_ids.end());

  std::vector<std::size_t> hyp_pos, ref_pos;
  std::vector<std::uint32_t> hyp_tok, ref_tok;
  for (std::size_t i = 0; i < hyp_ids.size(); ++i) {
    if (ref_set.count(hyp_ids[i])) {
      hyp_pos.push_back(i);
      hyp_tok.push_back(hyp_ids[i]);
    }
  }
  for (std::size_t j = 0; j < ref_ids.size(); ++j) {
    if (hyp_set.count(ref_ids[j])) {
      ref_pos.push_back(j);
      ref_tok.push_back(ref_ids[j]);
    }
  }
  if (hyp_pos.empty() || ref_pos.empty()) return {};

  constexpr std::size_t kExactSlotLimit = 18;
  if (ref_pos.size() <= kExactSlotLimit && hyp_pos.size() <= 40) {
    ChunkMinimizer solver(hyp_pos, ref_pos, hyp_tok, ref_tok);
    return solver.solve();
  }

  // Long-caption fallback: leftmost-available alignment. Still a maximum
  // matching, chunk count merely not guaranteed minimal.
  std::unordered_map<std::uint32_t, std::vector<std::size_t>> free_refs;
  for (std::size_t s = ref_pos.size(); s-- > 0;) {
    free_refs[ref_tok[s]].push_back(s);
  }
  MeteorAlignment out;
  long prev_hyp = -2;
  long prev_ref = -2;
  for (std::size_t i = 0; i < hyp_pos.size(); ++i) {
    auto it = free_refs.find(hyp_tok[i]);
    if (it == free_refs.end() || it->second.empty()) continue;
    const std::size_t s = it->second.back();
    it->second.pop_back();
    ++out.matches;
    const bool continues =
        static_cast<long>(hyp_pos[i]) == prev_hyp + 1 &&
        static_cast<long>(ref_pos[s]) == prev_ref + 1;
    if (!continues) ++out.chunks;
    prev_hyp = static_cast<long>(hyp_pos[i]);
    prev_ref = static_cast<long>(ref_pos[s]);
  }
  return out;
}

}  // namespace detail

// Unigram alignment maximizing matches then minimizing chunks;
// F_mean = 10PR/(R+9P), penalty = 0.5 (chunks/matches)^3.
inline double meteor_lite(const TokenSequence& hyp, const TokenSequence& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  const auto alignment = detail::align_meteor(hyp, ref);
  if (alignment.matches == 0) return 0.0;
  const double m = static_cast<double>(alignment.matches);
  const double p = m / static_cast<double>(hyp.size());
  const double r = m / static_cast<double>(ref.size());
  const double f_mean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(alignment.chunks) / m;
  const double penalty = 0.5 * frag * frag * frag;
  return f_mean * (1.0 - penalty);
}

// ---------------------------------------------------------------------------
// CIDEr-D

struct CiderResult {
  std::vector<double> per_sample;
  double mean = 0.0;
};

// TF-IDF n-gram cosine over orders 1..4 (averaged), IDF from the reference
// corpus with document frequency clamped to >= 1, Gaussian length penalty
// (sigma = 6), scale factor 10. Raw occurrence counts serve as TF; cosine
// normalization makes any uniform TF scaling equivalent.
inline CiderResult cider_d(const std::vector<TokenSequence>& hyps,
                           const std::vector<TokenSequence>& refs) {
  if (hyps.size() != refs.size()) {
    throw DataError("cider_d: hypothesis/reference count mismatch");
  }
  if (hyps.empty()) throw DataError("cider_d: empty corpus");
  constexpr std::size_t kMaxOrder = 4;
  constexpr double kSigma = 6.0;

  std::vector<std::unordered_map<std::string, std::size_t>> df(kMaxOrder);
  for (const auto& ref : refs) {
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      for (const auto& [gram, count] : detail::ngram_counts(ref, n)) {
        (void)count;
        ++df[n - 1][gram];
      }
    }
  }
  const double corpus_size = static_cast<double>(refs.size());
  const auto idf = [&](std::size_t n, const std::string& gram) {
    const auto it = df[n - 1].find(gram);
    const double freq = it == df[n - 1].end() ? 1.0
                        : std::max<double>(1.0, static_cast<double>(it->second));
    return std::log(corpus_size / freq);
  };

  CiderResult result;
  result.per_sample.reserve(hyps.size());
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    double order_sum = 0.0;
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      const auto hc = detail::ngram_counts(hyps[s], n);
      const auto rc = detail::ngram_counts(refs[s], n);
      double dot = 0.0;
      double hnorm2 = 0.0;
      double rnorm2 = 0.0;
      for (const auto& [gram, count] : hc) {
        const double w = static_cast<double>(count) * idf(n, gram);
        hnorm2 += w * w;
        const auto it = rc.find(gram);
        if (it != rc.end()) {
          dot += w * static_cast<double>(it->second) * idf(n, gram);
        }
      }
      for (const auto& [gram, count] : rc) {
        const double w = static_cast<double>(count) * idf(n, gram);
        rnorm2 += w * w;
      }
      if (hnorm2 > 0.0 && rnorm2 > 0.0) {
        order_sum += dot / std::sqrt(hnorm2 * rnorm2);
      }
    }
    const double delta =
        static_cast<double>(hyps[s].size()) - static_cast<double>(refs[s].size());
    const double penalty = std::exp(-delta * delta / (2.0 * kSigma * kSigma));
    result.per_sample.push_back(
        10.0 * penalty * order_sum / static_cast<double>(kMaxOrder));
  }
  for (double v : result.per_sample) result.mean += v;
  result.mean /= static_cast<double>(result.per_sample.size());
  return result;
}

// ---------------------------------------------------------------------------
// SPICE (content-ngram lite variant; no scene-graph parser)

class Stoplist {
 public:
  Stoplist() = default;
  explicit Stoplist(std::vector<std::string> words) {
    for (auto& w : words) words_.insert(std::move(w));
  }

  static Stoplist from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("stoplist: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("stoplist: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kStoplistFormat) {
      throw ParseError("stoplist " + path + ": expected header '" +
                       std::string(kStoplistFormat) + "'");
    }
    Stoplist list;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      list.words_.insert(line);
    }
    return list;
  }

  bool contains(std::string_view token) const {
    return words_.count(std::string(token)) != 0;
  }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

// English + Chinese function words. data/stoplist.txt carries the same
// list; a test keeps the two in sync.
inline const Stoplist& default_stoplist() {
  static const Stoplist list({
      // English
      "a", "an", "the", "is", "are", "was", "were", "be", "been", "being",
      "am", "do", "does", "did", "has", "have", "had", "and", "or", "but",
      "if", "then", "than", "so", "as", "of", "at", "by", "for", "with",
      "in", "on", "to", "from", "up", "down", "out", "over", "under",
      "again", "very", "quite", "rather", "too", "not", "no", "nor", "it",
      "its", "this", "that", "these", "those", "there", "here", "he", "she",
      "they", "them", "his", "her", "their", "my", "your", "our", "while",
      "when", "what", "which", "who", "whom", "how", "why", "where", "all",
      "any", "both", "each", "such", "own", "same", "s", "t", "will",
      "would", "can", "could", "should", "may", "might", "must", "shall",
      // Chinese
      "的", "了", "着", "是", "在", "和", "与", "或", "而", "也", "都",
      "很", "还", "就", "又", "被", "把", "让", "从", "向", "于", "对",
      "为", "以", "及", "这", "那", "之", "其", "他", "她", "它", "们",
      "个", "些", "上", "下", "中", "里", "外", "有", "无", "不", "没",
  });
  return list;
}

// Proposition set: content unigrams plus ordered adjacent content-word
// bigrams (adjacency taken after stopword removal); score is set F1.
inline double spice_lite(const TokenSequence& hyp, const TokenSequence& ref,
                         const Stoplist& stoplist = default_stoplist()) {
  const auto propositions = [&](const TokenSequence& toks) {
    TokenSequence content;
    for (const auto& t : toks) {
      if (!stoplist.contains(t)) content.push_back(t);
    }
    std::unordered_set<std::string> props(content.begin(), content.end());
    for (std::size_t i = 0; i + 1 < content.size(); ++i) {
      props.insert(content[i] + '\x1f' + content[i + 1]);
    }
    return props;
  };
  const auto hp = propositions(hyp);
  const auto rp = propositions(ref);
  if (hp.empty() || rp.empty()) return 0.0;
  std::size_t overlap = 0;
  for (const auto& p : hp) overlap += rp.count(p);
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(hp.size());
  const double r = static_cast<double>(overlap) / static_cast<double>(rp.size());
  return 2.0 * p * r / (p + r);
}

// ---------------------------------------------------------------------------
// Corpus evaluation (Table-style column set)

struct MetricReport {
  double bleu1 = 0.0, bleu2 = 0.0, bleu3 = 0.0, bleu4 = 0.0;
  double rouge_l = 0.0;
  double meteor_lite = 0.0;
  double cider_d = 0.0;
  double spice_lite = 0.0;
  double spider = 0.0;  // (cider_d + spice_lite) / 2
  std::size_t vocab = 0;
};

struct SampleMetrics {
  double bleu4_smoothed = 0.0;
  double rouge_l = 0.0;
  double meteor_lite = 0.0;
  double cider_d = 0.0;
  double spice_lite = 0.0;
  double spider = 0.0;
};

struct CorpusEvaluation {
  MetricReport corpus;
  std::vector<SampleMetrics> samples;
};

// Corpus BLEU-k: aggregated clipped counts over the corpus, corpus-level
// brevity penalty, unsmoothed (sentence records carry smoothed BLEU-4).
inline double corpus_bleu(const std::vector<TokenSequence>& hyps,
                          const std::vector<TokenSequence>& refs,
                          std::size_t max_n) {
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t s = 0; s < hyps.size(); ++s) {
      const auto hc = detail::ngram_counts(hyps[s], n);
      const auto rc = detail::ngram_counts(refs[s], n);
      for (const auto& [gram, count] : hc) {
        den += static_cast<double>(count);
        const auto it = rc.find(gram);
        if (it != rc.end()) {
          num += static_cast<double>(std::min(count, it->second));
        }
      }
    }
    if (num == 0.0 || den == 0.0) return 0.0;
    log_sum += std::log(num / den) / static_cast<double>(max_n);
  }
  double c = 0.0;
  double r = 0.0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    c += static_cast<double>(hyps[s].size());
    r += static_cast<double>(refs[s].size());
  }
  if (c == 0.0) return 0.0;
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum);
}

inline CorpusEvaluation evaluate_corpus(
    const std::vector<TokenSequence>& hyps,
    const std::vector<TokenSequence>& refs,
    const Stoplist& stoplist = default_stoplist()) {
  if (hyps.size() != refs.size() || hyps.empty()) {
    throw DataError("evaluate_corpus: need equally many hyps and refs (>= 1)");
  }
  CorpusEvaluation eval;
  const CiderResult cider = cider_d(hyps, refs);
  eval.samples.resize(hyps.size());
  double rouge_sum = 0.0;
  double meteor_sum = 0.0;
  double spice_sum = 0.0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    SampleMetrics& m = eval.samples[s];
    m.bleu4_smoothed = bleu(hyps[s], refs[s], 4, true);
    m.rouge_l = rouge_l(hyps[s], refs[s]);
    m.meteor_lite = meteor_lite(hyps[s], refs[s]);
    m.cider_d = cider.per_sample[s];
    m.spice_lite = spice_lite(hyps[s], refs[s], stoplist);
    m.spider = (m.cider_d + m.spice_lite) / 2.0;
    rouge_sum += m.rouge_l;
    meteor_sum += m.meteor_lite;
    spice_sum += m.spice_lite;
  }
  const double count = static_cast<double>(hyps.size());
  MetricReport& rep = eval.corpus;
  rep.bleu1 = corpus_bleu(hyps, refs, 1);
  rep.bleu2 = corpus_bleu(hyps, refs, 2);
  rep.bleu3 = corpus_bleu(hyps, refs, 3);
  rep.bleu4 = corpus_bleu(hyps, refs, 4);
  rep.rouge_l = rouge_sum / count;
  rep.meteor_lite = meteor_sum / count;
  rep.cider_d = cider.mean;
  rep.spice_lite = spice_sum / count;
  rep.spider = (rep.cider_d + rep.spice_lite) / 2.0;
  rep.vocab = textproc::unique_vocab(hyps);
  return eval;
}

}  // namespace emocap::metrics
