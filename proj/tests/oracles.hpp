// Independent brute-force transcriptions of the metric and vector formulas.
// Deliberately coded against different data structures than the library
// (token-vector n-gram keys, ordered maps, exhaustive search) so agreement
// is evidence, not tautology. Test-only.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "emocap/metrics.hpp"
#include "emocap/rng.hpp"

namespace oracle {

using Tokens = std::vector<std::string>;
using Ngram = std::vector<std::string>;

inline std::map<Ngram, int> count_ngrams(const Tokens& toks, std::size_t n) {
  std::map<Ngram, int> counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    counts[Ngram(toks.begin() + i, toks.begin() + i + n)] += 1;
  }
  return counts;
}

// --------------------------------------------------------------------------
// Vector helpers

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double cosine(const std::vector<double>& a,
                     const std::vector<double>& b) {
  return dot(a, b) / (std::sqrt(dot(a, a)) * std::sqrt(dot(b, b)));
}

inline std::vector<double> mean_of(const std::vector<std::vector<double>>& vs) {
  std::vector<double> m(vs.at(0).size(), 0.0);
  for (const auto& v : vs) {
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += v[i];
  }
  for (auto& x : m) x /= static_cast<double>(vs.size());
  return m;
}

// --------------------------------------------------------------------------
// BLEU

inline double bleu(const Tokens& hyp, const Tokens& ref, std::size_t max_n,
                   bool smoothed) {
  if (hyp.empty()) return 0.0;
  double product = 1.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto hc = count_ngrams(hyp, n);
    const auto rc = count_ngrams(ref, n);
    double clipped = 0;
    double total = 0;
    for (const auto& [g, c] : hc) {
      total += c;
      const auto it = rc.find(g);
      clipped += std::min<double>(c, it == rc.end() ? 0 : it->second);
    }
    if (smoothed && clipped == 0) {
      clipped = 1;
      total += 1;
    }
    if (clipped == 0 || total == 0) return 0.0;
    product *= std::pow(clipped / total, 1.0 / static_cast<double>(max_n));
  }
  const double c = static_cast<double>(hyp.size());
  const double r = static_cast<double>(ref.size());
  return (c < r ? std::exp(1.0 - r / c) : 1.0) * product;
}

// --------------------------------------------------------------------------
// ROUGE-L

inline double rouge_l(const Tokens& hyp, const Tokens& ref) {
  const std::size_t h = hyp.size();
  const std::size_t r = ref.size();
  if (h == 0 || r == 0) return 0.0;
  std::vector<std::vector<int>> dp(h + 1, std::vector<int>(r + 1, 0));
  for (std::size_t i = 1; i <= h; ++i) {
    for (std::size_t j = 1; j <= r; ++j) {
      dp[i][j] = hyp[i - 1] == ref[j - 1]
                     ? dp[i - 1][j - 1] + 1
                     : std::max(dp[i - 1][j], dp[i][j - 1]);
    }
  }
  const double lcs = dp[h][r];
  if (lcs == 0) return 0.0;
  const double prec = lcs / static_cast<double>(h);
  const double rec = lcs / static_cast<double>(r);
  const double b2 = 1.2 * 1.2;
  return (1 + b2) * prec * rec / (rec + b2 * prec);
}

// --------------------------------------------------------------------------
// METEOR: exhaustive search over maximum matchings for minimum chunks.

namespace detail {

struct MeteorSearch {
  const Tokens& hyp;
  const Tokens& ref;
  std::size_t target_matches;
  std::vector<bool> used;
  std::size_t best_chunks = SIZE_MAX;

  void go(std::size_t i, std::size_t matches, long last_i, long last_j,
          std::size_t chunks) {
    if (chunks >= best_chunks) return;
    if (matches + (hyp.size() - i) < target_matches) return;
    if (i == hyp.size()) {
      if (matches == target_matches) best_chunks = std::min(best_chunks, chunks);
      return;
    }
    go(i + 1, matches, last_i, last_j, chunks);  // leave position i unmatched
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (used[j] || ref[j] != hyp[i]) continue;
      used[j] = true;
      const bool adjacent = static_cast<long>(i) == last_i + 1 &&
                            static_cast<long>(j) == last_j + 1;
      go(i + 1, matches + 1, static_cast<long>(i), static_cast<long>(j),
         chunks + (adjacent ? 0 : 1));
      used[j] = false;
    }
  }
};

}  // namespace detail

inline double meteor(const Tokens& hyp, const Tokens& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  std::map<std::string, int> hc, rc;
  for (const auto& t : hyp) hc[t] += 1;
  for (const auto& t : ref) rc[t] += 1;
  std::size_t max_matches = 0;
  for (const auto& [t, c] : hc) {
    const auto it = rc.find(t);
    if (it != rc.end()) max_matches += std::min(c, it->second);
  }
  if (max_matches == 0) return 0.0;
  detail::MeteorSearch search{hyp, ref, max_matches,
                              std::vector<bool>(ref.size(), false)};
  search.go(0, 0, -2, -2, 0);
  const double m = static_cast<double>(max_matches);
  const double p = m / static_cast<double>(hyp.size());
  const double r = m / static_cast<double>(ref.size());
  const double f = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(search.best_chunks) / m;
  return f * (1.0 - 0.5 * frag * frag * frag);
}

// --------------------------------------------------------------------------
// CIDEr-D

inline std::vector<double> cider_d(const std::vector<Tokens>& hyps,
                                   const std::vector<Tokens>& refs) {
  std::vector<std::map<Ngram, int>> doc_freq(4);
  for (const auto& ref : refs) {
    for (std::size_t n = 1; n <= 4; ++n) {
      for (const auto& [g, c] : count_ngrams(ref, n)) {
        (void)c;
        doc_freq[n - 1][g] += 1;
      }
    }
  }
  const double big_n = static_cast<double>(refs.size());
  std::vector<double> scores;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    double sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto hc = count_ngrams(hyps[s], n);
      const auto rc = count_ngrams(refs[s], n);
      const auto weight = [&](const Ngram& g, int count) {
        const auto it = doc_freq[n - 1].find(g);
        const double df = it == doc_freq[n - 1].end()
                              ? 1.0
                              : std::max(1.0, static_cast<double>(it->second));
        return count * std::log(big_n / df);
      };
      double num = 0, hn = 0, rn = 0;
      for (const auto& [g, c] : hc) {
        const double w = weight(g, c);
        hn += w * w;
        const auto it = rc.find(g);
        if (it != rc.end()) num += w * weight(g, it->second);
      }
      for (const auto& [g, c] : rc) {
        const double w = weight(g, c);
        rn += w * w;
      }
      if (hn > 0 && rn > 0) sum += num / (std::sqrt(hn) * std::sqrt(rn));
    }
    const double d = static_cast<double>(hyps[s].size()) -
                     static_cast<double>(refs[s].size());
    scores.push_back(10.0 * std::exp(-d * d / 72.0) * sum / 4.0);
  }
  return scores;
}

// --------------------------------------------------------------------------
// SPICE-lite

inline double spice(const Tokens& hyp, const Tokens& ref,
                    const emocap::metrics::Stoplist& stop) {
  const auto props = [&](const Tokens& toks) {
    Tokens content;
    for (const auto& t : toks) {
      if (!stop.contains(t)) content.push_back(t);
    }
    std::set<Ngram> out;
    for (const auto& t : content) out.insert({t});
    for (std::size_t i = 0; i + 1 < content.size(); ++i) {
      out.insert({content[i], content[i + 1]});
    }
    return out;
  };
  const auto hp = props(hyp);
  const auto rp = props(ref);
  if (hp.empty() || rp.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& g : hp) inter += rp.count(g);
  if (inter == 0) return 0.0;
  const double p = static_cast<double>(inter) / static_cast<double>(hp.size());
  const double r = static_cast<double>(inter) / static_cast<double>(rp.size());
  return 2 * p * r / (p + r);
}

// --------------------------------------------------------------------------
// Seeded random caption pairs for the oracle suites.

inline std::pair<Tokens, Tokens> random_pair(emocap::rng::SplitMix64& stream) {
  static const std::vector<std::string> vocab = {
      "voice",  "tone", "pace",  "calm", "sharp", "soft",
      "rises",  "falls", "quick", "slow", "the",   "a",
  };
  const auto draw_len = [&] {
    return 1 + static_cast<std::size_t>(stream.next_below(9));
  };
  const auto draw_tokens = [&](std::size_t len) {
    Tokens toks;
    for (std::size_t i = 0; i < len; ++i) {
      toks.push_back(vocab[stream.next_below(vocab.size())]);
    }
    return toks;
  };
  Tokens hyp = draw_tokens(draw_len());
  Tokens ref = draw_tokens(draw_len());
  // Half the pairs share a contiguous span so overlaps are not all noise.
  if (stream.next_below(2) == 0) {
    const std::size_t span = std::min<std::size_t>(
        1 + stream.next_below(4), std::min(hyp.size(), ref.size()));
    for (std::size_t i = 0; i < span; ++i) ref[i] = hyp[i];
  }
  return {hyp, ref};
}

}  // namespace oracle
