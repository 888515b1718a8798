#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "emocap/errors.hpp"
#include "emocap/rng.hpp"
#include "emocap/textproc.hpp"

namespace emocap::policy {

inline constexpr std::size_t kBosIndex = 0;
inline constexpr std::size_t kEosIndex = 1;
inline constexpr std::string_view kBosToken = "<bos>";
inline constexpr std::string_view kEosToken = "<eos>";

// Context-conditioned tabular bigram policy: logits[ctx][prev][next] over
// a closed vocabulary with reserved BOS/EOS. Small enough for exact
// log-probabilities and analytic gradients.
class PolicyParams {
 public:
  PolicyParams() = default;

  // Uniform-initialized (all-zero logits) policy over BOS, EOS plus the
  // given caption tokens, in the given order.
  static PolicyParams uniform(const std::vector<std::string>& tokens,
                              std::size_t num_contexts) {
    PolicyParams p;
    p.vocab_.reserve(tokens.size() + 2);
    p.vocab_.emplace_back(kBosToken);
    p.vocab_.emplace_back(kEosToken);
    for (const auto& t : tokens) p.vocab_.push_back(t);
    p.num_contexts_ = num_contexts;
    p.rebuild_index();
    if (p.vocab_.size() < 3) throw DataError("policy vocab must have V >= 3");
    if (num_contexts < 1) throw DataError("policy needs C >= 1 contexts");
    p.logits_.assign(num_contexts * p.vocab_.size() * p.vocab_.size(), 0.0);
    return p;
  }

  std::size_t vocab_size() const { return vocab_.size(); }
  std::size_t num_contexts() const { return num_contexts_; }
  const std::vector<std::string>& vocab() const { return vocab_; }
  std::vector<double>& logits() { return logits_; }
  const std::vector<double>& logits() const { return logits_; }

  std::size_t row_offset(std::size_t context, std::size_t prev) const {
    return (context * vocab_.size() + prev) * vocab_.size();
  }

  double* row(std::size_t context, std::size_t prev) {
    return logits_.data() + row_offset(context, prev);
  }
  const double* row(std::size_t context, std::size_t prev) const {
    return logits_.data() + row_offset(context, prev);
  }

  std::size_t index_of(std::string_view token) const {
    const auto it = token_index_.find(std::string(token));
    if (it == token_index_.end()) {
      throw DataError("token '" + std::string(token) + "' is not in the vocabulary");
    }
    return it->second;
  }

  void check_context(std::size_t context) const {
    if (context >= num_contexts_) {
      throw DataError("context id " + std::to_string(context) +
                      " out of range [0, " + std::to_string(num_contexts_) + ")");
    }
  }

  bool same_vocab(const PolicyParams& other) const {
    return vocab_ == other.vocab_ && num_contexts_ == other.num_contexts_;
  }

  bool operator==(const PolicyParams& other) const {
    return vocab_ == other.vocab_ && num_contexts_ == other.num_contexts_ &&
           logits_ == other.logits_;
  }

  // Construction from deserialized parts.
  static PolicyParams from_parts(std::vector<std::string> vocab,
                                 std::size_t num_contexts,
                                 std::vector<double> logits) {
    PolicyParams p;
    p.vocab_ = std::move(vocab);
    p.num_contexts_ = num_contexts;
    p.logits_ = std::move(logits);
    if (p.vocab_.size() < 3 || p.vocab_[kBosIndex] != kBosToken ||
        p.vocab_[kEosIndex] != kEosToken) {
      throw DataError("policy vocab must start with reserved BOS/EOS tokens");
    }
    if (num_contexts < 1 ||
        p.logits_.size() != num_contexts * p.vocab_.size() * p.vocab_.size()) {
      throw DataError("policy logits shape does not match (C, V, V)");
    }
    for (double x : p.logits_) {
      if (!std::isfinite(x)) throw DataError("policy logits contain non-finite values");
    }
    p.rebuild_index();
    return p;
  }

 private:
  void rebuild_index() {
    token_index_.clear();
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      if (!token_index_.emplace(vocab_[i], i).second) {
        throw DataError("duplicate vocabulary token '" + vocab_[i] + "'");
      }
    }
  }

  std::vector<std::string> vocab_;
  std::size_t num_contexts_ = 0;
  std::vector<double> logits_;
  std::unordered_map<std::string, std::size_t> token_index_;
};

// Gradient w.r.t. logits; same flat (C, V, V) layout as PolicyParams.
using GradTensor = std::vector<double>;

namespace detail {

inline void log_softmax_row(const double* row, std::size_t v,
                            std::vector<double>& out) {
  out.resize(v);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v; ++i) mx = std::max(mx, row[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < v; ++i) sum += std::exp(row[i] - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t i = 0; i < v; ++i) out[i] = row[i] - lse;
}

inline void softmax_row(const double* row, std::size_t v,
                        std::vector<double>& out) {
  log_softmax_row(row, v, out);
  for (auto& x : out) x = std::exp(x);
}

}  // namespace detail

// Maps caption tokens to vocabulary indices; throws naming any OOV token.
inline std::vector<std::size_t> to_indices(const PolicyParams& params,
                                           const textproc::TokenSequence& tokens) {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(params.index_of(t));
  return ids;
}

// The visited (prev, next) transitions of a sequence framed BOS ... EOS.
// `include_eos = false` models a truncated rollout that never emitted EOS.
inline std::vector<std::pair<std::size_t, std::size_t>> step_pairs(
    const std::vector<std::size_t>& token_ids, bool include_eos = true) {
  std::vector<std::pair<std::size_t, std::size_t>> steps;
  steps.reserve(token_ids.size() + 1);
  std::size_t prev = kBosIndex;
  for (std::size_t id : token_ids) {
    steps.emplace_back(prev, id);
    prev = id;
  }
  if (include_eos) steps.emplace_back(prev, kEosIndex);
  return steps;
}

// Sum of per-step log softmax probabilities, including the EOS step.
inline double log_prob(const PolicyParams& params, std::size_t context,
                       const textproc::TokenSequence& sequence) {
  params.check_context(context);
  const auto ids = to_indices(params, sequence);
  std::vector<double> lsm;
  double total = 0.0;
  for (const auto& [prev, next] : step_pairs(ids)) {
    detail::log_softmax_row(params.row(context, prev), params.vocab_size(), lsm);
    total += lsm[next];
  }
  return total;
}

// Analytic gradient of log_prob: one-hot(next) - softmax(row) accumulated
// over every visited (context, prev) row; zero elsewhere.
inline GradTensor grad_log_prob(const PolicyParams& params, std::size_t context,
                                const textproc::TokenSequence& sequence) {
  params.check_context(context);
  const auto ids = to_indices(params, sequence);
  GradTensor grad(params.logits().size(), 0.0);
  std::vector<double> sm;
  const std::size_t v = params.vocab_size();
  for (const auto& [prev, next] : step_pairs(ids)) {
    detail::softmax_row(params.row(context, prev), v, sm);
    double* g = grad.data() + params.row_offset(context, prev);
    for (std::size_t i = 0; i < v; ++i) g[i] -= sm[i];
    g[next] += 1.0;
  }
  return grad;
}

struct SampleResult {
  textproc::TokenSequence tokens;       // without BOS/EOS
  std::vector<std::size_t> token_ids;
  std::vector<double> logp;             // realized, untempered (for ratios)
  std::vector<double> logp_tempered;    // realized under the sampling law
  bool truncated = false;               // hit max_len before EOS
};

// Ancestral sampling from softmax(logits / temperature) until EOS or
// max_len. Temperatures below 1e-6 decode greedily.
inline SampleResult sample(const PolicyParams& params, std::size_t context,
                           double temperature, std::size_t max_len,
                           std::uint64_t rng_seed) {
  params.check_context(context);
  if (!(temperature > 0.0)) throw DataError("sampling temperature must be > 0");
  if (max_len < 1) throw DataError("sampling max_len must be >= 1");

  rng::SplitMix64 stream(rng_seed);
  const std::size_t v = params.vocab_size();
  const bool greedy = temperature < 1e-6;

  SampleResult out;
  std::vector<double> tempered_logits(v);
  std::vector<double> probs, lsm, lsm_tempered;
  std::size_t prev = kBosIndex;
  for (std::size_t t = 0; t <= max_len; ++t) {
    const double* row = params.row(context, prev);
    std::size_t pick = 0;
    if (greedy) {
      pick = static_cast<std::size_t>(
          std::max_element(row, row + v) - row);
      detail::log_softmax_row(row, v, lsm_tempered);
    } else {
      for (std::size_t i = 0; i < v; ++i) tempered_logits[i] = row[i] / temperature;
      detail::softmax_row(tempered_logits.data(), v, probs);
      detail::log_softmax_row(tempered_logits.data(), v, lsm_tempered);
      const double u = stream.next_unit();
      double acc = 0.0;
      pick = v - 1;
      for (std::size_t i = 0; i < v; ++i) {
        acc += probs[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    }
    detail::log_softmax_row(row, v, lsm);
    out.logp.push_back(lsm[pick]);
    out.logp_tempered.push_back(lsm_tempered[pick]);
    if (pick == kEosIndex) return out;
    out.token_ids.push_back(pick);
    out.tokens.push_back(params.vocab()[pick]);
    prev = pick;
    if (out.tokens.size() == max_len) {
      out.truncated = true;
      return out;
    }
  }
  out.truncated = true;
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint file: magic + version, V, C, vocab, little-endian float64
// logits, trailing FNV-1a checksum over everything before it.

inline constexpr std::string_view kCheckpointMagic = "EMOCAPK1";

namespace detail {

inline void put_u32(std::string& buf, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& buf, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& buf, double x) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(x));
  std::memcpy(&bits, &x, sizeof(bits));
  put_u64(buf, bits);
}

class ByteReader {
 public:
  ByteReader(std::string_view data, const std::string& path)
      : data_(data), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) {
      x |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return x;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) {
      x |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return x;
  }

  double f64() {
    const std::uint64_t bits = u64();
    double x;
    std::memcpy(&x, &bits, sizeof(x));
    return x;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) {
      throw ParseError("checkpoint " + path_ + ": truncated file");
    }
  }

  std::string_view data_;
  std::size_t pos_ = 0;
  const std::string& path_;
};

}  // namespace detail

inline std::string serialize_checkpoint(const PolicyParams& params) {
  std::string buf;
  buf.append(kCheckpointMagic);
  detail::put_u32(buf, 1);  // version
  detail::put_u32(buf, static_cast<std::uint32_t>(params.vocab_size()));
  detail::put_u32(buf, static_cast<std::uint32_t>(params.num_contexts()));
  for (const auto& tok : params.vocab()) {
    detail::put_u32(buf, static_cast<std::uint32_t>(tok.size()));
    buf.append(tok);
  }
  for (double x : params.logits()) detail::put_f64(buf, x);
  detail::put_u64(buf, rng::fnv1a64(buf));
  return buf;
}

inline void save_checkpoint(const PolicyParams& params, const std::string& path) {
  const std::string buf = serialize_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("checkpoint: cannot write " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw ParseError("checkpoint: write failed for " + path);
}

inline PolicyParams deserialize_checkpoint(std::string_view data,
                                           const std::string& path) {
  if (data.size() < kCheckpointMagic.size() + 8 ||
      data.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw ParseError("checkpoint " + path + ": bad magic");
  }
  const std::uint64_t stored_sum =
      detail::ByteReader(data.substr(data.size() - 8), path).u64();
  const std::uint64_t actual_sum = rng::fnv1a64(data.substr(0, data.size() - 8));
  if (stored_sum != actual_sum) {
    throw ParseError("checkpoint " + path + ": checksum mismatch");
  }
  detail::ByteReader r(data.substr(0, data.size() - 8), path);
  r.bytes(kCheckpointMagic.size());
  const std::uint32_t version = r.u32();
  if (version != 1) {
    throw ParseError("checkpoint " + path + ": unsupported version " +
                     std::to_string(version));
  }
  const std::uint32_t v = r.u32();
  const std::uint32_t c = r.u32();
  std::vector<std::string> vocab;
  vocab.reserve(v);
  for (std::uint32_t i = 0; i < v; ++i) {
    const std::uint32_t len = r.u32();
    vocab.push_back(r.bytes(len));
  }
  std::vector<double> logits(static_cast<std::size_t>(c) * v * v);
  for (auto& x : logits) x = r.f64();
  return PolicyParams::from_parts(std::move(vocab), c, std::move(logits));
}

inline PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("checkpoint: cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return deserialize_checkpoint(data, path);
}

}  // namespace emocap::policy
