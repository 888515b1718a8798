#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "emocap/embedding.hpp"
#include "emocap/emotion_space.hpp"
#include "emocap/errors.hpp"
#include "emocap/policy.hpp"
#include "emocap/reward.hpp"
#include "emocap/rng.hpp"
#include "emocap/textproc.hpp"

namespace emocap::training {

struct SftConfig {
  double learning_rate = 1e-4;
  std::size_t epochs = 1;
  std::size_t batch_size = 1;
  std::size_t grad_accum = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0) || batch_size < 1 || grad_accum < 1) {
      throw DataError("sft config fields must be positive");
    }
  }
};

struct GrpoConfig {
  std::size_t rollout_group = 4;        // G
  double kl_coeff = 0.5;
  std::size_t max_response_len = 32;    // desk scale; 2048 upstream
  double temperature = 1.0;
  std::size_t grad_accum = 4;
  double warmup_ratio = 0.05;
  double clip_eps = 0.2;
  double adv_epsilon = 1e-8;
  std::size_t steps = 200;
  std::uint64_t seed = 0;
  double learning_rate = 1e-4;          // shared with the SFT stage

  void validate() const {
    if (rollout_group < 2) throw DataError("grpo rollout group must be G >= 2");
    if (kl_coeff < 0.0) throw DataError("grpo kl_coeff must be >= 0");
    if (!(temperature > 0.0)) throw DataError("grpo temperature must be > 0");
    if (!(learning_rate > 0.0) || max_response_len < 1 || grad_accum < 1) {
      throw DataError("grpo config fields must be positive");
    }
  }
};

// One (context, reference caption) supervision pair.
struct TrainItem {
  std::size_t context_id = 0;
  std::string reference;
};

struct SftStepRecord {
  std::size_t step = 0;
  double loss = 0.0;       // mean NLL per sample in the accumulated batch
  double grad_norm = 0.0;
};

struct GrpoStepRecord {
  std::size_t step = 0;
  double learning_rate = 0.0;
  double mean_r_total = 0.0;
  double max_r_total = 0.0;
  double mean_r_emo = 0.0;
  double mean_kl = 0.0;
  double adv_min = 0.0;
  double adv_max = 0.0;
  double grad_norm = 0.0;
  std::uint64_t first_stream = 0;  // rollout stream index of the first sample
  std::string example;             // first sampled caption of the step
};

template <typename Record>
struct TrainLog {
  std::vector<Record> steps;
  bool diverged = false;
};

using SftLog = TrainLog<SftStepRecord>;
using GrpoLog = TrainLog<GrpoStepRecord>;

namespace detail {

inline double tensor_norm(const policy::GradTensor& g) {
  double acc = 0.0;
  for (double x : g) acc += x * x;
  return std::sqrt(acc);
}

inline void axpy(double a, const policy::GradTensor& x, policy::GradTensor& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n,
                                                 std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  rng::SplitMix64 stream(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(stream.next_below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Phase 1: supervised fine-tuning

struct SftLossResult {
  double loss = 0.0;
  policy::GradTensor grad;  // gradient of the loss (not of log-likelihood)
};

// Negative log-likelihood summed over the batch, with its gradient.
inline SftLossResult sft_loss(const policy::PolicyParams& params,
                              const std::vector<TrainItem>& batch) {
  SftLossResult out;
  out.grad.assign(params.logits().size(), 0.0);
  for (const auto& item : batch) {
    const auto tokens = textproc::tokenize(item.reference);
    try {
      out.loss -= policy::log_prob(params, item.context_id, tokens);
      const auto g = policy::grad_log_prob(params, item.context_id, tokens);
      detail::axpy(-1.0, g, out.grad);
    } catch (const DataError& e) {
      throw DataError("sample (context " + std::to_string(item.context_id) +
                      ", '" + item.reference + "'): " + e.what());
    }
  }
  return out;
}

// Plain gradient descent with gradient accumulation. Deterministic given
// the seed; a non-finite loss aborts with the last good parameters.
inline std::pair<policy::PolicyParams, SftLog> run_sft(
    const SftConfig& config, const std::vector<TrainItem>& dataset,
    const policy::PolicyParams& initial) {
  config.validate();
  if (dataset.empty()) throw DataError("run_sft: dataset is empty");

  policy::PolicyParams params = initial;
  SftLog log;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = detail::shuffled_indices(
        dataset.size(), rng::derive_seed(config.seed, "sft-shuffle", epoch));
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      policy::PolicyParams before = params;
      policy::GradTensor accum(params.logits().size(), 0.0);
      double loss_sum = 0.0;
      std::size_t samples = 0;
      for (std::size_t micro = 0;
           micro < config.grad_accum && cursor < order.size(); ++micro) {
        std::vector<TrainItem> batch;
        for (std::size_t b = 0; b < config.batch_size && cursor < order.size();
             ++b) {
          batch.push_back(dataset[order[cursor++]]);
        }
        const SftLossResult r = sft_loss(params, batch);
        loss_sum += r.loss;
        detail::axpy(1.0, r.grad, accum);
        samples += batch.size();
      }
      if (!std::isfinite(loss_sum)) {
        log.diverged = true;
        return {std::move(before), std::move(log)};
      }
      const double scale = config.learning_rate / static_cast<double>(samples);
      for (std::size_t i = 0; i < accum.size(); ++i) {
        params.logits()[i] -= scale * accum[i];
      }
      SftStepRecord rec;
      rec.step = step++;
      rec.loss = loss_sum / static_cast<double>(samples);
      rec.grad_norm = detail::tensor_norm(accum) / static_cast<double>(samples);
      log.steps.push_back(std::move(rec));
    }
  }
  return {std::move(params), std::move(log)};
}

// ---------------------------------------------------------------------------
// Phase 2: group-relative policy optimization

// Group-normalized advantages: (r - mean) / (population std + epsilon).
inline std::vector<double> group_advantages(const std::vector<double>& rewards,
                                            double epsilon) {
  if (rewards.size() < 2) {
    throw DataError("group_advantages: need G >= 2 rewards");
  }
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;
  const double denom = std::sqrt(var) + epsilon;
  std::vector<double> adv;
  adv.reserve(rewards.size());
  for (double r : rewards) adv.push_back((r - mean) / denom);
  return adv;
}

// Per-token k3 estimator rho - ln(rho) - 1 with rho = pi_ref / pi_theta,
// averaged over the sequence's steps (EOS step included).
inline double kl_penalty(const policy::PolicyParams& params,
                         const policy::PolicyParams& ref_params,
                         std::size_t context,
                         const textproc::TokenSequence& sequence) {
  if (!params.same_vocab(ref_params)) {
    throw DataError("kl_penalty: policies must share vocabulary and contexts");
  }
  params.check_context(context);
  const auto ids = policy::to_indices(params, sequence);
  const auto steps = policy::step_pairs(ids);
  std::vector<double> lsm_cur, lsm_ref;
  double acc = 0.0;
  for (const auto& [prev, next] : steps) {
    policy::detail::log_softmax_row(params.row(context, prev),
                                    params.vocab_size(), lsm_cur);
    policy::detail::log_softmax_row(ref_params.row(context, prev),
                                    ref_params.vocab_size(), lsm_ref);
    const double log_rho = lsm_ref[next] - lsm_cur[next];
    acc += std::exp(log_rho) - log_rho - 1.0;
  }
  return acc / static_cast<double>(steps.size());
}

// A sampled response with everything the surrogate needs once rollouts
// are frozen: visited transitions, behavior-policy log-probs, advantage.
struct Rollout {
  std::size_t context_id = 0;
  std::vector<std::pair<std::size_t, std::size_t>> steps;
  std::vector<double> logp_old;  // untempered log-probs under the sampler
  std::string text;
  double reward = 0.0;
  double r_emo = 0.0;
  double advantage = 0.0;
};

struct SurrogateResult {
  double objective = 0.0;
  policy::GradTensor grad;
  double mean_kl = 0.0;  // mean k3 over all tokens (diagnostic)
};

// Clipped importance-ratio objective with a k3 KL penalty toward the
// frozen reference:
//   J = mean_groups mean_members mean_tokens
//         min(rho_t A, clip(rho_t, 1-eps, 1+eps) A) - kl_coeff * k3_t
// evaluated at arbitrary theta so the analytic gradient can be checked
// against finite differences with rollouts held fixed.
inline SurrogateResult grpo_surrogate(
    const policy::PolicyParams& params, const policy::PolicyParams& ref_params,
    const std::vector<std::vector<Rollout>>& groups, const GrpoConfig& config) {
  SurrogateResult out;
  out.grad.assign(params.logits().size(), 0.0);
  const std::size_t v = params.vocab_size();
  std::vector<double> lsm, sm, lsm_ref;
  std::size_t total_tokens = 0;
  double kl_sum = 0.0;

  const double group_weight = 1.0 / static_cast<double>(groups.size());
  for (const auto& group : groups) {
    const double member_weight =
        group_weight / static_cast<double>(group.size());
    for (const auto& rollout : group) {
      const double token_weight =
          member_weight / static_cast<double>(rollout.steps.size());
      for (std::size_t t = 0; t < rollout.steps.size(); ++t) {
        const auto [prev, next] = rollout.steps[t];
        policy::detail::log_softmax_row(params.row(rollout.context_id, prev), v,
                                        lsm);
        policy::detail::log_softmax_row(
            ref_params.row(rollout.context_id, prev), v, lsm_ref);
        const double lp = lsm[next];
        const double rho = std::exp(lp - rollout.logp_old[t]);
        const double adv = rollout.advantage;
        const double unclipped = rho * adv;
        const double clipped =
            std::clamp(rho, 1.0 - config.clip_eps, 1.0 + config.clip_eps) * adv;
        const double log_rho_ref = lsm_ref[next] - lp;
        const double rho_ref = std::exp(log_rho_ref);
        const double k3 = rho_ref - log_rho_ref - 1.0;
        kl_sum += k3;
        ++total_tokens;

        out.objective += token_weight *
                         (std::min(unclipped, clipped) - config.kl_coeff * k3);

        // d/d(logit row) of the token objective, via d/d(log pi):
        //   clip term: A*rho when the unclipped branch attains the min,
        //              0 when the active clamp froze the ratio;
        //   KL term:   kl_coeff * (rho_ref - 1).
        double dobj_dlp = config.kl_coeff * (rho_ref - 1.0);
        if (unclipped <= clipped) dobj_dlp += adv * rho;
        const double w = token_weight * dobj_dlp;
        if (w != 0.0) {
          policy::detail::softmax_row(params.row(rollout.context_id, prev), v,
                                      sm);
          double* g =
              out.grad.data() + params.row_offset(rollout.context_id, prev);
          for (std::size_t i = 0; i < v; ++i) g[i] -= w * sm[i];
          g[next] += w;
        }
      }
    }
  }
  out.mean_kl = total_tokens == 0 ? 0.0 : kl_sum / static_cast<double>(total_tokens);
  return out;
}

// Shared scoring context for rollout evaluation.
struct RewardContext {
  const emotion_space::EmotionAnchorSet& anchors;
  const embedding::Embedder& embedder;
  reward::RewardWeights weights;
  const metrics::Stoplist& stoplist;
};

// Samples one group of G responses for a batch item and scores them.
// Stream indices are globally unique per rollout for reproducibility.
inline std::vector<Rollout> sample_group(const policy::PolicyParams& params,
                                         const TrainItem& item,
                                         const GrpoConfig& config,
                                         const RewardContext& ctx,
                                         std::uint64_t first_stream) {
  std::vector<Rollout> group;
  std::vector<std::string> texts;
  group.reserve(config.rollout_group);
  for (std::size_t g = 0; g < config.rollout_group; ++g) {
    const auto s = policy::sample(
        params, item.context_id, config.temperature, config.max_response_len,
        rng::derive_seed(config.seed, "rollout", first_stream + g));
    Rollout r;
    r.context_id = item.context_id;
    r.steps = policy::step_pairs(s.token_ids, /*include_eos=*/!s.truncated);
    r.logp_old = s.logp;
    r.text = textproc::join(s.tokens);
    texts.push_back(r.text);
    group.push_back(std::move(r));
  }
  const auto breakdowns = reward::score_group(texts, item.reference, ctx.anchors,
                                              ctx.embedder, ctx.weights,
                                              ctx.stoplist);
  std::vector<double> rewards;
  rewards.reserve(breakdowns.size());
  for (const auto& b : breakdowns) rewards.push_back(b.r_total);
  const auto advantages = group_advantages(rewards, config.adv_epsilon);
  for (std::size_t g = 0; g < group.size(); ++g) {
    group[g].reward = rewards[g];
    group[g].r_emo = breakdowns[g].r_emo;
    group[g].advantage = advantages[g];
  }
  return group;
}

// Linear warmup over warmup_ratio * steps optimizer steps, then constant.
inline double warmup_learning_rate(const GrpoConfig& config, std::size_t step) {
  const std::size_t warmup_steps = static_cast<std::size_t>(
      std::ceil(config.warmup_ratio * static_cast<double>(config.steps)));
  if (warmup_steps == 0 || step + 1 >= warmup_steps) return config.learning_rate;
  return config.learning_rate * static_cast<double>(step + 1) /
         static_cast<double>(warmup_steps);
}

// One optimizer step: rollouts + scores + advantages for `grad_accum`
// batch items, one ascent step on the surrogate mean. Single inner epoch,
// so the ratio is 1 at gradient time and the clip is inert but present.
inline GrpoStepRecord grpo_step(policy::PolicyParams& params,
                                const policy::PolicyParams& ref_params,
                                const std::vector<TrainItem>& batch,
                                const GrpoConfig& config,
                                const RewardContext& ctx, std::size_t step_index,
                                std::uint64_t first_stream) {
  if (batch.empty()) throw DataError("grpo_step: empty batch");
  std::vector<std::vector<Rollout>> groups;
  groups.reserve(batch.size());
  std::uint64_t stream = first_stream;

  GrpoStepRecord rec;
  rec.step = step_index;
  rec.first_stream = first_stream;
  double r_sum = 0.0;
  double r_max = -std::numeric_limits<double>::infinity();
  double emo_sum = 0.0;
  double adv_min = std::numeric_limits<double>::infinity();
  double adv_max = -std::numeric_limits<double>::infinity();
  std::size_t n_rollouts = 0;

  for (const auto& item : batch) {
    const auto ref_tokens = textproc::tokenize(item.reference);
    if (ref_tokens.empty()) {
      throw DataError("degenerate reference '" + item.reference + "'");
    }
    auto group = sample_group(params, item, config, ctx, stream);
    stream += config.rollout_group;
    for (const auto& r : group) {
      r_sum += r.reward;
      r_max = std::max(r_max, r.reward);
      emo_sum += r.r_emo;
      adv_min = std::min(adv_min, r.advantage);
      adv_max = std::max(adv_max, r.advantage);
      ++n_rollouts;
    }
    if (rec.example.empty()) rec.example = group.front().text;
    groups.push_back(std::move(group));
  }

  const SurrogateResult surrogate =
      grpo_surrogate(params, ref_params, groups, config);
  for (double g : surrogate.grad) {
    if (!std::isfinite(g)) {
      throw DataError("grpo_step " + std::to_string(step_index) +
                      ": non-finite gradient");
    }
  }
  const double lr = warmup_learning_rate(config, step_index);
  for (std::size_t i = 0; i < surrogate.grad.size(); ++i) {
    params.logits()[i] += lr * surrogate.grad[i];
  }

  rec.learning_rate = lr;
  rec.mean_r_total = r_sum / static_cast<double>(n_rollouts);
  rec.max_r_total = r_max;
  rec.mean_r_emo = emo_sum / static_cast<double>(n_rollouts);
  rec.mean_kl = surrogate.mean_kl;
  rec.adv_min = adv_min;
  rec.adv_max = adv_max;
  rec.grad_norm = detail::tensor_norm(surrogate.grad);
  return rec;
}

// Reference policy frozen at the SFT checkpoint; batch items drawn by
// seeded shuffles, grad_accum items per optimizer step.
inline std::pair<policy::PolicyParams, GrpoLog> run_grpo(
    const GrpoConfig& config, const std::vector<TrainItem>& dataset,
    const policy::PolicyParams& sft_params, const RewardContext& ctx) {
  config.validate();
  if (dataset.empty()) throw DataError("run_grpo: dataset is empty");
  for (const auto& item : dataset) {
    if (item.context_id >= sft_params.num_contexts()) {
      throw DataError("dataset context " + std::to_string(item.context_id) +
                      " out of range for policy");
    }
  }

  policy::PolicyParams params = sft_params;
  const policy::PolicyParams& ref_params = sft_params;
  GrpoLog log;

  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  std::size_t pass = 0;
  std::uint64_t stream = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<TrainItem> batch;
    for (std::size_t i = 0; i < config.grad_accum; ++i) {
      if (cursor >= order.size()) {
        order = detail::shuffled_indices(
            dataset.size(), rng::derive_seed(config.seed, "grpo-shuffle", pass++));
        cursor = 0;
      }
      batch.push_back(dataset[order[cursor++]]);
    }
    log.steps.push_back(
        grpo_step(params, ref_params, batch, config, ctx, step, stream));
    stream += config.grad_accum * config.rollout_group;
  }
  return {std::move(params), std::move(log)};
}

// ---------------------------------------------------------------------------
// Held-out evaluation shared by the trainers and the acceptance suite.

struct PolicyEvaluation {
  double mean_r_total = 0.0;
  double mean_r_emo = 0.0;
  std::size_t unique_vocab = 0;
  std::size_t captions = 0;
};

// Samples `samples_per_item` captions per held-out item at the given
// temperature and scores them against the item's reference.
inline PolicyEvaluation evaluate_policy(
    const policy::PolicyParams& params, const std::vector<TrainItem>& items,
    const RewardContext& ctx, std::uint64_t eval_seed,
    std::size_t samples_per_item = 8, double temperature = 1.0,
    std::size_t max_len = 32) {
  if (items.empty()) throw DataError("evaluate_policy: no items");
  PolicyEvaluation out;
  std::vector<textproc::TokenSequence> sampled;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t k = 0; k < samples_per_item; ++k) {
      const auto s = policy::sample(
          params, items[i].context_id, temperature, max_len,
          rng::derive_seed(eval_seed, "eval", i * samples_per_item + k));
      const std::string text = textproc::join(s.tokens);
      const auto b = reward::score_pair(text, items[i].reference, ctx.anchors,
                                        ctx.embedder, ctx.weights, ctx.stoplist);
      out.mean_r_total += b.r_total;
      out.mean_r_emo += b.r_emo;
      sampled.push_back(s.tokens);
      ++out.captions;
    }
  }
  out.mean_r_total /= static_cast<double>(out.captions);
  out.mean_r_emo /= static_cast<double>(out.captions);
  out.unique_vocab = textproc::unique_vocab(sampled);
  return out;
}

}  // namespace emocap::training
