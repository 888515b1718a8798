#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "emocap/embedding.hpp"
#include "emocap/emotion_space.hpp"
#include "emocap/errors.hpp"
#include "emocap/metrics.hpp"
#include "emocap/textproc.hpp"

namespace emocap::reward {

struct RewardWeights {
  double alpha = 1.0;      // weight on emotion alignment
  double beta = 1.0;       // weight on text quality (BLEU + SPICE)
  double emo_floor = 0.0;  // substituted when the emotion term is undefined

  void validate() const {
    if (!(alpha > 0.0) || !(beta > 0.0)) {
      throw DataError("reward weights must be strictly positive");
    }
  }
};

struct RewardBreakdown {
  double r_emo = 0.0;
  double s_bleu = 0.0;   // smoothed sentence BLEU-4
  double s_spice = 0.0;
  double r_total = 0.0;  // alpha*r_emo + beta*(s_bleu + s_spice)
  bool degenerate = false;
};

// Composite reward for one caption pair. A generation whose emotion term
// is undefined (empty text, zero-direction embedding) takes the floor and
// is flagged; a degenerate reference is a dataset error instead.
inline RewardBreakdown score_pair(
    std::string_view gen, std::string_view ref,
    const emotion_space::EmotionAnchorSet& anchors,
    const embedding::Embedder& embedder, const RewardWeights& weights,
    const metrics::Stoplist& stoplist = metrics::default_stoplist()) {
  const auto ref_tokens = textproc::tokenize(ref);
  if (ref_tokens.empty()) {
    throw DataError("reference caption tokenizes to nothing: '" +
                    std::string(ref) + "'");
  }
  const auto gen_tokens = textproc::tokenize(gen);

  RewardBreakdown out;
  const auto emo = emotion_space::emotion_reward(gen, ref, anchors, embedder);
  if (emo) {
    out.r_emo = *emo;
  } else {
    out.r_emo = weights.emo_floor;
    out.degenerate = true;
  }
  out.s_bleu = metrics::bleu(gen_tokens, ref_tokens, 4, /*smoothed=*/true);
  out.s_spice = metrics::spice_lite(gen_tokens, ref_tokens, stoplist);
  out.r_total = weights.alpha * out.r_emo +
                weights.beta * (out.s_bleu + out.s_spice);
  return out;
}

// Element-wise score_pair over one rollout group; output order matches
// input order.
inline std::vector<RewardBreakdown> score_group(
    const std::vector<std::string>& gens, std::string_view ref,
    const emotion_space::EmotionAnchorSet& anchors,
    const embedding::Embedder& embedder, const RewardWeights& weights,
    const metrics::Stoplist& stoplist = metrics::default_stoplist()) {
  if (gens.size() < 2) {
    throw DataError("score_group: rollout group must have G >= 2 members");
  }
  std::vector<RewardBreakdown> out;
  out.reserve(gens.size());
  for (const auto& gen : gens) {
    out.push_back(score_pair(gen, ref, anchors, embedder, weights, stoplist));
  }
  return out;
}

}  // namespace emocap::reward
