#pragma once

#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "emocap/errors.hpp"
#include "emocap/metrics.hpp"
#include "emocap/reward.hpp"
#include "emocap/training.hpp"

namespace emocap::report {

inline constexpr std::string_view kPairsFormat = "emocap.pairs.v1";
inline constexpr std::string_view kBreakdownsFormat = "emocap.breakdowns.v1";
inline constexpr std::string_view kEvalReportFormat = "emocap.evalreport.v1";
inline constexpr std::string_view kTrainLogFormat = "emocap.trainlog.v1";

// Caveat header stamped on every evaluation artifact.
inline constexpr std::string_view kMetricCaveats =
    "# metric variants: meteor_lite uses exact-match alignment (no synonym "
    "database); spice_lite scores content-word unigram+bigram sets (no scene "
    "graph); spider = (cider_d + spice_lite)/2; corpus BLEU is unsmoothed, "
    "per-sample and reward BLEU is smoothed sentence BLEU-4";

struct PairRecord {
  std::string gen;
  std::string ref;
  std::string id;  // optional
};

inline std::vector<PairRecord> load_pairs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("pairs: cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& what) {
    throw ParseError("pairs " + path + ":" + std::to_string(line_no) + ": " +
                     what);
  };
  if (!std::getline(in, line)) fail("missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kPairsFormat) {
    fail("expected header '" + std::string(kPairsFormat) + "'");
  }
  std::vector<PairRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PairRecord rec;
      rec.gen = j.at("gen").get<std::string>();
      rec.ref = j.at("ref").get<std::string>();
      rec.id = j.value("id", "");
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    }
  }
  return out;
}

inline nlohmann::json breakdown_json(const reward::RewardBreakdown& b,
                                     const std::string& id) {
  nlohmann::json j;
  if (!id.empty()) j["id"] = id;
  j["r_emo"] = b.r_emo;
  j["s_bleu"] = b.s_bleu;
  j["s_spice"] = b.s_spice;
  j["r_total"] = b.r_total;
  j["degenerate"] = b.degenerate;
  return j;
}

inline void write_breakdowns(const std::vector<PairRecord>& pairs,
                             const std::vector<reward::RewardBreakdown>& scores,
                             std::ostream& out) {
  out << kBreakdownsFormat << "\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out << breakdown_json(scores[i], pairs[i].id).dump() << "\n";
  }
}

// ---------------------------------------------------------------------------
// Evaluation report

inline nlohmann::json corpus_json(const metrics::MetricReport& r) {
  nlohmann::json j;
  j["bleu1"] = r.bleu1;
  j["bleu2"] = r.bleu2;
  j["bleu3"] = r.bleu3;
  j["bleu4"] = r.bleu4;
  j["rouge_l"] = r.rouge_l;
  j["meteor_lite"] = r.meteor_lite;
  j["cider_d"] = r.cider_d;
  j["spice_lite"] = r.spice_lite;
  j["spider"] = r.spider;
  j["vocab"] = r.vocab;
  return j;
}

inline void write_eval_report(const metrics::CorpusEvaluation& eval,
                              const std::vector<std::string>& ids,
                              std::ostream& out) {
  out << kEvalReportFormat << "\n" << kMetricCaveats << "\n";
  for (std::size_t i = 0; i < eval.samples.size(); ++i) {
    const auto& m = eval.samples[i];
    nlohmann::json j;
    j["id"] = i < ids.size() ? ids[i] : std::to_string(i);
    j["bleu4_smoothed"] = m.bleu4_smoothed;
    j["rouge_l"] = m.rouge_l;
    j["meteor_lite"] = m.meteor_lite;
    j["cider_d"] = m.cider_d;
    j["spice_lite"] = m.spice_lite;
    j["spider"] = m.spider;
    out << j.dump() << "\n";
  }
  out << nlohmann::json{{"corpus", corpus_json(eval.corpus)}}.dump() << "\n";
}

// Table-style corpus summary for the terminal.
inline void print_eval_table(const metrics::MetricReport& r, std::ostream& out) {
  char line[256];
  out << "BLEU1   BLEU2   BLEU3   BLEU4   ROUGE-L METEOR* SPIDER* Vocab\n";
  std::snprintf(line, sizeof(line),
                "%-7.3f %-7.3f %-7.3f %-7.3f %-7.3f %-7.3f %-7.3f %zu\n",
                r.bleu1, r.bleu2, r.bleu3, r.bleu4, r.rouge_l, r.meteor_lite,
                r.spider, r.vocab);
  out << line
      << "(*) simplified variants; see the report header for details\n";
}

// ---------------------------------------------------------------------------
// Train logs: header + one JSON record per optimizer step.

inline void write_sft_log(const training::SftLog& log, std::ostream& out) {
  out << kTrainLogFormat << "\n";
  for (const auto& s : log.steps) {
    nlohmann::json j;
    j["step"] = s.step;
    j["loss"] = s.loss;
    j["grad_norm"] = s.grad_norm;
    out << j.dump() << "\n";
  }
  if (log.diverged) {
    out << nlohmann::json{{"diverged", true}}.dump() << "\n";
  }
}

inline void write_grpo_log(const training::GrpoLog& log, std::ostream& out) {
  out << kTrainLogFormat << "\n";
  for (const auto& s : log.steps) {
    nlohmann::json j;
    j["step"] = s.step;
    j["learning_rate"] = s.learning_rate;
    j["mean_r_total"] = s.mean_r_total;
    j["max_r_total"] = s.max_r_total;
    j["mean_r_emo"] = s.mean_r_emo;
    j["mean_kl"] = s.mean_kl;
    j["adv_min"] = s.adv_min;
    j["adv_max"] = s.adv_max;
    j["grad_norm"] = s.grad_norm;
    j["first_stream"] = s.first_stream;
    j["example"] = s.example;
    out << j.dump() << "\n";
  }
}

}  // namespace emocap::report
