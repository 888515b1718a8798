// Command-line front end: gen-synth, build-anchors, score, evaluate,
// train-sft, train-grpo. Every run is reproducible from its manifest.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emocap/data.hpp"
#include "emocap/embedding.hpp"
#include "emocap/emotion_space.hpp"
#include "emocap/errors.hpp"
#include "emocap/metrics.hpp"
#include "emocap/policy.hpp"
#include "emocap/report.hpp"
#include "emocap/reward.hpp"
#include "emocap/run_config.hpp"
#include "emocap/textproc.hpp"
#include "emocap/training.hpp"
#include "emocap/version.hpp"

namespace fs = std::filesystem;
using emocap::cli::RunConfig;

namespace {

std::string version_text() {
  std::string out = "emocap ";
  out += emocap::version::kTool;
  out += "\nfile formats:\n";
  for (const auto& f : emocap::version::kFormats) {
    out += "  ";
    out += f.name;
    out += ": ";
    out += f.id;
    out += "\n";
  }
  return out;
}

void add_str(CLI::App* cmd, RunConfig& cfg, const std::string& name,
             const std::string& desc, bool required = false) {
  auto* opt = cmd->add_option_function<std::string>(
      "--" + name,
      [&cfg, name](const std::string& v) { cfg.set_flag(name, v); }, desc);
  if (required) opt->required();
}

void add_u64(CLI::App* cmd, RunConfig& cfg, const std::string& name,
             const std::string& desc) {
  cmd->add_option_function<std::uint64_t>(
      "--" + name,
      [&cfg, name](const std::uint64_t& v) { cfg.set_flag(name, v); }, desc);
}

void add_usize(CLI::App* cmd, RunConfig& cfg, const std::string& name,
               const std::string& desc) {
  cmd->add_option_function<std::size_t>(
      "--" + name,
      [&cfg, name](const std::size_t& v) { cfg.set_flag(name, v); }, desc);
}

void add_f64(CLI::App* cmd, RunConfig& cfg, const std::string& name,
             const std::string& desc) {
  cmd->add_option_function<double>(
      "--" + name, [&cfg, name](const double& v) { cfg.set_flag(name, v); },
      desc);
}

struct CommonFlags {
  std::string config_path;
};

std::deque<CommonFlags>& common_flag_storage() {
  static std::deque<CommonFlags> storage;
  return storage;
}

CommonFlags* add_common(CLI::App* cmd, RunConfig& cfg) {
  CommonFlags* common = &common_flag_storage().emplace_back();
  add_u64(cmd, cfg, "seed", "master seed; all random streams derive from it");
  add_str(cmd, cfg, "out-dir", "output directory (all files land here)", true);
  cmd->add_option("--config", common->config_path,
                  "JSON config file or run manifest; precedence flag > file > default");
  add_str(cmd, cfg, "embedder-backend", "hashed | table");
  add_str(cmd, cfg, "embedding-table", "embedding table file (table backend)");
  add_usize(cmd, cfg, "embedder-dim", "latent dimension D (>= 2)");
  add_u64(cmd, cfg, "embedder-seed", "seed of the hashed embedder");
  add_str(cmd, cfg, "oov-policy", "fallback_hashed | error");
  add_f64(cmd, cfg, "alpha", "weight of the emotion term");
  add_f64(cmd, cfg, "beta", "weight of the BLEU+SPICE term");
  add_f64(cmd, cfg, "emo-floor", "emotion reward for degenerate generations");
  add_str(cmd, cfg, "stoplist", "stoplist file (defaults to the built-in list)");
  return common;
}

void finish_config(RunConfig& cfg, const CommonFlags& common) {
  if (!common.config_path.empty()) cfg.load_file(common.config_path);
}

fs::path ensure_out_dir(const RunConfig& cfg) {
  const fs::path dir = cfg.get<std::string>("out-dir");
  fs::create_directories(dir);
  return dir;
}

emocap::metrics::Stoplist load_stoplist(const RunConfig& cfg) {
  const std::string path = cfg.get<std::string>("stoplist");
  if (path.empty()) return emocap::metrics::default_stoplist();
  return emocap::metrics::Stoplist::from_file(path);
}

struct LoadedDataset {
  std::vector<emocap::data::CaptionSample> samples;
  emocap::data::SplitSet split;
  std::vector<emocap::emotion_space::EmotionLexicon> lexicons;
  fs::path dataset_file, split_file, lexicon_file;
};

LoadedDataset load_dataset_dir(const RunConfig& cfg) {
  LoadedDataset out;
  const fs::path dir = cfg.get<std::string>("dataset-dir");
  out.dataset_file = dir / "dataset.txt";
  out.split_file = dir / "splits.txt";
  out.lexicon_file = dir / "lexicons.txt";
  out.lexicons = emocap::emotion_space::load_lexicons(out.lexicon_file.string());
  std::vector<std::string> labels;
  for (const auto& lex : out.lexicons) labels.push_back(lex.name);
  out.samples = emocap::data::load_dataset(out.dataset_file.string(), &labels);
  out.split = emocap::data::load_split(out.split_file.string());
  return out;
}

std::vector<emocap::training::TrainItem> to_items(
    const std::vector<emocap::data::CaptionSample>& samples) {
  std::vector<emocap::training::TrainItem> items;
  items.reserve(samples.size());
  for (const auto& s : samples) {
    items.push_back({s.context_id, s.reference_caption});
  }
  return items;
}

// Vocabulary and context count for a fresh policy: sorted union of caption
// tokens over the whole dataset, so held-out references stay in-vocabulary.
emocap::policy::PolicyParams fresh_policy(
    const std::vector<emocap::data::CaptionSample>& samples) {
  std::set<std::string> tokens;
  std::size_t max_context = 0;
  for (const auto& s : samples) {
    for (auto& t : emocap::textproc::tokenize(s.reference_caption)) {
      tokens.insert(std::move(t));
    }
    max_context = std::max(max_context, s.context_id);
  }
  return emocap::policy::PolicyParams::uniform(
      std::vector<std::string>(tokens.begin(), tokens.end()), max_context + 1);
}

nlohmann::json eval_json(const emocap::training::PolicyEvaluation& e) {
  return {{"mean_r_total", e.mean_r_total},
          {"mean_r_emo", e.mean_r_emo},
          {"unique_vocab", e.unique_vocab},
          {"captions", e.captions}};
}

// ---------------------------------------------------------------------------

int cmd_gen_synth(RunConfig& cfg) {
  const std::string spec_path = cfg.get<std::string>("spec");
  auto spec = emocap::data::SynthSpec::from_file(spec_path);
  if (!cfg.is_default("seed")) {
    spec.seed = cfg.get<std::uint64_t>("seed");
  } else {
    cfg.set_flag("seed", spec.seed);  // record the effective seed
  }
  const auto bundle = emocap::data::generate_synthetic(spec);
  const fs::path dir = ensure_out_dir(cfg);
  emocap::data::save_dataset(bundle.samples, (dir / "dataset.txt").string());
  emocap::emotion_space::save_lexicons(bundle.lexicons,
                                       (dir / "lexicons.txt").string());
  emocap::data::save_split(bundle.split, (dir / "splits.txt").string());
  emocap::cli::write_manifest(
      (dir / "manifest.json").string(), "gen-synth", cfg,
      {{"spec", spec_path}}, {"dataset.txt", "lexicons.txt", "splits.txt"});
  std::cout << "generated " << bundle.samples.size() << " samples ("
            << bundle.split.train.size() << " train / "
            << bundle.split.dev.size() << " dev / " << bundle.split.test.size()
            << " test), " << bundle.num_contexts << " contexts\n";
  return 0;
}

int cmd_build_anchors(RunConfig& cfg) {
  const std::string lexicon_path = cfg.get<std::string>("lexicons");
  const auto lexicons = emocap::emotion_space::load_lexicons(lexicon_path);
  const emocap::embedding::Embedder embedder(cfg.embedder_config());
  const auto anchors = emocap::emotion_space::build_anchor_set(lexicons, embedder);
  const fs::path dir = ensure_out_dir(cfg);
  emocap::emotion_space::save_anchor_snapshot(anchors,
                                              (dir / "anchors.txt").string());
  emocap::cli::write_manifest((dir / "manifest.json").string(), "build-anchors",
                              cfg, {{"lexicons", lexicon_path}},
                              {"anchors.txt"});
  std::cout << "built " << anchors.size() << " anchors (D="
            << embedder.dimension() << ")\n";
  return 0;
}

int cmd_score(RunConfig& cfg) {
  const std::string pairs_path = cfg.get<std::string>("pairs");
  const std::string anchors_path = cfg.get<std::string>("anchors");
  const auto pairs = emocap::report::load_pairs(pairs_path);
  const emocap::embedding::Embedder embedder(cfg.embedder_config());
  const auto anchors =
      emocap::emotion_space::load_anchor_snapshot(anchors_path, embedder);
  const auto weights = cfg.reward_weights();
  const auto stoplist = load_stoplist(cfg);

  std::vector<emocap::reward::RewardBreakdown> scores;
  scores.reserve(pairs.size());
  for (const auto& p : pairs) {
    scores.push_back(emocap::reward::score_pair(p.gen, p.ref, anchors, embedder,
                                                weights, stoplist));
  }
  const fs::path dir = ensure_out_dir(cfg);
  std::ofstream out(dir / "breakdowns.txt", std::ios::binary);
  emocap::report::write_breakdowns(pairs, scores, out);
  emocap::report::write_breakdowns(pairs, scores, std::cout);
  emocap::cli::write_manifest(
      (dir / "manifest.json").string(), "score", cfg,
      {{"pairs", pairs_path}, {"anchors", anchors_path}}, {"breakdowns.txt"});
  return 0;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw emocap::ParseError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

int cmd_evaluate(RunConfig& cfg) {
  const std::string hyp_path = cfg.get<std::string>("hyp-file");
  const std::string ref_path = cfg.get<std::string>("ref-file");
  const auto hyp_lines = read_lines(hyp_path);
  const auto ref_lines = read_lines(ref_path);
  if (hyp_lines.size() != ref_lines.size()) {
    throw emocap::DataError("hyp file has " + std::to_string(hyp_lines.size()) +
                            " lines but ref file has " +
                            std::to_string(ref_lines.size()));
  }
  std::vector<emocap::textproc::TokenSequence> hyps, refs;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < hyp_lines.size(); ++i) {
    hyps.push_back(emocap::textproc::tokenize(hyp_lines[i]));
    refs.push_back(emocap::textproc::tokenize(ref_lines[i]));
    ids.push_back(std::to_string(i));
  }
  const auto stoplist = load_stoplist(cfg);
  const auto eval = emocap::metrics::evaluate_corpus(hyps, refs, stoplist);

  const fs::path dir = ensure_out_dir(cfg);
  std::ofstream out(dir / "report.txt", std::ios::binary);
  emocap::report::write_eval_report(eval, ids, out);
  emocap::report::print_eval_table(eval.corpus, std::cout);
  emocap::cli::write_manifest((dir / "manifest.json").string(), "evaluate", cfg,
                              {{"hyp-file", hyp_path}, {"ref-file", ref_path}},
                              {"report.txt"});
  return 0;
}

int cmd_train_sft(RunConfig& cfg) {
  const auto data = load_dataset_dir(cfg);
  const auto train =
      emocap::data::select_split(data.samples, data.split.train);
  if (train.empty()) throw emocap::DataError("train split is empty");
  const auto initial = fresh_policy(data.samples);
  const auto [params, log] =
      emocap::training::run_sft(cfg.sft_config(), to_items(train), initial);

  const fs::path dir = ensure_out_dir(cfg);
  emocap::policy::save_checkpoint(params, (dir / "checkpoint.bin").string());
  std::ofstream logout(dir / "trainlog.txt", std::ios::binary);
  emocap::report::write_sft_log(log, logout);
  nlohmann::json extra;
  extra["diverged"] = log.diverged;
  extra["vocab_size"] = params.vocab_size();
  extra["contexts"] = params.num_contexts();
  if (!log.steps.empty()) extra["final_loss"] = log.steps.back().loss;
  emocap::cli::write_manifest((dir / "manifest.json").string(), "train-sft", cfg,
                              {{"dataset", data.dataset_file.string()},
                               {"splits", data.split_file.string()},
                               {"lexicons", data.lexicon_file.string()}},
                              {"checkpoint.bin", "trainlog.txt"}, extra);
  std::cout << "sft: " << log.steps.size() << " optimizer steps, V="
            << params.vocab_size() << ", C=" << params.num_contexts();
  if (!log.steps.empty()) std::cout << ", final loss " << log.steps.back().loss;
  std::cout << (log.diverged ? " [diverged: last good checkpoint kept]" : "")
            << "\n";
  return 0;
}

int cmd_train_grpo(RunConfig& cfg) {
  const auto data = load_dataset_dir(cfg);
  const auto train = emocap::data::select_split(data.samples, data.split.train);
  const auto dev = emocap::data::select_split(data.samples, data.split.dev);
  if (train.empty()) throw emocap::DataError("train split is empty");
  const std::string ckpt_path = cfg.get<std::string>("checkpoint");
  const std::string anchors_path = cfg.get<std::string>("anchors");
  const auto sft_params = emocap::policy::load_checkpoint(ckpt_path);
  const emocap::embedding::Embedder embedder(cfg.embedder_config());
  const auto anchors =
      emocap::emotion_space::load_anchor_snapshot(anchors_path, embedder);
  const auto weights = cfg.reward_weights();
  const auto stoplist = load_stoplist(cfg);
  const emocap::training::RewardContext ctx{anchors, embedder, weights,
                                            stoplist};
  const auto grpo_cfg = cfg.grpo_config();
  const auto [params, log] =
      emocap::training::run_grpo(grpo_cfg, to_items(train), sft_params, ctx);

  const std::uint64_t eval_seed =
      emocap::rng::derive_seed(cfg.get<std::uint64_t>("seed"), "heldout-eval");
  const std::size_t eval_samples = cfg.get<std::size_t>("eval-samples");
  nlohmann::json extra;
  if (!dev.empty()) {
    const auto before = emocap::training::evaluate_policy(
        sft_params, to_items(dev), ctx, eval_seed, eval_samples,
        grpo_cfg.temperature, grpo_cfg.max_response_len);
    const auto after = emocap::training::evaluate_policy(
        params, to_items(dev), ctx, eval_seed, eval_samples,
        grpo_cfg.temperature, grpo_cfg.max_response_len);
    extra["held_out_before"] = eval_json(before);
    extra["held_out_after"] = eval_json(after);
    std::cout << "held-out mean R_total: " << before.mean_r_total << " -> "
              << after.mean_r_total << "\n";
  }

  const fs::path dir = ensure_out_dir(cfg);
  emocap::policy::save_checkpoint(params, (dir / "checkpoint.bin").string());
  std::ofstream logout(dir / "trainlog.txt", std::ios::binary);
  emocap::report::write_grpo_log(log, logout);
  emocap::cli::write_manifest((dir / "manifest.json").string(), "train-grpo",
                              cfg,
                              {{"dataset", data.dataset_file.string()},
                               {"splits", data.split_file.string()},
                               {"lexicons", data.lexicon_file.string()},
                               {"checkpoint", ckpt_path},
                               {"anchors", anchors_path}},
                              {"checkpoint.bin", "trainlog.txt"}, extra);
  std::cout << "grpo: " << log.steps.size() << " optimizer steps";
  if (!log.steps.empty()) {
    std::cout << ", final mean R_total " << log.steps.back().mean_r_total;
  }
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emotion-aware caption rewards and desk-scale RL training"};
  app.set_version_flag("--version", version_text());
  app.require_subcommand(1);

  RunConfig cfg;
  struct Sub {
    CLI::App* cmd;
    CommonFlags* common;
    int (*run)(RunConfig&);
  };
  std::vector<Sub> subs;

  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic corpus");
  add_str(gen, cfg, "spec", "synthesis spec (JSON)", true);
  subs.push_back({gen, add_common(gen, cfg), cmd_gen_synth});

  auto* anchors = app.add_subcommand("build-anchors",
                                     "build emotion anchors from lexicons");
  add_str(anchors, cfg, "lexicons", "lexicon file", true);
  subs.push_back({anchors, add_common(anchors, cfg), cmd_build_anchors});

  auto* score = app.add_subcommand("score", "score candidate/reference pairs");
  add_str(score, cfg, "pairs", "pairs file (gen/ref records)", true);
  add_str(score, cfg, "anchors", "anchor snapshot", true);
  subs.push_back({score, add_common(score, cfg), cmd_score});

  auto* eval = app.add_subcommand("evaluate", "corpus metric report");
  add_str(eval, cfg, "hyp-file", "hypothesis captions, one per line", true);
  add_str(eval, cfg, "ref-file", "reference captions, one per line", true);
  subs.push_back({eval, add_common(eval, cfg), cmd_evaluate});

  auto* sft = app.add_subcommand("train-sft", "supervised fine-tuning phase");
  add_str(sft, cfg, "dataset-dir", "directory from gen-synth", true);
  add_f64(sft, cfg, "sft-learning-rate", "SFT learning rate");
  add_usize(sft, cfg, "sft-epochs", "SFT epochs");
  add_usize(sft, cfg, "sft-batch-size", "SFT batch size");
  add_usize(sft, cfg, "sft-grad-accum", "SFT gradient accumulation");
  subs.push_back({sft, add_common(sft, cfg), cmd_train_sft});

  auto* grpo = app.add_subcommand("train-grpo",
                                  "group-relative policy optimization phase");
  add_str(grpo, cfg, "dataset-dir", "directory from gen-synth", true);
  add_str(grpo, cfg, "checkpoint", "SFT checkpoint to start from", true);
  add_str(grpo, cfg, "anchors", "anchor snapshot", true);
  add_f64(grpo, cfg, "grpo-learning-rate", "GRPO learning rate");
  add_usize(grpo, cfg, "rollout", "rollout group size G");
  add_f64(grpo, cfg, "kl-coeff", "KL penalty coefficient");
  add_usize(grpo, cfg, "max-response-len", "max sampled caption length");
  add_f64(grpo, cfg, "temperature", "rollout sampling temperature");
  add_usize(grpo, cfg, "grpo-grad-accum", "batch items per optimizer step");
  add_f64(grpo, cfg, "warmup-ratio", "linear warmup fraction of steps");
  add_f64(grpo, cfg, "clip-eps", "ratio clipping epsilon");
  add_f64(grpo, cfg, "adv-epsilon", "advantage normalization epsilon");
  add_usize(grpo, cfg, "steps", "optimizer steps");
  add_usize(grpo, cfg, "eval-samples", "held-out samples per item");
  subs.push_back({grpo, add_common(grpo, cfg), cmd_train_grpo});

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& sub : subs) {
      if (sub.cmd->parsed()) {
        finish_config(cfg, *sub.common);
        return sub.run(cfg);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
