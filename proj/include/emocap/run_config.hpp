#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "emocap/embedding.hpp"
#include "emocap/errors.hpp"
#include "emocap/reward.hpp"
#include "emocap/rng.hpp"
#include "emocap/training.hpp"
#include "emocap/version.hpp"

namespace emocap::cli {

inline constexpr std::string_view kManifestFormat = "emocap.manifest.v1";

enum class Provenance { kDefault, kFile, kFlag };

inline std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kDefault: return "default";
    case Provenance::kFile: return "file";
    default: return "flag";
  }
}

// Merged view of every CLI-exposed config field with per-field provenance.
// Precedence: flag > file > default.
class RunConfig {
 public:
  RunConfig() {
    set_default("seed", 7);
    set_default("out-dir", "");
    set_default("config", "");
    set_default("embedder-backend", "hashed");
    set_default("embedding-table", "");
    set_default("embedder-dim", 64);
    set_default("embedder-seed", 1);
    set_default("oov-policy", "fallback_hashed");
    set_default("stoplist", "");
    set_default("alpha", 1.0);
    set_default("beta", 1.0);
    set_default("emo-floor", 0.0);
    set_default("sft-learning-rate", 1e-4);
    set_default("sft-epochs", 1);
    set_default("sft-batch-size", 1);
    set_default("sft-grad-accum", 2);
    set_default("grpo-learning-rate", 1e-4);
    set_default("rollout", 4);
    set_default("kl-coeff", 0.5);
    set_default("max-response-len", 32);
    set_default("temperature", 1.0);
    set_default("grpo-grad-accum", 4);
    set_default("warmup-ratio", 0.05);
    set_default("clip-eps", 0.2);
    set_default("adv-epsilon", 1e-8);
    set_default("steps", 200);
    set_default("eval-samples", 8);
    set_default("spec", "");
    set_default("lexicons", "");
    set_default("anchors", "");
    set_default("dataset-dir", "");
    set_default("checkpoint", "");
    set_default("pairs", "");
    set_default("hyp-file", "");
    set_default("ref-file", "");
  }

  // Overlays a config file: either a plain {key: value} object or a run
  // manifest (recognized by its format field), whose config block is used.
  void load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("config: cannot open " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("config " + path + ": " + e.what());
    }
    if (j.is_object() && j.value("format", "") == kManifestFormat) {
      j = j.at("config");
    }
    if (!j.is_object()) throw ParseError("config " + path + ": expected an object");
    for (const auto& [key, value] : j.items()) {
      if (key == "config" || key == "out-dir") continue;  // never from file
      auto it = values_.find(key);
      if (it == values_.end()) {
        throw ParseError("config " + path + ": unknown key '" + key + "'");
      }
      if (prov_[key] == Provenance::kFlag) continue;  // flags win
      it->second = value;
      prov_[key] = Provenance::kFile;
    }
  }

  void set_flag(const std::string& key, nlohmann::json value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw DataError("unknown config key '" + key + "'");
    it->second = std::move(value);
    prov_[key] = Provenance::kFlag;
  }

  bool is_default(const std::string& key) const {
    return prov_.at(key) == Provenance::kDefault;
  }

  template <typename T>
  T get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw DataError("unknown config key '" + key + "'");
    try {
      return it->second.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw DataError("config key '" + key + "' has the wrong type: " +
                      it->second.dump());
    }
  }

  embedding::EmbedderConfig embedder_config() const {
    embedding::EmbedderConfig cfg;
    cfg.dimension = get<std::size_t>("embedder-dim");
    cfg.seed = get<std::uint64_t>("embedder-seed");
    const std::string backend = get<std::string>("embedder-backend");
    if (backend == "hashed") {
      cfg.backend = embedding::Backend::kHashed;
    } else if (backend == "table") {
      cfg.backend = embedding::Backend::kTable;
      cfg.table_path = get<std::string>("embedding-table");
      if (cfg.table_path.empty()) {
        throw DataError("table backend requires --embedding-table");
      }
    } else {
      throw DataError("unknown embedder backend '" + backend + "'");
    }
    const std::string oov = get<std::string>("oov-policy");
    if (oov == "fallback_hashed") {
      cfg.oov_policy = embedding::OovPolicy::kFallbackHashed;
    } else if (oov == "error") {
      cfg.oov_policy = embedding::OovPolicy::kError;
    } else {
      throw DataError("unknown oov policy '" + oov + "'");
    }
    return cfg;
  }

  reward::RewardWeights reward_weights() const {
    reward::RewardWeights w;
    w.alpha = get<double>("alpha");
    w.beta = get<double>("beta");
    w.emo_floor = get<double>("emo-floor");
    w.validate();
    return w;
  }

  training::SftConfig sft_config() const {
    training::SftConfig cfg;
    cfg.learning_rate = get<double>("sft-learning-rate");
    cfg.epochs = get<std::size_t>("sft-epochs");
    cfg.batch_size = get<std::size_t>("sft-batch-size");
    cfg.grad_accum = get<std::size_t>("sft-grad-accum");
    cfg.seed = rng::derive_seed(get<std::uint64_t>("seed"), "sft");
    cfg.validate();
    return cfg;
  }

  training::GrpoConfig grpo_config() const {
    training::GrpoConfig cfg;
    cfg.rollout_group = get<std::size_t>("rollout");
    cfg.kl_coeff = get<double>("kl-coeff");
    cfg.max_response_len = get<std::size_t>("max-response-len");
    cfg.temperature = get<double>("temperature");
    cfg.grad_accum = get<std::size_t>("grpo-grad-accum");
    cfg.warmup_ratio = get<double>("warmup-ratio");
    cfg.clip_eps = get<double>("clip-eps");
    cfg.adv_epsilon = get<double>("adv-epsilon");
    cfg.steps = get<std::size_t>("steps");
    cfg.learning_rate = get<double>("grpo-learning-rate");
    cfg.seed = rng::derive_seed(get<std::uint64_t>("seed"), "grpo");
    cfg.validate();
    return cfg;
  }

  nlohmann::json config_json() const {
    nlohmann::json j;
    for (const auto& [key, value] : values_) j[key] = value;
    return j;
  }

  nlohmann::json provenance_json() const {
    nlohmann::json j;
    for (const auto& [key, p] : prov_) j[key] = provenance_name(p);
    return j;
  }

 private:
  void set_default(const std::string& key, nlohmann::json value) {
    values_[key] = std::move(value);
    prov_[key] = Provenance::kDefault;
  }

  std::map<std::string, nlohmann::json> values_;
  std::map<std::string, Provenance> prov_;
};

// ---------------------------------------------------------------------------
// Run manifest

inline std::string fingerprint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("fingerprint: cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(rng::fnv1a64(data)));
  return buf;
}

// The manifest pins the merged config, provenance, and input fingerprints.
// It carries no timestamps, so re-running a manifest is byte-stable, and
// it parses as a config file (the config block is reused verbatim).
inline void write_manifest(
    const std::string& path, const std::string& subcommand,
    const RunConfig& config,
    const std::vector<std::pair<std::string, std::string>>& inputs,
    const std::vector<std::string>& outputs,
    const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json j;
  j["format"] = kManifestFormat;
  j["tool_version"] = version::kTool;
  j["subcommand"] = subcommand;
  j["config"] = config.config_json();
  j["provenance"] = config.provenance_json();
  nlohmann::json ins = nlohmann::json::object();
  for (const auto& [name, file] : inputs) {
    ins[name] = {{"path", file}, {"fnv1a64", fingerprint_file(file)}};
  }
  j["inputs"] = ins;
  j["outputs"] = outputs;
  if (!extra.empty()) j["extra"] = extra;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("manifest: cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out) throw ParseError("manifest: write failed for " + path);
}

}  // namespace emocap::cli
