#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "emocap/emotion_space.hpp"
#include "emocap/errors.hpp"
#include "emocap/rng.hpp"
#include "emocap/textproc.hpp"

namespace emocap::data {

inline constexpr std::string_view kDatasetFormat = "emocap.dataset.v1";
inline constexpr std::string_view kSplitFormat = "emocap.split.v1";
inline constexpr std::string_view kSynthSpecFormat = "emocap.synthspec.v1";

struct CaptionSample {
  std::string id;
  std::size_t context_id = 0;
  std::string emotion_label;
  std::string reference_caption;
};

// Recipe for the deterministic synthetic emotion-caption corpus. Slots in
// templates resolve to: {speaker} (speaker attribute), {emotion}/{emotionN}
// (draw from the sample's emotion lexicon), or a named list under `slots`.
struct SynthSpec {
  std::vector<emotion_space::EmotionLexicon> emotions;
  std::vector<std::string> speaker_attrs;
  std::vector<std::string> templates;
  std::map<std::string, std::vector<std::string>> slots;
  std::size_t samples_per_combination = 1;
  std::uint64_t seed = 0;

  static SynthSpec from_json(const nlohmann::json& j) {
    SynthSpec spec;
    if (j.value("format", "") != kSynthSpecFormat) {
      throw ParseError("synth spec: expected format '" +
                       std::string(kSynthSpecFormat) + "'");
    }
    for (const auto& e : j.at("emotions")) {
      emotion_space::EmotionLexicon lex;
      lex.name = e.at("name").get<std::string>();
      for (const auto& w : e.at("lexicon")) {
        lex.words.push_back(w.get<std::string>());
      }
      spec.emotions.push_back(std::move(lex));
    }
    for (const auto& a : j.at("speaker_attrs")) {
      spec.speaker_attrs.push_back(a.get<std::string>());
    }
    for (const auto& t : j.at("templates")) {
      spec.templates.push_back(t.get<std::string>());
    }
    if (j.contains("slots")) {
      for (const auto& [name, options] : j.at("slots").items()) {
        std::vector<std::string> values;
        for (const auto& v : options) values.push_back(v.get<std::string>());
        spec.slots.emplace(name, std::move(values));
      }
    }
    spec.samples_per_combination = j.at("samples_per_combination").get<std::size_t>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    return spec;
  }

  static SynthSpec from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("synth spec: cannot open " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("synth spec " + path + ": " + e.what());
    }
    try {
      return from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("synth spec " + path + ": " + e.what());
    }
  }
};

struct SplitSet {
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;
};

struct DatasetBundle {
  std::vector<CaptionSample> samples;
  SplitSet split;
  std::vector<emotion_space::EmotionLexicon> lexicons;
  std::size_t num_contexts = 0;
};

namespace detail {

// Extracts {slot} names in order of appearance.
inline std::vector<std::string> template_slots(const std::string& tmpl) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while ((pos = tmpl.find('{', pos)) != std::string::npos) {
    const std::size_t end = tmpl.find('}', pos + 1);
    if (end == std::string::npos) break;
    names.push_back(tmpl.substr(pos + 1, end - pos - 1));
    pos = end + 1;
  }
  return names;
}

inline bool is_emotion_slot(std::string_view name) {
  if (name.rfind("emotion", 0) != 0) return false;
  for (std::size_t i = 7; i < name.size(); ++i) {
    if (name[i] < '0' || name[i] > '9') return false;
  }
  return true;
}

}  // namespace detail

// Deterministic expansion of templates x emotions x speaker attributes
// with seeded slot sampling, followed by an 80/10/10 seeded-shuffle split
// (dev and test sizes rounded to nearest, remainder to train).
inline DatasetBundle generate_synthetic(const SynthSpec& spec) {
  if (spec.emotions.size() < 2) {
    throw DataError("synth spec needs at least 2 emotions");
  }
  if (spec.speaker_attrs.empty() || spec.templates.empty() ||
      spec.samples_per_combination < 1) {
    throw DataError("synth spec needs speaker_attrs, templates, and "
                    "samples_per_combination >= 1");
  }
  for (const auto& lex : spec.emotions) {
    if (lex.words.empty()) {
      throw DataError("emotion '" + lex.name + "' has an empty lexicon");
    }
  }
  for (const auto& tmpl : spec.templates) {
    for (const auto& slot : detail::template_slots(tmpl)) {
      if (slot != "speaker" && !detail::is_emotion_slot(slot) &&
          spec.slots.find(slot) == spec.slots.end()) {
        throw DataError("unresolvable slot '{" + slot + "}' in template '" +
                        tmpl + "'");
      }
    }
  }

  DatasetBundle bundle;
  bundle.lexicons = spec.emotions;
  bundle.num_contexts = spec.emotions.size() * spec.speaker_attrs.size();
  std::size_t counter = 0;
  for (std::size_t e = 0; e < spec.emotions.size(); ++e) {
    for (std::size_t a = 0; a < spec.speaker_attrs.size(); ++a) {
      for (const auto& tmpl : spec.templates) {
        for (std::size_t k = 0; k < spec.samples_per_combination; ++k) {
          rng::SplitMix64 stream(rng::derive_seed(spec.seed, "synth-slots",
                                                  counter));
          std::string caption;
          std::size_t pos = 0;
          while (pos < tmpl.size()) {
            if (tmpl[pos] == '{') {
              const std::size_t end = tmpl.find('}', pos + 1);
              if (end == std::string::npos) {
                caption.push_back(tmpl[pos++]);
                continue;
              }
              const std::string slot = tmpl.substr(pos + 1, end - pos - 1);
              if (slot == "speaker") {
                caption += spec.speaker_attrs[a];
              } else if (detail::is_emotion_slot(slot)) {
                const auto& words = spec.emotions[e].words;
                caption += words[stream.next_below(words.size())];
              } else {
                const auto& options = spec.slots.at(slot);
                caption += options[stream.next_below(options.size())];
              }
              pos = end + 1;
            } else {
              caption.push_back(tmpl[pos++]);
            }
          }
          CaptionSample sample;
          char idbuf[16];
          std::snprintf(idbuf, sizeof(idbuf), "s%06zu", counter);
          sample.id = idbuf;
          sample.context_id = e * spec.speaker_attrs.size() + a;
          sample.emotion_label = spec.emotions[e].name;
          sample.reference_caption = caption;
          bundle.samples.push_back(std::move(sample));
          ++counter;
        }
      }
    }
  }

  const std::size_t n = bundle.samples.size();
  const std::size_t n_eval = static_cast<std::size_t>(
      std::floor(0.1 * static_cast<double>(n) + 0.5));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng::SplitMix64 stream(rng::derive_seed(spec.seed, "split"));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(stream.next_below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& id = bundle.samples[idx[i]].id;
    if (i < n - 2 * n_eval) {
      bundle.split.train.push_back(id);
    } else if (i < n - n_eval) {
      bundle.split.dev.push_back(id);
    } else {
      bundle.split.test.push_back(id);
    }
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Dataset file: header line, then one JSON record per line.

inline void save_dataset(const std::vector<CaptionSample>& samples,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("dataset: cannot write " + path);
  out << kDatasetFormat << "\n";
  for (const auto& s : samples) {
    nlohmann::json j;
    j["id"] = s.id;
    j["context_id"] = s.context_id;
    j["emotion_label"] = s.emotion_label;
    j["reference_caption"] = s.reference_caption;
    out << j.dump() << "\n";
  }
  if (!out) throw ParseError("dataset: write failed for " + path);
}

inline std::vector<CaptionSample> load_dataset(
    const std::string& path,
    const std::vector<std::string>* known_labels = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("dataset: cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& what) {
    throw ParseError("dataset " + path + ":" + std::to_string(line_no) + ": " +
                     what);
  };
  if (!std::getline(in, line)) fail("missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDatasetFormat) {
    fail("expected header '" + std::string(kDatasetFormat) + "'");
  }
  std::unordered_set<std::string> labels;
  if (known_labels) labels.insert(known_labels->begin(), known_labels->end());

  std::vector<CaptionSample> samples;
  std::unordered_set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    }
    CaptionSample s;
    try {
      s.id = j.at("id").get<std::string>();
      s.context_id = j.at("context_id").get<std::size_t>();
      s.emotion_label = j.at("emotion_label").get<std::string>();
      s.reference_caption = j.at("reference_caption").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    }
    if (!ids.insert(s.id).second) fail("duplicate id '" + s.id + "'");
    if (textproc::tokenize(s.reference_caption).empty()) {
      fail("reference caption tokenizes to nothing");
    }
    if (known_labels && labels.count(s.emotion_label) == 0) {
      fail("unknown emotion label '" + s.emotion_label + "'");
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

// ---------------------------------------------------------------------------
// Split manifest: header line + one JSON object of ids per split.

inline void save_split(const SplitSet& split, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("split manifest: cannot write " + path);
  nlohmann::json j;
  j["train"] = split.train;
  j["dev"] = split.dev;
  j["test"] = split.test;
  out << kSplitFormat << "\n" << j.dump(2) << "\n";
  if (!out) throw ParseError("split manifest: write failed for " + path);
}

inline SplitSet load_split(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("split manifest: cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) {
    throw ParseError("split manifest " + path + ": missing header");
  }
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header != kSplitFormat) {
    throw ParseError("split manifest " + path + ": expected header '" +
                     std::string(kSplitFormat) + "'");
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("split manifest " + path + ": " + e.what());
  }
  SplitSet split;
  try {
    split.train = j.at("train").get<std::vector<std::string>>();
    split.dev = j.at("dev").get<std::vector<std::string>>();
    split.test = j.at("test").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("split manifest " + path + ": " + e.what());
  }
  return split;
}

// Resolves a split's ids against loaded samples, preserving split order.
inline std::vector<CaptionSample> select_split(
    const std::vector<CaptionSample>& samples,
    const std::vector<std::string>& ids) {
  std::map<std::string_view, const CaptionSample*> by_id;
  for (const auto& s : samples) by_id.emplace(s.id, &s);
  std::vector<CaptionSample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw DataError("split references unknown sample id '" + id + "'");
    }
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace emocap::data
