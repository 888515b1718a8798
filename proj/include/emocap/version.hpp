#pragma once

#include <string_view>

namespace emocap::version {

inline constexpr std::string_view kTool = "0.1.0";

// Format identifiers, one per on-disk artifact. `--version` prints these.
struct FormatId {
  std::string_view name;
  std::string_view id;
};

inline constexpr FormatId kFormats[] = {
    {"dataset", "emocap.dataset.v1"},
    {"split-manifest", "emocap.split.v1"},
    {"synth-spec", "emocap.synthspec.v1"},
    {"lexicon", "emocap.lexicon.v1"},
    {"anchor-snapshot", "emocap.anchors.v1"},
    {"stoplist", "emocap.stoplist.v1"},
    {"embedding-table", "D=<int> header, tab-separated rows"},
    {"pairs", "emocap.pairs.v1"},
    {"reward-breakdowns", "emocap.breakdowns.v1"},
    {"evaluation-report", "emocap.evalreport.v1"},
    {"train-log", "emocap.trainlog.v1"},
    {"run-manifest", "emocap.manifest.v1"},
    {"policy-checkpoint", "EMOCAPK1 binary, little-endian float64"},
};

}  // namespace emocap::version
