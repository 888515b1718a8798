#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "emocap/policy.hpp"
#include "emocap/run_config.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = EMOCAP_CLI_PATH;
const std::string kData = EMOCAP_DATA_DIR;

struct Sandbox {
  fs::path root;
  explicit Sandbox(const std::string& name) {
    root = fs::temp_directory_path() / ("emocap_cli_" + name);
    fs::remove_all(root);
    fs::create_directories(root);
  }
  std::string dir(const std::string& sub) const { return (root / sub).string(); }
};

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

int gen_synth(const Sandbox& box, const std::string& out = "corpus") {
  return run("gen-synth --spec " + kData + "/default_synth_spec.json --out-dir " +
             box.dir(out));
}

}  // namespace

TEST_CASE("gen-synth produces a reproducible corpus", "[cli]") {
  Sandbox box("gen");
  REQUIRE(gen_synth(box, "a") == 0);
  for (const char* f : {"dataset.txt", "lexicons.txt", "splits.txt",
                        "manifest.json"}) {
    CHECK(fs::exists(fs::path(box.dir("a")) / f));
  }
  REQUIRE(gen_synth(box, "b") == 0);
  for (const char* f : {"dataset.txt", "lexicons.txt", "splits.txt"}) {
    CHECK(slurp(fs::path(box.dir("a")) / f) == slurp(fs::path(box.dir("b")) / f));
  }
}

TEST_CASE("gen-synth fails cleanly on a missing spec", "[cli]") {
  Sandbox box("gen_missing");
  const std::string cmd = kCli + " gen-synth --spec " + box.dir("nope.json") +
                          " --out-dir " + box.dir("out") + " 2> " +
                          box.dir("stderr.txt") + " > /dev/null";
  CHECK(std::system(cmd.c_str()) != 0);
  CHECK(slurp(box.dir("stderr.txt")).find("nope.json") != std::string::npos);
}

TEST_CASE("build-anchors snapshots refuse a mismatched embedder", "[cli]") {
  Sandbox box("anchors");
  REQUIRE(gen_synth(box) == 0);
  REQUIRE(run("build-anchors --lexicons " + box.dir("corpus") +
              "/lexicons.txt --embedder-seed 1 --out-dir " +
              box.dir("anchors")) == 0);
  const fs::path snapshot = fs::path(box.dir("anchors")) / "anchors.txt";
  REQUIRE(fs::exists(snapshot));
  {
    std::ifstream in(snapshot);
    std::string header;
    std::getline(in, header);
    CHECK(header.find("n=6") != std::string::npos);
    CHECK(header.find("fingerprint=") != std::string::npos);
  }

  // Scoring under a different embedder seed must be refused.
  std::ofstream pairs(fs::path(box.dir("anchors")) / "pairs.txt",
                      std::ios::binary);
  pairs << "emocap.pairs.v1\n"
        << R"({"gen":"a calm voice","ref":"a calm steady voice"})" << "\n";
  pairs.close();
  CHECK(run("score --pairs " + box.dir("anchors") + "/pairs.txt --anchors " +
            snapshot.string() + " --embedder-seed 2 --out-dir " +
            box.dir("score_bad")) != 0);
  CHECK(run("score --pairs " + box.dir("anchors") + "/pairs.txt --anchors " +
            snapshot.string() + " --embedder-seed 1 --out-dir " +
            box.dir("score_ok")) == 0);
  const auto breakdowns =
      slurp(fs::path(box.dir("score_ok")) / "breakdowns.txt");
  CHECK(breakdowns.find("emocap.breakdowns.v1") == 0);
  CHECK(breakdowns.find("r_total") != std::string::npos);
}

TEST_CASE("build-anchors rejects an empty word list", "[cli]") {
  Sandbox box("anchors_empty");
  std::ofstream lex(fs::path(box.root) / "lexicons.txt", std::ios::binary);
  lex << "emocap.lexicon.v1\nhappy\tcheerful\nsad\t\n";
  lex.close();
  CHECK(run("build-anchors --lexicons " + (box.root / "lexicons.txt").string() +
            " --out-dir " + box.dir("out")) != 0);
}

TEST_CASE("evaluate on identical files gives the identity row", "[cli]") {
  Sandbox box("eval");
  const fs::path caps = box.root / "caps.txt";
  std::ofstream out(caps, std::ios::binary);
  out << "the calm voice stays steady overall\n"
      << "a harsh tone rises with a quick pace\n";
  out.close();
  REQUIRE(run("evaluate --hyp-file " + caps.string() + " --ref-file " +
              caps.string() + " --out-dir " + box.dir("out")) == 0);
  const auto report = slurp(fs::path(box.dir("out")) / "report.txt");
  REQUIRE(report.find("emocap.evalreport.v1") == 0);
  CHECK(report.find("metric variants") != std::string::npos);

  // Corpus record: bleu4 = 1, rouge_l = 1, vocab = reference vocab size.
  const auto corpus_pos = report.rfind("{\"corpus\"");
  REQUIRE(corpus_pos != std::string::npos);
  const auto corpus =
      nlohmann::json::parse(report.substr(corpus_pos)).at("corpus");
  CHECK(corpus.at("bleu4").get<double>() == Catch::Approx(1.0));
  CHECK(corpus.at("rouge_l").get<double>() == Catch::Approx(1.0));
  CHECK(corpus.at("vocab").get<int>() == 13);
}

TEST_CASE("training pipeline runs and steps=0 is the identity", "[cli]") {
  Sandbox box("train");
  REQUIRE(gen_synth(box) == 0);
  REQUIRE(run("build-anchors --lexicons " + box.dir("corpus") +
              "/lexicons.txt --out-dir " + box.dir("anchors")) == 0);
  REQUIRE(run("train-sft --dataset-dir " + box.dir("corpus") +
              " --sft-epochs 2 --sft-learning-rate 0.2 --seed 7 --out-dir " +
              box.dir("sft")) == 0);
  const fs::path sft_ckpt = fs::path(box.dir("sft")) / "checkpoint.bin";
  REQUIRE(fs::exists(sft_ckpt));

  REQUIRE(run("train-grpo --dataset-dir " + box.dir("corpus") +
              " --checkpoint " + sft_ckpt.string() + " --anchors " +
              box.dir("anchors") + "/anchors.txt --steps 0 --seed 7" +
              " --eval-samples 2 --out-dir " + box.dir("grpo0")) == 0);
  CHECK(slurp(fs::path(box.dir("grpo0")) / "checkpoint.bin") ==
        slurp(sft_ckpt));

  // A couple of real steps still produce a loadable checkpoint.
  REQUIRE(run("train-grpo --dataset-dir " + box.dir("corpus") +
              " --checkpoint " + sft_ckpt.string() + " --anchors " +
              box.dir("anchors") + "/anchors.txt --steps 2 --seed 7" +
              " --grpo-learning-rate 0.1 --eval-samples 2 --out-dir " +
              box.dir("grpo2")) == 0);
  const auto trained = emocap::policy::load_checkpoint(
      (fs::path(box.dir("grpo2")) / "checkpoint.bin").string());
  CHECK(trained.vocab_size() >= 3);
  const auto log = slurp(fs::path(box.dir("grpo2")) / "trainlog.txt");
  CHECK(log.find("emocap.trainlog.v1") == 0);
  CHECK(log.find("mean_r_total") != std::string::npos);
}

TEST_CASE("manifests reproduce runs byte-for-byte", "[cli]") {
  Sandbox box("manifest");
  REQUIRE(gen_synth(box, "first") == 0);
  const fs::path manifest = fs::path(box.dir("first")) / "manifest.json";
  REQUIRE(fs::exists(manifest));
  const auto j = nlohmann::json::parse(slurp(manifest));
  CHECK(j.at("format") == "emocap.manifest.v1");
  CHECK(j.at("subcommand") == "gen-synth");
  CHECK(j.at("provenance").at("spec") == "flag");
  CHECK(j.at("inputs").contains("spec"));

  REQUIRE(run("gen-synth --spec " + kData + "/default_synth_spec.json" +
              " --config " + manifest.string() + " --out-dir " +
              box.dir("second")) == 0);
  for (const char* f : {"dataset.txt", "lexicons.txt", "splits.txt"}) {
    CHECK(slurp(fs::path(box.dir("first")) / f) ==
          slurp(fs::path(box.dir("second")) / f));
  }
}

TEST_CASE("config precedence is flag over file over default", "[cli]") {
  emocap::cli::RunConfig cfg;
  CHECK(cfg.get<std::uint64_t>("seed") == 7);  // default
  CHECK(cfg.is_default("seed"));

  const fs::path file = fs::temp_directory_path() / "emocap_cfg.json";
  {
    std::ofstream out(file, std::ios::binary);
    out << R"({"seed": 11, "alpha": 2.5})";
  }
  cfg.set_flag("alpha", 3.5);  // flags parse before the file is applied
  cfg.load_file(file.string());
  CHECK(cfg.get<std::uint64_t>("seed") == 11);   // file beats default
  CHECK(cfg.get<double>("alpha") == 3.5);        // flag beats file

  emocap::cli::RunConfig strict;
  const fs::path bad = fs::temp_directory_path() / "emocap_cfg_bad.json";
  {
    std::ofstream out(bad, std::ios::binary);
    out << R"({"not-a-key": 1})";
  }
  CHECK_THROWS_AS(strict.load_file(bad.string()), emocap::ParseError);
}

TEST_CASE("version flag lists the file formats", "[cli]") {
  Sandbox box("version");
  const std::string cmd =
      kCli + " --version > " + box.dir("version.txt") + " 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  const auto text = slurp(box.dir("version.txt"));
  CHECK(text.find("emocap.dataset.v1") != std::string::npos);
  CHECK(text.find("emocap.manifest.v1") != std::string::npos);
  CHECK(text.find("EMOCAPK1") != std::string::npos);
}
