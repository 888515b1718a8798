#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "emocap/emotion_space.hpp"
#include "oracles.hpp"

using namespace emocap;
using emotion_space::build_anchor;
using emotion_space::build_anchor_set;
using emotion_space::EmotionAnchorSet;
using emotion_space::EmotionLexicon;
using emotion_space::emotion_reward;
using emotion_space::project;

namespace {

// A plane-geometry embedder: D=2 table with axis-aligned words.
embedding::Embedder plane_embedder() {
  const auto path = std::filesystem::temp_directory_path() / "plane_table.txt";
  std::ofstream out(path, std::ios::binary);
  out << "D=2\n"
      << "east\t1 0\n"
      << "north\t0 1\n"
      << "west\t-1 0\n"
      << "northeast\t1 1\n";
  out.close();
  return embedding::Embedder({.dimension = 2,
                              .seed = 0,
                              .backend = embedding::Backend::kTable,
                              .table_path = path.string()});
}

embedding::Embedder hashed_embedder(std::size_t dim = 16,
                                    std::uint64_t seed = 5) {
  return embedding::Embedder({.dimension = dim, .seed = seed});
}

}  // namespace

TEST_CASE("build_anchor is the lexicon centroid", "[emotion_space]") {
  const auto emb = plane_embedder();
  CHECK(build_anchor({"one", {"east"}}, emb) == SemanticVector{1, 0});
  const auto mid = build_anchor({"two", {"east", "north"}}, emb);
  CHECK(mid == SemanticVector{0.5, 0.5});
}

TEST_CASE("build_anchor matches the brute-force mean oracle",
          "[emotion_space]") {
  const auto emb = hashed_embedder(12, 77);
  emocap::rng::SplitMix64 stream(42);
  for (int rep = 0; rep < 10; ++rep) {
    EmotionLexicon lex{"case" + std::to_string(rep), {}};
    const std::size_t count = 1 + stream.next_below(100);
    for (std::size_t w = 0; w < count; ++w) {
      lex.words.push_back("w" + std::to_string(rep) + "_" + std::to_string(w));
    }
    std::vector<std::vector<double>> parts;
    for (const auto& w : lex.words) parts.push_back(emb.embed_text(w));
    const auto expect = oracle::mean_of(parts);
    const auto got = build_anchor(lex, emb);
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == Catch::Approx(expect[i]).margin(1e-12));
    }
  }
}

TEST_CASE("build_anchor failure modes", "[emotion_space]") {
  const auto emb = plane_embedder();
  CHECK_THROWS_AS(build_anchor({"empty", {}}, emb), DataError);
  CHECK_THROWS_WITH(build_anchor({"dup", {"east", "east"}}, emb),
                    Catch::Matchers::ContainsSubstring("east"));
  // Pure-punctuation word tokenizes to nothing -> zero vector, named.
  CHECK_THROWS_WITH(build_anchor({"zero", {"..."}}, emb),
                    Catch::Matchers::ContainsSubstring("..."));
  // Opposite unit vectors average to the degenerate centroid.
  CHECK_THROWS_WITH(build_anchor({"cancel", {"east", "west"}}, emb),
                    Catch::Matchers::ContainsSubstring("degenerate"));
}

TEST_CASE("project yields cosines in anchor order", "[emotion_space]") {
  const auto emb = plane_embedder();
  const auto anchors = build_anchor_set(
      {{"x", {"east"}}, {"y", {"north"}}}, emb);
  const auto c = project({1, 0}, anchors);
  REQUIRE(c.has_value());
  CHECK((*c)[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK((*c)[1] == Catch::Approx(0.0).margin(1e-12));
  // Cosine is scale invariant.
  CHECK(*project({2, 0}, anchors) == *c);
  CHECK_FALSE(project({0, 0}, anchors).has_value());
}

TEST_CASE("project matches an independent cosine oracle", "[emotion_space]") {
  const auto emb = hashed_embedder(8, 3);
  const auto anchors = build_anchor_set(
      {{"a", {"w1", "w2"}}, {"b", {"w3"}}, {"c", {"w4", "w5", "w6"}}}, emb);
  emocap::rng::SplitMix64 stream(9);
  for (int rep = 0; rep < 20; ++rep) {
    SemanticVector t(8);
    for (auto& x : t) x = stream.next_symmetric();
    const auto got = project(t, anchors);
    REQUIRE(got.has_value());
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      const double expect = oracle::cosine(t, anchors.anchors[i]);
      CHECK((*got)[i] == Catch::Approx(expect).margin(1e-12));
      CHECK((*got)[i] >= -1.0 - 1e-12);
      CHECK((*got)[i] <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("projection is scale invariant across magnitudes", "[emotion_space]") {
  const auto emb = hashed_embedder();
  const auto anchors = build_anchor_set(
      {{"a", {"alpha", "beta"}}, {"b", {"gamma"}}}, emb);
  const SemanticVector t = emb.embed_text("some caption text");
  const auto base = project(t, anchors);
  REQUIRE(base.has_value());
  for (double lambda : {1e-3, 1.0, 1e3}) {
    SemanticVector scaled(t);
    for (auto& x : scaled) x *= lambda;
    const auto got = project(scaled, anchors);
    REQUIRE(got.has_value());
    for (std::size_t i = 0; i < base->size(); ++i) {
      CHECK((*got)[i] == Catch::Approx((*base)[i]).margin(1e-12));
    }
  }
}

TEST_CASE("anchor permutation equivariance and reward invariance",
          "[emotion_space]") {
  const auto emb = hashed_embedder(16, 21);
  const std::vector<EmotionLexicon> lexicons = {
      {"a", {"w1", "w2"}}, {"b", {"w3", "w4"}}, {"c", {"w5"}}, {"d", {"w6"}}};
  const auto anchors = build_anchor_set(lexicons, emb);
  std::vector<std::size_t> perm = {2, 0, 3, 1};
  EmotionAnchorSet permuted;
  permuted.embedder_fingerprint = anchors.embedder_fingerprint;
  for (std::size_t i : perm) {
    permuted.labels.push_back(anchors.labels[i]);
    permuted.anchors.push_back(anchors.anchors[i]);
  }
  const std::string gen = "the voice rises with w1 energy";
  const std::string ref = "a slow w2 caption";
  const auto c1 = *project(emb.embed_text(gen), anchors);
  const auto c2 = *project(emb.embed_text(gen), permuted);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    CHECK(c2[i] == c1[perm[i]]);
  }
  const auto r1 = emotion_reward(gen, ref, anchors, emb);
  const auto r2 = emotion_reward(gen, ref, permuted, emb);
  REQUIRE(r1.has_value());
  REQUIRE(r2.has_value());
  CHECK(*r1 == Catch::Approx(*r2).margin(1e-12));
}

TEST_CASE("emotion reward endpoints", "[emotion_space]") {
  const auto emb = hashed_embedder(16, 2);
  const auto anchors = build_anchor_set(
      {{"a", {"w1", "w2"}}, {"b", {"w3"}}, {"c", {"w4"}}, {"d", {"w5"}}}, emb);
  const auto self = emotion_reward("any valid text", "any valid text", anchors, emb);
  REQUIRE(self.has_value());
  CHECK(*self == Catch::Approx(1.0).margin(1e-9));
  CHECK_FALSE(emotion_reward("", "ref text", anchors, emb).has_value());
  CHECK_FALSE(emotion_reward("gen text", "", anchors, emb).has_value());
}

TEST_CASE("orthogonal coordinate vectors score zero", "[emotion_space]") {
  const auto emb = plane_embedder();
  const auto anchors = build_anchor_set({{"x", {"east"}}, {"y", {"north"}}}, emb);
  // east -> coords (1, 0); north -> coords (0, 1).
  const auto r = emotion_reward("east", "north", anchors, emb);
  REQUIRE(r.has_value());
  CHECK(*r == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("emotion reward composes the projection and cosine oracles",
          "[emotion_space]") {
  const auto emb = hashed_embedder(16, 123);
  const auto anchors = build_anchor_set({{"a", {"w1", "w2"}},
                                         {"b", {"w3"}},
                                         {"c", {"w4", "w5"}},
                                         {"d", {"w6"}}},
                                        emb);
  const std::string gen = "the tone stays calm and w3 steady";
  const std::string ref = "a w3 voice with w1 color";
  std::vector<double> cg, cr;
  for (const auto& a : anchors.anchors) {
    cg.push_back(oracle::cosine(emb.embed_text(gen), a));
    cr.push_back(oracle::cosine(emb.embed_text(ref), a));
  }
  const double expect = oracle::cosine(cg, cr);
  const auto got = emotion_reward(gen, ref, anchors, emb);
  REQUIRE(got.has_value());
  CHECK(*got == Catch::Approx(expect).margin(1e-12));
  CHECK(*got >= -1.0 - 1e-12);
  CHECK(*got <= 1.0 + 1e-12);
}

TEST_CASE("anchor snapshots round trip and pin the embedder",
          "[emotion_space]") {
  const auto emb = hashed_embedder(8, 6);
  const auto anchors =
      build_anchor_set({{"joy", {"w1", "w2"}}, {"grief", {"w3"}}}, emb);
  const auto path =
      std::filesystem::temp_directory_path() / "anchors_roundtrip.txt";
  emotion_space::save_anchor_snapshot(anchors, path.string());
  const auto loaded = emotion_space::load_anchor_snapshot(path.string(), emb);
  CHECK(loaded.labels == anchors.labels);
  CHECK(loaded.anchors == anchors.anchors);  // %.17g round trip is exact
  CHECK(loaded.embedder_fingerprint == anchors.embedder_fingerprint);

  const auto other = hashed_embedder(8, 7);
  CHECK_THROWS_WITH(emotion_space::load_anchor_snapshot(path.string(), other),
                    Catch::Matchers::ContainsSubstring("fingerprint"));
}

TEST_CASE("anchor set construction rejects bad inputs", "[emotion_space]") {
  const auto emb = hashed_embedder();
  CHECK_THROWS_AS(build_anchor_set({{"only", {"w1"}}}, emb), DataError);
  CHECK_THROWS_WITH(
      build_anchor_set({{"dup", {"w1"}}, {"dup", {"w2"}}}, emb),
      Catch::Matchers::ContainsSubstring("duplicate emotion label"));
}
