#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "tracealign/config.hpp"
#include "tracealign/embedding.hpp"
#include "tracealign/errors.hpp"
#include "tracealign/text.hpp"

using namespace tracealign;

TEST_CASE("empty text embeds to the zero vector") {
  HashingEmbedder e(256);
  auto v = e.embed("");
  CHECK(v.size() == 256);
  CHECK(v.isZero());
  CHECK(e.embed("   \n\t ").isZero());
}

TEST_CASE("embedding is deterministic and unit norm") {
  HashingEmbedder e(256);
  auto a = e.embed("find url");
  auto b = e.embed("find url");
  CHECK(a == b);
  CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.embed("Find URL!") == a);
}

TEST_CASE("paraphrase ordering under the local embedder") {
  HashingEmbedder e(256);
  const double near = cosine(e.embed("find the url"), e.embed("locate the url"));
  const double far = cosine(e.embed("find the url"), e.embed("run python script"));
  CHECK(near > far);
  // Values precomputed with an independent Python implementation of the same hash.
  CHECK(near == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(far == doctest::Approx(0.0));
}

TEST_CASE("cosine basics") {
  Embedding x = Embedding::Zero(4), y = Embedding::Zero(4), z = Embedding::Zero(4);
  x(0) = 1;
  y(1) = 1;
  z(0) = z(1) = 1 / std::sqrt(2.0);
  CHECK(cosine(x, x) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(cosine(x, y) == doctest::Approx(0.0));
  CHECK(cosine(x, z) == doctest::Approx(0.70710678).epsilon(1e-6));
  CHECK(cosine(x, Embedding::Zero(4)) == 0.0);
  CHECK_THROWS_AS(cosine(x, Embedding::Zero(3)), DataError);
}

TEST_CASE("cosine is symmetric and bounded on random vectors") {
  std::mt19937 rng(3);
  std::normal_distribution<double> n;
  for (int i = 0; i < 500; ++i) {
    Embedding a(16), b(16);
    for (int k = 0; k < 16; ++k) {
      a(k) = n(rng);
      b(k) = n(rng);
    }
    a.normalize();
    CHECK(cosine(a, b) == cosine(b, a));
    CHECK(std::abs(cosine(a, b)) <= 1.0);
    CHECK(cosine(a, a) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("float embeddings use the same templates") {
  Eigen::VectorXf a(3), b(3);
  a << 1, 0, 0;
  b << 1, 1, 0;
  CHECK(cosine(a, b) == doctest::Approx(0.70710678f).epsilon(1e-5));
  Eigen::MatrixXf cols(3, 3);
  cols << 1, 1, 0, 0, 0, 1, 0, 0, 0;
  auto sims = adjacent_similarities(cols);
  REQUIRE(sims.size() == 2);
  CHECK(sims(0) == doctest::Approx(1.0f));
  CHECK(sims(1) == doctest::Approx(0.0f));
}

TEST_CASE("memo embedder returns the inner embedding") {
  auto inner = std::make_shared<HashingEmbedder>(64);
  MemoEmbedder memo(inner);
  CHECK(memo.embed("hello world") == inner->embed("hello world"));
  CHECK(memo.embed("hello world") == inner->embed("hello world"));
  CHECK(memo.dimension() == 64);
}

TEST_CASE("embed_all stacks columns") {
  HashingEmbedder e(32);
  auto m = embed_all(e, {"a b", "", "c"});
  CHECK(m.rows() == 32);
  CHECK(m.cols() == 3);
  CHECK(m.col(1).isZero());
  CHECK(m.col(0) == e.embed("a b"));
}

TEST_CASE("tokenizer") {
  CHECK(text::tokenize("Hello, World! x2") == std::vector<std::string>{"hello", "world", "x2"});
  CHECK(text::tokenize("").empty());
  CHECK(text::contains_phrase(text::tokenize("The page said Verification Required."), "verification required"));
  CHECK_FALSE(text::contains_phrase(text::tokenize("verification is required"), "verification required"));
  CHECK(text::split_sentences("One. Two! Three?\nFour") == std::vector<std::string>{"One.", "Two!", "Three?", "Four"});
  CHECK(text::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("config validation") {
  AnalysisConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = [](auto mutate) {
    AnalysisConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(bad([](AnalysisConfig& c) { c.d = 8; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](AnalysisConfig& c) { c.theta_seg = 1.5; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](AnalysisConfig& c) { c.theta_ctx = -1.01; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](AnalysisConfig& c) { c.voting_m = 2; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](AnalysisConfig& c) { c.voting_m = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](AnalysisConfig& c) { c.loop_k = 1; }).validate(), ConfigError);
  nlohmann::json j = c;
  CHECK(j.get<AnalysisConfig>() == c);
}
