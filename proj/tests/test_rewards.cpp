#include <doctest.h>

#include <cmath>
#include <random>

#include "ghar/rewards.hpp"
#include "reward_cases.hpp"
#include "support.hpp"

using namespace ghar;

namespace {

std::string random_text(std::mt19937_64& rng) {
  static const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "flu", "drug", "A", "B"};
  std::string s;
  int n = static_cast<int>(rng() % 6);
  for (int i = 0; i < n; ++i) s += vocab[rng() % vocab.size()] + " ";
  return s;
}

}  // namespace

TEST_SUITE("rewards") {
  TEST_CASE("hand-computed cases") {
    for (const auto& c : testing::reward_cases()) {
      CAPTURE(c.name);
      CHECK(std::abs(c.compute() - c.expected) <= 1e-12);
    }
  }

  TEST_CASE("sim is symmetric, bounded and one on identical text") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) {
      auto a = random_text(rng);
      auto b = random_text(rng);
      double s = sim(a, b);
      CHECK(s == sim(b, a));
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
      if (a.find_first_not_of(' ') != std::string::npos) CHECK(sim(a, a) == 1.0);
    }
  }

  TEST_CASE("reason reward peaks only at the expected length") {
    for (int L = 1; L <= 6; ++L) {
      for (std::size_t len = 0; len <= 20; ++len) {
        double r = reward_reason(len, L);
        CHECK(r <= 1.0);
        CHECK((r == 1.0) == (len == static_cast<std::size_t>(L)));
      }
    }
    CHECK_THROWS_AS(reward_reason(1, 0), Error);
  }

  TEST_CASE("path reward grows by one per correct id") {
    for (std::size_t c = 0; c < 5; ++c) {
      for (std::size_t e = 0; e < 3; ++e) {
        for (std::size_t r = 0; r < 3; ++r) CHECK(reward_path(c + 1, e, r) - reward_path(c, e, r) == 1.0);
      }
    }
    MetaPathSelection sel;
    sel.correct = {0, 1};
    sel.erroneous = {"9"};
    sel.repeated = {0};
    CHECK(reward_path(sel) == 1.0);
  }

  TEST_CASE("relevance and outcome rewards stay in range") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 500; ++i) {
      double r = reward_rel(random_text(rng), random_text(rng), random_text(rng));
      CHECK(r >= 0.0);
      CHECK(r <= 2.0);
    }
    for (int mask = 0; mask < 8; ++mask) {
      double o = reward_orm(mask & 1, mask & 2, mask & 4);
      CHECK(o == static_cast<double>(__builtin_popcount(mask)));
    }
  }

  TEST_CASE("literal rank reward never drops below alpha") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
      double alpha = u(rng) * 0.5;
      CHECK(reward_rank_from_sims(u(rng), u(rng), alpha, RankMode::kLiteral) >= alpha);
      CHECK(reward_rank_from_sims(u(rng), u(rng), alpha, RankMode::kMargin) >= 0.0);
    }
  }

  TEST_CASE("total reward is linear in eta with slope r_orm") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 200; ++i) {
      double cost = u(rng), orm = std::floor(std::abs(u(rng))), rank = u(rng);
      double r0 = reward_all(cost, orm, rank, 0.0);
      double r1 = reward_all(cost, orm, rank, 1.0);
      double r5 = reward_all(cost, orm, rank, 5.0);
      CHECK(r1 - r0 == doctest::Approx(orm).epsilon(1e-12));
      CHECK(r5 - r0 == doctest::Approx(5.0 * orm).epsilon(1e-12));
    }
  }

  TEST_CASE("normalizers") {
    RewardNormalizer none;
    CHECK(none(42.5) == 42.5);
    RewardNormalizer clamp(Normalization::kClamp);
    CHECK(clamp(3.0) == 3.0);
    CHECK(clamp(7.0) == 5.0);
    RewardNormalizer z(Normalization::kRunningZscore);
    std::vector<double> constant(10, 2.5);
    for (double v : z.apply(constant)) CHECK(v == 0.0);
    RewardNormalizer z2(Normalization::kRunningZscore);
    CHECK(z2(100.0) == 0.0);  // first element has no spread
  }

  TEST_CASE("reference file parsing") {
    auto refs = load_references_file(testing::fixture("references.jsonl"));
    CHECK(refs.positives.size() == 1);
    CHECK(refs.negatives.size() == 1);
    CHECK(load_references("").positives.empty());
    try {
      load_references("{\"polarity\": \"pos\", \"history\": \"a\"}\n{\"polarity\": \"maybe\", \"history\": \"b\"}\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(load_references("not json\n"), ParseError);
  }

  TEST_CASE("config names and validation") {
    CHECK(parse_normalization("running_zscore") == Normalization::kRunningZscore);
    CHECK(to_string(Normalization::kClamp) == "clamp");
    CHECK(parse_rank_mode("margin") == RankMode::kMargin);
    CHECK_THROWS_AS(parse_normalization("zscore"), Error);
    RewardConfig cfg;
    CHECK(cfg.expected_reason_length == 3);
    CHECK(cfg.eta == 5.0);
    CHECK(cfg.rank_mode == RankMode::kLiteral);
    cfg.expected_reason_length = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = RewardConfig{};
    cfg.eta = -1;
    CHECK_THROWS_AS(cfg.validate(), Error);
  }
}
