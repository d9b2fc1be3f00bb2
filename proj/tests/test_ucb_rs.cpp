#include <cmath>
#include <set>

#include "doctest.h"

#include "banditlab/errors.hpp"
#include "banditlab/ucb_rs.hpp"

using namespace banditlab;

namespace {

ReferenceRecord record_with(std::uint64_t id, std::vector<double> ctr, std::vector<double> views) {
  ReferenceRecord r;
  r.ref_user_id = id;
  r.ctr = std::move(ctr);
  r.view_prob = std::move(views);
  return r;
}

// Two hand-built reference users over five products.
std::shared_ptr<const std::vector<ReferenceRecord>> desk_refs() {
  return std::make_shared<const std::vector<ReferenceRecord>>(std::vector<ReferenceRecord>{
      record_with(1, {0.5, 0.0, 0.25, 0.0, 0.0}, {0.5, 0.5, 0.0, 0.0, 0.0}),
      record_with(2, {0.0, 0.2, 0.0, 0.4, 0.0}, {0.0, 0.0, 0.5, 0.5, 0.0}),
  });
}

UserStats desk_user() {
  UserStats s(5);
  s.record_display(0, true);
  s.record_display(0, false);
  s.record_display(1, false);
  return s;
}

std::shared_ptr<const std::vector<ReferenceRecord>> random_refs(Rng& rng, std::size_t count, std::size_t P) {
  std::uniform_real_distribution<double> u(0.0, 0.3);
  std::vector<ReferenceRecord> refs;
  for (std::size_t r = 0; r < count; ++r) {
    std::vector<double> ctr(P), views(P);
    double total = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
      ctr[p] = u(rng);
      views[p] = u(rng);
      total += views[p];
    }
    for (auto& v : views) v /= total;
    refs.push_back(record_with(r, ctr, views));
  }
  return std::make_shared<const std::vector<ReferenceRecord>>(std::move(refs));
}

}  // namespace

TEST_CASE("feature construction") {
  SUBCASE("no displays gives a zero CTR vector") {
    UserStats s(4);
    s.record_view(1);
    CHECK(build_features(s, UcbRsVariant::CtrFeatures) == std::vector<double>(4, 0.0));
  }
  SUBCASE("equal views split evenly") {
    UserStats s(2);
    s.record_view(0);
    s.record_view(0);
    s.record_view(1);
    s.record_view(1);
    CHECK(build_features(s, UcbRsVariant::ViewFeatures) == std::vector<double>{0.5, 0.5});
  }
  SUBCASE("combined features are chi + theta nu") {
    UserStats s(2);
    for (int i = 0; i < 10; ++i) s.record_display(0, i == 0);
    s.record_view(0);
    s.record_view(1);
    s.record_view(1);
    s.record_view(0);
    s.record_view(1);
    const auto f = build_features(s, UcbRsVariant::Combined, 0.5);
    CHECK(std::abs(f[0] - (0.1 + 0.5 * 0.4)) < 1e-12);
    CHECK(std::abs(f[1] - (0.0 + 0.5 * 0.6)) < 1e-12);
  }
  SUBCASE("chi (0.1, 0), nu (0.2, 0.4), theta 0.5 gives (0.2, 0.2)") {
    UserStats s(3);
    for (int i = 0; i < 10; ++i) s.record_display(0, i == 0);
    s.record_view(0);
    s.record_view(1);
    s.record_view(1);
    s.record_view(2);
    s.record_view(2);
    const auto f = build_features(s, UcbRsVariant::Combined, 0.5);
    CHECK(std::abs(f[0] - 0.2) < 1e-12);
    CHECK(std::abs(f[1] - 0.2) < 1e-12);
  }
}

TEST_CASE("instant and estimated mean blend") {
  const std::vector<double> instant{0.02, 0.5};
  const std::vector<double> estimate{0.04, 0.1};
  CHECK(estimate_mean_reward(instant, estimate, 1.0) == instant);
  CHECK(estimate_mean_reward(instant, estimate, 0.0) == estimate);
  CHECK(std::abs(estimate_mean_reward(instant, estimate, 0.5)[0] - 0.03) < 1e-12);
}

TEST_CASE("confidence interval") {
  CHECK(std::abs(confidence_interval(0, 5, 2.0, 7) - std::sqrt(2.0 * std::log(7.0))) < 1e-12);
  CHECK(std::abs(warm_start_bonus(2.0, std::exp(2.0)) - 2.0) < 1e-12);
  CHECK(confidence_interval(0, 5, 2.0, 10000) == warm_start_bonus(2.0, 10000.0));
  CHECK(confidence_interval(1, 1, 2.0, 10000) == 0.0);
  CHECK(std::abs(confidence_interval(4, 3, 1.0 / std::log(3.0), 10000) - 0.5) < 1e-12);
  CHECK(std::abs(explored_bonus(4, std::exp(1.0), 1.0) - 0.5) < 1e-12);
  SUBCASE("unexplored arms always outrank explored ones") {
    for (std::uint64_t t = 1; t <= 10000; t += 37) {
      for (std::uint64_t n = 1; n <= 5; ++n) {
        CHECK(confidence_interval(0, t, 2.0, 10000) >= confidence_interval(n, t, 2.0, 10000));
      }
    }
  }
}

TEST_CASE("hand-computed decision on a five-product desk example") {
  const auto refs = desk_refs();
  Rng rng(1);

  SUBCASE("CTR features") {
    UcbRsConfig c;
    c.variant = UcbRsVariant::CtrFeatures;
    c.top_n = 2;
    const ReferenceIndex index(refs, FeatureKind::Ctr, 0.0);
    const auto s = score_ucb_rs(desk_user(), index, c, rng);
    REQUIRE(s.neighbors.size() == 2);
    CHECK(std::abs(s.neighbors[0].similarity - 0.8944271909999159) < 1e-12);
    CHECK(s.neighbors[1].similarity == 0.0);
    const std::vector<double> expected{1.548147073968205, 1.4823038073675112, 4.416932052578694, 4.291932052578694,
                                       4.291932052578694};
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(s.upper[i] - expected[i]) < 1e-12);
    CHECK(act_ucb_rs(desk_user(), index, c, rng) == 2);
  }

  SUBCASE("combined features") {
    UcbRsConfig c;
    c.variant = UcbRsVariant::Combined;
    c.theta = 0.5;
    c.top_n = 2;
    auto user = desk_user();
    user.record_view(0);
    user.record_view(1);
    const ReferenceIndex index(refs, FeatureKind::Combined, 0.5);
    const auto s = score_ucb_rs(user, index, c, rng);
    CHECK(std::abs(s.neighbors[0].similarity - 0.9534625892455924) < 1e-12);
    CHECK(std::abs(s.neighbors[1].similarity - 0.08728715609439694) < 1e-12);
    const std::vector<double> mean{0.7185489391835442, 0.24790326261223627, 0.125, 0.02725758604092833, 0.0};
    const std::vector<double> upper{1.7666960131517493, 1.7302070699797474, 4.416932052578694, 4.319189638619623,
                                    4.291932052578694};
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(std::abs(s.mean_estimate[i] - mean[i]) < 1e-12);
      CHECK(std::abs(s.upper[i] - upper[i]) < 1e-12);
    }
  }

  SUBCASE("nested blend applies lambda a second time") {
    UcbRsConfig c;
    c.variant = UcbRsVariant::Combined;
    c.theta = 0.5;
    c.top_n = 2;
    c.blend = CombinedBlend::Nested;
    auto user = desk_user();
    user.record_view(0);
    user.record_view(1);
    const ReferenceIndex index(refs, FeatureKind::Combined, 0.5);
    const auto s = score_ucb_rs(user, index, c, rng);
    const std::vector<double> direct{0.7185489391835442, 0.24790326261223627, 0.125, 0.02725758604092833, 0.0};
    const std::vector<double> chi{0.5, 0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(s.mean_estimate[i] - (0.5 * chi[i] + 0.5 * direct[i])) < 1e-12);
  }
}

TEST_CASE("new users draw random neighbors") {
  Rng rng(3);
  const auto refs = random_refs(rng, 40, 6);
  const ReferenceIndex index(refs, FeatureKind::Ctr, 0.0);
  UcbRsConfig c;
  c.variant = UcbRsVariant::CtrFeatures;
  c.top_n = 5;
  std::set<std::size_t> seen;
  for (int k = 0; k < 50; ++k) {
    const auto s = score_ucb_rs(UserStats(6), index, c, rng);
    REQUIRE(s.neighbors.size() == 5);
    std::set<std::size_t> distinct;
    for (const auto& nb : s.neighbors) distinct.insert(nb.index);
    CHECK(distinct.size() == 5);
    seen.insert(distinct.begin(), distinct.end());
  }
  CHECK(seen.size() > 30);

  SUBCASE("one organic view is enough to use similarity") {
    UserStats s(6);
    s.record_view(2);
    const auto a = score_ucb_rs(s, index, c, rng);
    const auto b = score_ucb_rs(s, index, c, rng);
    CHECK(a.neighbors == b.neighbors);
  }
}

TEST_CASE("all-equal references tie every arm for a new user") {
  std::vector<ReferenceRecord> refs(3, record_with(0, {0.1, 0.1, 0.1, 0.1}, {0.25, 0.25, 0.25, 0.25}));
  for (std::size_t i = 0; i < 3; ++i) refs[i].ref_user_id = i;
  const auto shared = std::make_shared<const std::vector<ReferenceRecord>>(refs);
  UcbRsConfig c;
  c.top_n = 2;
  Rng rng(10);
  const ReferenceIndex index(shared, FeatureKind::Combined, c.theta);
  const auto s = score_ucb_rs(UserStats(4), index, c, rng);
  for (double u : s.upper) CHECK(u == doctest::Approx(s.upper[0]));
  std::vector<int> hits(4, 0);
  for (int k = 0; k < 4000; ++k) ++hits[act_ucb_rs(UserStats(4), index, c, rng)];
  for (int h : hits) CHECK(h > 800);
}

TEST_CASE("empty reference set is rejected") {
  Rng rng(1);
  UcbRsConfig c;
  CHECK_THROWS_AS(act_ucb_rs(UserStats(3), std::make_shared<const std::vector<ReferenceRecord>>(), c, rng),
                  ReferenceSetError);
}

TEST_CASE("lambda 1 with every arm explored matches UCB1") {
  Rng rng(17);
  const auto refs = random_refs(rng, 12, 6);
  UcbRsConfig c;
  c.variant = UcbRsVariant::CtrFeatures;
  c.lambda = 1.0;
  c.tie_break = TieBreak::LowestIndex;
  const ReferenceIndex index(refs, FeatureKind::Ctr, 0.0);
  for (int trial = 0; trial < 300; ++trial) {
    UserStats us(6);
    ArmStats as(6);
    for (std::size_t i = 0; i < 6; ++i) {
      const auto n = 1 + rng() % 20;
      for (std::uint64_t k = 0; k < n; ++k) {
        const bool click = rng() % 4 == 0;
        us.record_display(i, click);
        as.record(i, click ? 1.0 : 0.0);
      }
    }
    CHECK(act_ucb_rs(us, index, c, rng) == act_ucb1(as, c.alpha));
  }
}

TEST_CASE("the upper bound grows with the CF estimate") {
  Rng rng(2);
  auto refs = random_refs(rng, 1, 4);
  UcbRsConfig c;
  c.variant = UcbRsVariant::CtrFeatures;
  c.top_n = 1;
  auto user = UserStats(4);
  user.record_display(0, true);
  double previous = -1.0;
  for (double v : {0.0, 0.1, 0.2, 0.5, 0.9}) {
    auto copy = *refs;
    copy[0].ctr[2] = v;
    const ReferenceIndex index(std::make_shared<const std::vector<ReferenceRecord>>(copy), FeatureKind::Ctr, 0.0);
    const auto s = score_ucb_rs(user, index, c, rng);
    CHECK(s.upper[2] >= previous);
    previous = s.upper[2];
  }
}

TEST_CASE("config validation and agent determinism") {
  UcbRsConfig c;
  CHECK_NOTHROW(c.validate());
  c.lambda = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = UcbRsConfig{};
  c.theta = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = UcbRsConfig{};
  c.top_n = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = UcbRsConfig{};
  c.horizon = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  Rng rng(5);
  const auto refs = random_refs(rng, 30, 8);
  c = UcbRsConfig{};
  c.seed = 99;
  const auto index = std::make_shared<const ReferenceIndex>(refs, FeatureKind::Combined, c.theta);
  UcbRsAgent a(index, c);
  UcbRsAgent b(index, c);
  for (int k = 0; k < 200; ++k) {
    if (k % 5 == 0) {
      a.observe_view(k % 8);
      b.observe_view(k % 8);
    }
    const auto x = a.act();
    REQUIRE(x == b.act());
    REQUIRE(x < 8);
    a.observe_reward(x, k % 7 == 0);
    b.observe_reward(x, k % 7 == 0);
  }
  CHECK(a.stats().t == 200);
  CHECK(a.stats().total_views == 40);
}

TEST_CASE("a mismatched index is rejected") {
  Rng rng(1);
  const ReferenceIndex index(desk_refs(), FeatureKind::Ctr, 0.0);
  UcbRsConfig c;
  c.variant = UcbRsVariant::ViewFeatures;
  CHECK_THROWS_AS(score_ucb_rs(desk_user(), index, c, rng), std::invalid_argument);
  c.variant = UcbRsVariant::CtrFeatures;
  CHECK_THROWS_AS(score_ucb_rs(UserStats(4), index, c, rng), std::invalid_argument);
}
