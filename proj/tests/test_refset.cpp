#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

#include "banditlab/errors.hpp"
#include "banditlab/refset.hpp"

using namespace banditlab;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  const fs::path dir = BANDITLAB_TEST_TMP;
  fs::create_directories(dir);
  return dir;
}

UserHistory history_with(std::uint64_t events, std::uint64_t clicks) {
  UserHistory h;
  h.total_events = events;
  h.total_clicks = clicks;
  return h;
}

EnvConfig env_config(std::size_t products = 20, std::uint64_t seed = 4) {
  EnvConfig c;
  c.num_products = products;
  c.seed = seed;
  return c;
}

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("reference filter") {
  const FilterThresholds t{100, true};
  CHECK_FALSE(passes_filter(history_with(5, 0), t));
  CHECK(passes_filter(history_with(5, 1), t));
  CHECK(passes_filter(history_with(150, 0), t));
  CHECK(passes_filter(history_with(100, 0), t));
  CHECK_FALSE(passes_filter(history_with(5, 1), FilterThresholds{100, false}));

  SUBCASE("lowering the length threshold never drops a user") {
    std::vector<UserHistory> pool;
    for (std::uint64_t e = 0; e < 300; e += 7) pool.push_back(history_with(e, e % 3 == 0 ? 1 : 0));
    std::size_t previous = 0;
    for (std::uint64_t L : {400u, 250u, 100u, 50u, 0u}) {
      std::vector<UserHistory> kept;
      try {
        kept = filter_reference_set(pool, {L, true});
      } catch (const ReferenceSetError&) {
      }
      CHECK(kept.size() >= previous);
      previous = kept.size();
      for (const auto& h : kept) CHECK((h.total_events >= L || h.total_clicks >= 1));
    }
  }
  SUBCASE("an empty result is an error") {
    CHECK_THROWS_AS(filter_reference_set({history_with(5, 0)}, t), ReferenceSetError);
  }
}

TEST_CASE("record construction") {
  SUBCASE("two clicks in four displays") {
    UserHistory h;
    h.user_id = 3;
    for (int i = 0; i < 4; ++i) h.events.push_back({3, std::uint64_t(i), Session::Bandit, 3, i < 2, std::nullopt});
    const auto r = build_record(h, 5);
    CHECK(r.ctr[3] == 0.5);
    CHECK(r.view_prob == std::vector<double>(5, 0.0));
    CHECK(r.ref_user_id == 3);
  }
  SUBCASE("profiles agree with an independent replay of a 20-event log") {
    const std::vector<EventRecord> log{
        {0, 0, Session::Organic, std::nullopt, std::nullopt, 1}, {0, 1, Session::Organic, std::nullopt, std::nullopt, 1},
        {0, 2, Session::Bandit, 0, false, std::nullopt},         {0, 3, Session::Bandit, 2, true, std::nullopt},
        {0, 4, Session::Bandit, 2, false, std::nullopt},         {0, 5, Session::Bandit, 2, false, std::nullopt},
        {0, 6, Session::Organic, std::nullopt, std::nullopt, 3}, {0, 7, Session::Organic, std::nullopt, std::nullopt, 0},
        {0, 8, Session::Bandit, 3, true, std::nullopt},          {0, 9, Session::Bandit, 3, true, std::nullopt},
        {0, 10, Session::Bandit, 0, false, std::nullopt},        {0, 11, Session::Bandit, 1, false, std::nullopt},
        {0, 12, Session::Organic, std::nullopt, std::nullopt, 1}, {0, 13, Session::Bandit, 2, true, std::nullopt},
        {0, 14, Session::Bandit, 4, false, std::nullopt},        {0, 15, Session::Bandit, 4, false, std::nullopt},
        {0, 16, Session::Bandit, 4, false, std::nullopt},        {0, 17, Session::Organic, std::nullopt, std::nullopt, 4},
        {0, 18, Session::Bandit, 3, false, std::nullopt},        {0, 19, Session::Bandit, 0, true, std::nullopt},
    };
    UserHistory h;
    h.events = log;
    h.total_events = log.size();
    const auto r = build_record(h, 5);
    // Counted by hand from the log above.
    const std::vector<double> ctr{1.0 / 3.0, 0.0, 2.0 / 4.0, 2.0 / 3.0, 0.0};
    const std::vector<double> views{1.0 / 6.0, 3.0 / 6.0, 0.0, 1.0 / 6.0, 1.0 / 6.0};
    for (std::size_t p = 0; p < 5; ++p) {
      CHECK(r.ctr[p] == doctest::Approx(ctr[p]).epsilon(1e-15));
      CHECK(r.view_prob[p] == doctest::Approx(views[p]).epsilon(1e-15));
    }
    CHECK(r.displays == std::vector<std::uint32_t>{3, 1, 4, 3, 3});
  }
  SUBCASE("records from simulated pools match a recount of their logs") {
    const Environment env(env_config());
    for (const auto& h : generate_pool(env, 30, 8)) {
      const auto r = build_record(h, 20);
      std::vector<double> shown(20, 0), clicked(20, 0), viewed(20, 0);
      double total_views = 0;
      for (const auto& e : h.events) {
        if (e.session == Session::Bandit) {
          shown[*e.action] += 1;
          clicked[*e.action] += *e.reward ? 1 : 0;
        } else {
          viewed[*e.viewed_product] += 1;
          total_views += 1;
        }
      }
      for (std::size_t p = 0; p < 20; ++p) {
        CHECK(r.ctr[p] == (shown[p] > 0 ? clicked[p] / shown[p] : 0.0));
        CHECK(r.view_prob[p] == (total_views > 0 ? viewed[p] / total_views : 0.0));
      }
      CHECK(r.total_events == h.events.size());
    }
  }
}

TEST_CASE("pool generation") {
  const Environment env(env_config());
  SUBCASE("size, counts and determinism") {
    const auto a = generate_pool(env, 50, 12);
    const auto b = generate_pool(env, 50, 12, 4);
    REQUIRE(a.size() == 50);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].total_events == a[i].events.size());
      std::uint64_t clicks = 0;
      for (const auto& e : a[i].events) clicks += e.reward.value_or(false);
      CHECK(a[i].total_clicks == clicks);
      CHECK(a[i].total_events == b[i].total_events);
      CHECK(a[i].total_clicks == b[i].total_clicks);
    }
  }
  SUBCASE("immediate stop gives at most two events") {
    auto c = env_config();
    c.p_leave_organic = 1.0;
    c.p_organic_to_bandit = 0.0;
    c.p_leave_bandit = 1.0;
    c.p_bandit_to_organic = 0.0;
    const auto pool = generate_pool(Environment(c), 1, 1);
    CHECK(pool.size() == 1);
    CHECK(pool[0].events.size() <= 2);
  }
  SUBCASE("zero users is rejected") { CHECK_THROWS_AS(generate_pool(env, 0, 1), ConfigError); }
}

TEST_CASE("file round trip") {
  const Environment env(env_config());
  RefsetOptions opts;
  opts.pool_size = 200;
  const auto file = make_reference_set(env, opts);
  REQUIRE_FALSE(file.records.empty());
  CHECK(file.records.size() <= 200);
  CHECK(file.env_fingerprint == env.config().fingerprint());
  const auto path = tmp_dir() / "roundtrip.jsonl";
  save_reference_set(path, file);

  SUBCASE("records come back field for field") {
    const auto loaded = load_reference_set(path, env.config().fingerprint());
    CHECK(loaded.records == file.records);
    CHECK(loaded.num_products == 20);
    CHECK(loaded.generation_seed == file.generation_seed);
    CHECK(loaded.pool_size == 200);
    CHECK(loaded.filter.min_events == 100);
    CHECK(loaded.filter.require_click);
    CHECK(loaded.env_canonical == env.config().canonical());
  }
  SUBCASE("saving twice gives identical bytes") {
    const auto again = tmp_dir() / "roundtrip2.jsonl";
    save_reference_set(again, make_reference_set(env, opts));
    CHECK(read_all(again) == read_all(path));
  }
  SUBCASE("header line describes the set") {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    const auto header = nlohmann::json::parse(line);
    CHECK(header["num_products"] == 20);
    CHECK(header["retained"] == file.records.size());
    CHECK(header["env_fingerprint"] == file.env_fingerprint);
  }
  SUBCASE("a different product count is a fingerprint error") {
    CHECK_THROWS_AS(load_reference_set(path, env_config(21).fingerprint()), ReferenceSetError);
  }
  SUBCASE("malformed content") {
    const auto bad = tmp_dir() / "bad.jsonl";
    {
      std::ofstream out(bad);
      out << "{\"format\": \"something-else\"}\n";
    }
    CHECK_THROWS_AS(load_reference_set(bad), ReferenceSetError);
    {
      std::ofstream out(bad);
      out << read_all(path).substr(0, read_all(path).size() / 2);
    }
    CHECK_THROWS_AS(load_reference_set(bad), ReferenceSetError);
    CHECK_THROWS_AS(load_reference_set(tmp_dir() / "missing.jsonl"), ReferenceSetError);
  }
  SUBCASE("tampered profiles are detected") {
    std::ifstream in(path);
    std::string line;
    std::vector<std::string> lines;
    bool tampered = false;
    while (std::getline(in, line)) {
      if (!lines.empty() && !tampered) {
        auto j = nlohmann::json::parse(line);
        if (!j["ctr"].empty()) {
          j["ctr"][0][1] = j["ctr"][0][1].get<double>() + 0.125;
          line = j.dump();
          tampered = true;
        }
      }
      lines.push_back(line);
    }
    REQUIRE(tampered);
    const auto bad = tmp_dir() / "tampered.jsonl";
    {
      std::ofstream out(bad);
      for (const auto& l : lines) out << l << '\n';
    }
    CHECK_THROWS_AS(load_reference_set(bad), ReferenceSetError);
  }
}

TEST_CASE("large reference sets load quickly") {
  const Environment env(env_config(200, 9));
  RefsetOptions opts;
  opts.pool_size = 2000;
  opts.filter.min_events = 0;
  const auto file = make_reference_set(env, opts);
  CHECK(file.records.size() == 2000);
  const auto path = tmp_dir() / "large.jsonl";
  save_reference_set(path, file);
  const auto start = std::chrono::steady_clock::now();
  const auto loaded = load_reference_set(path);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(loaded.records.size() == 2000);
  CHECK(seconds < 1.0);
}
