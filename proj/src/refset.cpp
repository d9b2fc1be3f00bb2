#include "banditlab/refset.hpp"

#include <fstream>
#include <string>

#include <fmt/format.h>
#include "json.hpp"

#include "banditlab/agents.hpp"
#include "banditlab/episode.hpp"
#include "banditlab/errors.hpp"
#include "banditlab/parallel.hpp"

namespace banditlab {
namespace {

using Json = nlohmann::ordered_json;

constexpr std::string_view kFormatName = "banditlab-refset";
constexpr int kFormatVersion = 1;
constexpr std::uint64_t kPoolStream = 0x9001;

double round9(double x) { return std::stod(fmt::format("{:.9g}", x)); }

Json sparse_counts(const std::vector<std::uint32_t>& counts) {
  Json out = Json::array();
  for (std::size_t p = 0; p < counts.size(); ++p) {
    if (counts[p] != 0) out.push_back(Json::array({p, counts[p]}));
  }
  return out;
}

Json sparse_profile(const FeatureVector& profile) {
  Json out = Json::array();
  for (std::size_t p = 0; p < profile.size(); ++p) {
    if (profile[p] != 0.0) out.push_back(Json::array({p, round9(profile[p])}));
  }
  return out;
}

std::vector<std::uint32_t> dense_counts(const Json& sparse, std::size_t P) {
  std::vector<std::uint32_t> out(P, 0);
  for (const auto& entry : sparse) {
    const auto p = entry.at(0).get<std::size_t>();
    if (p >= P) throw ReferenceSetError(fmt::format("product index {} out of range", p));
    out[p] = entry.at(1).get<std::uint32_t>();
  }
  return out;
}

}  // namespace

std::vector<UserHistory> generate_pool(const Environment& env, std::size_t num_users, std::uint64_t seed,
                                       std::size_t threads) {
  if (num_users < 1) throw ConfigError("pool size must be >= 1");
  std::vector<UserHistory> pool(num_users);
  parallel_for(num_users, threads, [&](std::size_t i) {
    UserHistory& h = pool[i];
    h.user_id = i;
    RandomAgent logger(env.num_products(), derive_seed({seed, kPoolStream, i, 1}));
    const auto tally = run_episode(
        env, logger, derive_seed({seed, kPoolStream, i}), [&h](const EventRecord& e) { h.events.push_back(e); }, i);
    h.total_events = tally.events;
    h.total_clicks = tally.clicks;
  });
  return pool;
}

bool passes_filter(const UserHistory& history, const FilterThresholds& thresholds) {
  return history.total_events >= thresholds.min_events || (thresholds.require_click && history.total_clicks >= 1);
}

std::vector<UserHistory> filter_reference_set(const std::vector<UserHistory>& pool,
                                              const FilterThresholds& thresholds) {
  std::vector<UserHistory> kept;
  for (const auto& h : pool) {
    if (passes_filter(h, thresholds)) kept.push_back(h);
  }
  if (kept.empty()) {
    throw ReferenceSetError(fmt::format(
        "no user in a pool of {} passed the reference filter (min events {}, clickers {}); "
        "use a larger pool or looser thresholds",
        pool.size(), thresholds.min_events, thresholds.require_click ? "kept" : "not kept"));
  }
  return kept;
}

ReferenceRecord build_record(const UserHistory& history, std::size_t num_products) {
  if (history.events.empty()) throw std::invalid_argument("build_record needs a nonempty history");
  ReferenceRecord r;
  r.ref_user_id = history.user_id;
  r.total_events = history.total_events;
  r.total_clicks = history.total_clicks;
  r.displays.assign(num_products, 0);
  r.clicks.assign(num_products, 0);
  r.views.assign(num_products, 0);
  for (const auto& e : history.events) {
    if (e.action && e.reward) {
      ++r.displays.at(*e.action);
      if (*e.reward) ++r.clicks.at(*e.action);
    }
    if (e.viewed_product) ++r.views.at(*e.viewed_product);
  }
  r.refresh_profiles();
  return r;
}

std::uint64_t default_generation_seed(const EnvConfig& config) { return derive_seed({config.seed, kPoolStream}); }

ReferenceSetFile make_reference_set(const Environment& env, const RefsetOptions& options, std::size_t threads) {
  ReferenceSetFile file;
  file.env_fingerprint = env.config().fingerprint();
  file.env_canonical = env.config().canonical();
  file.num_products = env.num_products();
  file.generation_seed = options.generation_seed.value_or(default_generation_seed(env.config()));
  file.pool_size = options.pool_size;
  file.filter = options.filter;

  const auto pool = generate_pool(env, options.pool_size, file.generation_seed, threads);
  for (const auto& h : filter_reference_set(pool, options.filter)) {
    file.records.push_back(build_record(h, file.num_products));
  }
  return file;
}

void save_reference_set(const std::filesystem::path& path, const ReferenceSetFile& file) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));

  Json header;
  header["format"] = kFormatName;
  header["version"] = kFormatVersion;
  header["env_fingerprint"] = file.env_fingerprint;
  header["env"] = file.env_canonical;
  header["num_products"] = file.num_products;
  header["generation_seed"] = file.generation_seed;
  header["pool_size"] = file.pool_size;
  header["min_events"] = file.filter.min_events;
  header["require_click"] = file.filter.require_click;
  header["retained"] = file.records.size();
  out << header.dump() << '\n';

  for (const auto& r : file.records) {
    Json j;
    j["ref_user_id"] = r.ref_user_id;
    j["total_events"] = r.total_events;
    j["total_clicks"] = r.total_clicks;
    j["displays"] = sparse_counts(r.displays);
    j["clicks"] = sparse_counts(r.clicks);
    j["views"] = sparse_counts(r.views);
    j["ctr"] = sparse_profile(r.ctr);
    j["view_prob"] = sparse_profile(r.view_prob);
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error(fmt::format("failed writing {}", path.string()));
}

ReferenceSetFile load_reference_set(const std::filesystem::path& path,
                                    const std::optional<std::string>& expected_fingerprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ReferenceSetError(fmt::format("cannot open reference set {}", path.string()));

  ReferenceSetFile file;
  std::string line;
  std::size_t line_no = 0;
  std::size_t declared = 0;
  try {
    if (!std::getline(in, line)) throw ReferenceSetError("missing header line");
    ++line_no;
    const auto header = Json::parse(line);
    if (header.at("format").get<std::string>() != kFormatName || header.at("version").get<int>() != kFormatVersion) {
      throw ReferenceSetError("not a banditlab reference set (format/version)");
    }
    file.env_fingerprint = header.at("env_fingerprint").get<std::string>();
    file.env_canonical = header.at("env").get<std::string>();
    file.num_products = header.at("num_products").get<std::size_t>();
    file.generation_seed = header.at("generation_seed").get<std::uint64_t>();
    file.pool_size = header.at("pool_size").get<std::size_t>();
    file.filter.min_events = header.at("min_events").get<std::uint64_t>();
    file.filter.require_click = header.at("require_click").get<bool>();
    declared = header.at("retained").get<std::size_t>();

    if (expected_fingerprint && *expected_fingerprint != file.env_fingerprint) {
      throw ReferenceSetError(fmt::format(
          "reference set {} was built for environment {} ({}), but the experiment uses {}", path.string(),
          file.env_fingerprint, file.env_canonical, *expected_fingerprint));
    }

    const std::size_t P = file.num_products;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto j = Json::parse(line);
      ReferenceRecord r;
      r.ref_user_id = j.at("ref_user_id").get<std::uint64_t>();
      r.total_events = j.at("total_events").get<std::uint64_t>();
      r.total_clicks = j.at("total_clicks").get<std::uint64_t>();
      r.displays = dense_counts(j.at("displays"), P);
      r.clicks = dense_counts(j.at("clicks"), P);
      r.views = dense_counts(j.at("views"), P);
      for (std::size_t p = 0; p < P; ++p) {
        if (r.clicks[p] > r.displays[p]) throw ReferenceSetError("clicks exceed displays");
      }
      r.refresh_profiles();
      if (sparse_profile(r.ctr) != j.at("ctr") || sparse_profile(r.view_prob) != j.at("view_prob")) {
        throw ReferenceSetError("stored profiles disagree with the stored counts");
      }
      file.records.push_back(std::move(r));
    }
  } catch (const ReferenceSetError& e) {
    throw ReferenceSetError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
  } catch (const nlohmann::json::exception& e) {
    throw ReferenceSetError(fmt::format("{}:{}: malformed reference set: {}", path.string(), line_no, e.what()));
  }
  if (file.records.size() != declared) {
    throw ReferenceSetError(fmt::format("{}: header declares {} records, found {}", path.string(), declared,
                                        file.records.size()));
  }
  if (file.records.empty()) throw ReferenceSetError(fmt::format("{}: reference set is empty", path.string()));
  return file;
}

}  // namespace banditlab
