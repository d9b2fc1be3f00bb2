#pragma once

// Reference-set pipeline: simulate a pool of logged users, keep the
// informative ones, condense each into a ReferenceRecord, and persist.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "banditlab/cf.hpp"
#include "banditlab/env.hpp"

namespace banditlab {

struct UserHistory {
  std::uint64_t user_id = 0;
  std::vector<EventRecord> events;
  std::uint64_t total_events = 0;
  std::uint64_t total_clicks = 0;
};

// Logging policy is a uniform-random recommender.
std::vector<UserHistory> generate_pool(const Environment& env, std::size_t num_users, std::uint64_t seed,
                                       std::size_t threads = 1);

struct FilterThresholds {
  std::uint64_t min_events = 100;
  // When true, users with at least one click are kept regardless of length.
  bool require_click = true;
};

// Keeps a history iff total_events >= min_events, or (require_click and
// total_clicks >= 1). Throws ReferenceSetError if nothing survives.
std::vector<UserHistory> filter_reference_set(const std::vector<UserHistory>& pool, const FilterThresholds& thresholds);

bool passes_filter(const UserHistory& history, const FilterThresholds& thresholds);

ReferenceRecord build_record(const UserHistory& history, std::size_t num_products);

struct RefsetOptions {
  std::size_t pool_size = 2000;
  FilterThresholds filter;
  std::optional<std::uint64_t> generation_seed;  // derived from the env seed when absent
};

struct ReferenceSetFile {
  std::string env_fingerprint;
  std::string env_canonical;
  std::size_t num_products = 0;
  std::uint64_t generation_seed = 0;
  std::size_t pool_size = 0;
  FilterThresholds filter;
  std::vector<ReferenceRecord> records;

  std::shared_ptr<const std::vector<ReferenceRecord>> shared_records() const {
    return std::make_shared<const std::vector<ReferenceRecord>>(records);
  }
};

std::uint64_t default_generation_seed(const EnvConfig& config);

// generate_pool -> filter_reference_set -> build_record.
ReferenceSetFile make_reference_set(const Environment& env, const RefsetOptions& options, std::size_t threads = 1);

// Header line followed by one JSON record per line. Profiles are written at 9
// significant digits next to the integer counts they derive from.
void save_reference_set(const std::filesystem::path& path, const ReferenceSetFile& file);

// Throws ReferenceSetError on malformed content, or when expected_fingerprint
// is given and differs from the header.
ReferenceSetFile load_reference_set(const std::filesystem::path& path,
                                    const std::optional<std::string>& expected_fingerprint = std::nullopt);

}  // namespace banditlab
