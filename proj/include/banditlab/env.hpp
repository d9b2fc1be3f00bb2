#pragma once

// Latent-factor simulator of a user alternating between organic browsing and
// bandit (ad display) sessions. Each organic step emits one product view,
// each bandit step consumes a recommended product and returns a click bit.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "banditlab/rng.hpp"

namespace banditlab {

enum class Session { Organic, Bandit, Stopped };

std::string_view to_string(Session s);

struct EnvConfig {
  std::size_t num_products = 50;
  std::size_t latent_dim = 10;
  double sigma_omega = 1.0;
  double sigma_mu = 10.0;
  double p_bandit_to_organic = 0.05;
  double p_organic_to_bandit = 0.25;
  double p_leave_bandit = 0.01;
  double p_leave_organic = 0.01;
  double sigma_drift = 0.02;
  double click_scale = 0.3;
  // Fitted so that a uniform-random recommender hits target_ctr when absent.
  std::optional<double> click_offset;
  double click_cap = 0.2;
  double target_ctr = 0.01;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;

  // Canonical one-line rendering of every field; stable across runs.
  std::string canonical() const;

  // 16 hex digits of FNV-1a over canonical().
  std::string fingerprint() const;
};

// Product embeddings stored row-major, num_products x latent_dim.
struct Catalog {
  std::size_t num_products = 0;
  std::size_t latent_dim = 0;
  std::vector<double> organic_embedding;
  std::vector<double> bandit_embedding;
  std::vector<double> popularity;

  std::span<const double> organic_row(std::size_t p) const {
    return {organic_embedding.data() + p * latent_dim, latent_dim};
  }
  std::span<const double> bandit_row(std::size_t p) const {
    return {bandit_embedding.data() + p * latent_dim, latent_dim};
  }

  friend bool operator==(const Catalog&, const Catalog&) = default;
};

struct UserModel {
  std::uint64_t user_seed = 0;
  std::vector<double> omega;
  Session session = Session::Organic;
  std::uint64_t steps = 0;
  Rng rng;
};

struct StepOutcome {
  std::vector<std::size_t> observation;
  std::optional<bool> reward;
  bool done = false;
  std::map<std::string, std::string> info;
};

class Environment {
 public:
  explicit Environment(EnvConfig config);

  const EnvConfig& config() const { return config_; }
  const Catalog& catalog() const { return catalog_; }
  std::size_t num_products() const { return catalog_.num_products; }
  double click_offset() const { return click_offset_; }

  UserModel reset(std::uint64_t user_seed) const;

  // `action` is required in a bandit session and ignored in an organic one.
  StepOutcome step(UserModel& user, std::optional<std::size_t> action) const;

  std::vector<double> organic_view_distribution(const UserModel& user) const;
  double click_probability(const UserModel& user, std::size_t product) const;

  // Draws the next session state from the transition chain and stores it on the user.
  Session advance_session(UserModel& user) const;

 private:
  EnvConfig config_;
  Catalog catalog_;
  double click_offset_ = 0.0;
};

// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

// Transition of the session chain given a uniform draw u in [0,1).
Session next_session(Session current, const EnvConfig& config, double u);

Catalog sample_catalog(const EnvConfig& config);

// Bisection on the offset b so that the mean click probability of a
// uniform-random recommender over a sampled user population equals target_ctr.
double calibrate_click_offset(const EnvConfig& config, const Catalog& catalog);

struct EventRecord {
  std::uint64_t user_id = 0;
  std::uint64_t t = 0;
  Session session = Session::Organic;
  std::optional<std::size_t> action;
  std::optional<bool> reward;
  std::optional<std::size_t> viewed_product;
};

// One JSON object per line.
void write_event(std::ostream& out, const EventRecord& event);

}  // namespace banditlab
