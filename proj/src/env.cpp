#include "banditlab/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include "json.hpp"

#include "banditlab/errors.hpp"

namespace banditlab {
namespace {

constexpr std::uint64_t kCatalogStream = 0xC0FFEE01;
constexpr std::uint64_t kCalibrationStream = 0xC0FFEE02;
constexpr std::uint64_t kUserStream = 0xC0FFEE03;
constexpr std::size_t kCalibrationUsers = 4000;

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConfigError(fmt::format("{} must be a probability in [0,1], got {}", name, p));
  }
}

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw ConfigError(fmt::format("{} must be finite and >= 0, got {}", name, v));
  }
}

}  // namespace

std::string_view to_string(Session s) {
  switch (s) {
    case Session::Organic: return "organic";
    case Session::Bandit: return "bandit";
    case Session::Stopped: return "stopped";
  }
  return "unknown";
}

void EnvConfig::validate() const {
  if (num_products < 2) throw ConfigError(fmt::format("num_products must be >= 2, got {}", num_products));
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  require_nonnegative(sigma_omega, "sigma_omega");
  require_nonnegative(sigma_mu, "sigma_mu");
  require_nonnegative(sigma_drift, "sigma_drift");
  require_probability(p_bandit_to_organic, "p_bandit_to_organic");
  require_probability(p_organic_to_bandit, "p_organic_to_bandit");
  require_probability(p_leave_bandit, "p_leave_bandit");
  require_probability(p_leave_organic, "p_leave_organic");
  if (p_organic_to_bandit + p_leave_organic > 1.0 + 1e-12) {
    throw ConfigError("p_organic_to_bandit + p_leave_organic exceeds 1");
  }
  if (p_bandit_to_organic + p_leave_bandit > 1.0 + 1e-12) {
    throw ConfigError("p_bandit_to_organic + p_leave_bandit exceeds 1");
  }
  if (!(click_scale >= 0.0) || !std::isfinite(click_scale)) {
    throw ConfigError(fmt::format("click_scale must be >= 0, got {}", click_scale));
  }
  if (!(click_cap > 0.0 && click_cap <= 1.0)) {
    throw ConfigError(fmt::format("click_cap must be in (0,1], got {}", click_cap));
  }
  if (click_offset && !std::isfinite(*click_offset)) throw ConfigError("click_offset must be finite");
  if (!click_offset && !(target_ctr > 0.0 && target_ctr < click_cap)) {
    throw ConfigError(fmt::format("target_ctr must be in (0, click_cap), got {}", target_ctr));
  }
}

std::string EnvConfig::canonical() const {
  return fmt::format(
      "P={};K={};sigma_omega={:.17g};sigma_mu={:.17g};b2o={:.17g};o2b={:.17g};leave_b={:.17g};"
      "leave_o={:.17g};drift={:.17g};kappa={:.17g};offset={};cap={:.17g};target={:.17g};seed={}",
      num_products, latent_dim, sigma_omega, sigma_mu, p_bandit_to_organic, p_organic_to_bandit,
      p_leave_bandit, p_leave_organic, sigma_drift, click_scale,
      click_offset ? fmt::format("{:.17g}", *click_offset) : std::string("auto"), click_cap,
      target_ctr, seed);
}

std::string EnvConfig::fingerprint() const { return fmt::format("{:016x}", fnv1a(canonical())); }

Catalog sample_catalog(const EnvConfig& config) {
  Catalog c;
  c.num_products = config.num_products;
  c.latent_dim = config.latent_dim;
  const std::size_t n = config.num_products * config.latent_dim;
  c.organic_embedding.resize(n);
  c.bandit_embedding.resize(n);
  c.popularity.resize(config.num_products);

  Rng rng(derive_seed({config.seed, kCatalogStream}));
  std::normal_distribution<double> standard(0.0, 1.0);
  for (auto& x : c.organic_embedding) x = standard(rng);
  for (auto& x : c.bandit_embedding) x = standard(rng);
  for (auto& mu : c.popularity) mu = config.sigma_mu * standard(rng);
  return c;
}

double calibrate_click_offset(const EnvConfig& config, const Catalog& catalog) {
  const std::size_t P = catalog.num_products;
  const std::size_t K = catalog.latent_dim;
  Rng rng(derive_seed({config.seed, kCalibrationStream}));
  std::normal_distribution<double> standard(0.0, 1.0);

  std::vector<double> logits(kCalibrationUsers * P);
  std::vector<double> omega(K);
  for (std::size_t u = 0; u < kCalibrationUsers; ++u) {
    for (auto& w : omega) w = config.sigma_omega * standard(rng);
    for (std::size_t p = 0; p < P; ++p) {
      logits[u * P + p] = config.click_scale * (dot(catalog.bandit_row(p), omega) + catalog.popularity[p]);
    }
  }

  auto mean_ctr = [&](double b) {
    double total = 0.0;
    for (double l : logits) total += std::min(config.click_cap, sigmoid(l + b));
    return total / static_cast<double>(logits.size());
  };

  // Mean CTR is nondecreasing in b; widen the bracket until it straddles the target.
  double lo = -20.0;
  double hi = 20.0;
  while (mean_ctr(lo) > config.target_ctr) lo *= 2.0;
  while (mean_ctr(hi) < config.target_ctr) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-12; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mean_ctr(mid) < config.target_ctr) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Environment::Environment(EnvConfig config) : config_(std::move(config)) {
  config_.validate();
  catalog_ = sample_catalog(config_);
  click_offset_ = config_.click_offset ? *config_.click_offset : calibrate_click_offset(config_, catalog_);
}

UserModel Environment::reset(std::uint64_t user_seed) const {
  UserModel user;
  user.user_seed = user_seed;
  user.rng.seed(derive_seed({config_.seed, kUserStream, user_seed}));
  user.omega.resize(config_.latent_dim);
  std::normal_distribution<double> standard(0.0, 1.0);
  for (auto& w : user.omega) w = config_.sigma_omega * standard(user.rng);
  user.session = Session::Organic;
  user.steps = 0;
  return user;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double top = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (auto& x : out) {
    x = std::exp(x - top);
    total += x;
  }
  for (auto& x : out) x /= total;
  return out;
}

std::vector<double> Environment::organic_view_distribution(const UserModel& user) const {
  std::vector<double> logits(catalog_.num_products);
  for (std::size_t p = 0; p < logits.size(); ++p) {
    logits[p] = dot(catalog_.organic_row(p), user.omega) + catalog_.popularity[p];
  }
  return softmax(logits);
}

double Environment::click_probability(const UserModel& user, std::size_t product) const {
  if (product >= catalog_.num_products) {
    throw std::out_of_range(fmt::format("product {} out of range [0,{})", product, catalog_.num_products));
  }
  const double score = dot(catalog_.bandit_row(product), user.omega) + catalog_.popularity[product];
  return std::min(config_.click_cap, sigmoid(config_.click_scale * score + click_offset_));
}

Session next_session(Session current, const EnvConfig& config, double u) {
  switch (current) {
    case Session::Organic:
      if (u < config.p_leave_organic) return Session::Stopped;
      if (u < config.p_leave_organic + config.p_organic_to_bandit) return Session::Bandit;
      return Session::Organic;
    case Session::Bandit:
      if (u < config.p_leave_bandit) return Session::Stopped;
      if (u < config.p_leave_bandit + config.p_bandit_to_organic) return Session::Organic;
      return Session::Bandit;
    case Session::Stopped:
      break;
  }
  return Session::Stopped;
}

Session Environment::advance_session(UserModel& user) const {
  if (user.session == Session::Stopped) throw StateError("advance_session on a stopped user");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  user.session = next_session(user.session, config_, uniform(user.rng));
  return user.session;
}

StepOutcome Environment::step(UserModel& user, std::optional<std::size_t> action) const {
  if (user.session == Session::Stopped) throw StateError("step called after the user session is done");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  StepOutcome out;
  const Session current = user.session;
  out.info["session"] = std::string(to_string(current));
  out.info["t"] = std::to_string(user.steps);

  if (current == Session::Bandit) {
    if (!action) throw std::invalid_argument("a bandit step requires an action");
    if (*action >= catalog_.num_products) {
      throw std::invalid_argument(
          fmt::format("action {} out of range [0,{})", *action, catalog_.num_products));
    }
    const double p = click_probability(user, *action);
    out.reward = uniform(user.rng) < p;
    out.info["click_probability"] = fmt::format("{:.9g}", p);
  } else {
    const auto dist = organic_view_distribution(user);
    const double u = uniform(user.rng);
    double cumulative = 0.0;
    std::size_t viewed = dist.size() - 1;
    for (std::size_t p = 0; p < dist.size(); ++p) {
      cumulative += dist[p];
      if (u < cumulative) {
        viewed = p;
        break;
      }
    }
    out.observation.push_back(viewed);
  }

  if (config_.sigma_drift > 0.0) {
    std::normal_distribution<double> drift(0.0, config_.sigma_drift);
    for (auto& w : user.omega) w += drift(user.rng);
  }
  ++user.steps;
  out.done = advance_session(user) == Session::Stopped;
  return out;
}

void write_event(std::ostream& out, const EventRecord& event) {
  nlohmann::ordered_json j;
  j["user_id"] = event.user_id;
  j["t"] = event.t;
  j["session"] = to_string(event.session);
  j["action"] = event.action ? nlohmann::ordered_json(*event.action) : nlohmann::ordered_json(nullptr);
  j["reward"] = event.reward ? nlohmann::ordered_json(*event.reward ? 1 : 0) : nlohmann::ordered_json(nullptr);
  j["viewed_product"] =
      event.viewed_product ? nlohmann::ordered_json(*event.viewed_product) : nlohmann::ordered_json(nullptr);
  out << j.dump() << '\n';
}

}  // namespace banditlab
