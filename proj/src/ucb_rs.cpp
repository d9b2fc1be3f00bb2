#include "banditlab/ucb_rs.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "banditlab/errors.hpp"

namespace banditlab {

FeatureKind feature_kind(UcbRsVariant variant) {
  switch (variant) {
    case UcbRsVariant::CtrFeatures: return FeatureKind::Ctr;
    case UcbRsVariant::ViewFeatures: return FeatureKind::ViewProbability;
    case UcbRsVariant::Combined: return FeatureKind::Combined;
  }
  return FeatureKind::Ctr;
}

void UserStats::record_display(std::size_t product, bool click) {
  if (product >= displays.size()) throw std::out_of_range(fmt::format("product {} out of range", product));
  ++displays[product];
  if (click) ++clicks[product];
  ++t;
}

void UserStats::record_view(std::size_t product) {
  if (product >= views.size()) throw std::out_of_range(fmt::format("product {} out of range", product));
  ++views[product];
  ++total_views;
}

FeatureVector UserStats::ctr_vector() const {
  FeatureVector f(num_products());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = ctr(i);
  return f;
}

FeatureVector UserStats::view_vector() const {
  FeatureVector f(num_products());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = view_probability(i);
  return f;
}

void UcbRsConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError(fmt::format("lambda must be in [0,1], got {}", lambda));
  if (!(theta >= 0.0)) throw ConfigError(fmt::format("theta must be >= 0, got {}", theta));
  if (!(alpha > 0.0)) throw ConfigError(fmt::format("alpha must be > 0, got {}", alpha));
  if (top_n < 1) throw ConfigError("top_n must be >= 1");
  if (horizon < 2) throw ConfigError(fmt::format("horizon must be >= 2, got {}", horizon));
}

FeatureVector build_features(const UserStats& stats, UcbRsVariant variant, double theta) {
  switch (variant) {
    case UcbRsVariant::CtrFeatures: return stats.ctr_vector();
    case UcbRsVariant::ViewFeatures: return stats.view_vector();
    case UcbRsVariant::Combined: {
      FeatureVector f(stats.num_products());
      for (std::size_t i = 0; i < f.size(); ++i) f[i] = stats.ctr(i) + theta * stats.view_probability(i);
      return f;
    }
  }
  return {};
}

std::vector<double> estimate_mean_reward(std::span<const double> instant, std::span<const double> estimate,
                                         double lambda) {
  if (instant.size() != estimate.size()) throw std::invalid_argument("estimate_mean_reward length mismatch");
  std::vector<double> out(instant.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = lambda * instant[i] + (1.0 - lambda) * estimate[i];
  return out;
}

double warm_start_bonus(double alpha, double horizon) { return std::sqrt(alpha * std::log(horizon)); }

double explored_bonus(std::uint64_t displays, double t, double alpha) {
  return std::sqrt(alpha * std::log(std::max(t, 1.0)) / static_cast<double>(displays));
}

double confidence_interval(std::uint64_t displays, std::uint64_t t, double alpha, std::uint64_t horizon) {
  if (displays == 0) return warm_start_bonus(alpha, static_cast<double>(horizon));
  return explored_bonus(displays, static_cast<double>(t), alpha);
}

ReferenceIndex::ReferenceIndex(std::shared_ptr<const std::vector<ReferenceRecord>> refs, FeatureKind kind,
                               double theta)
    : refs_(std::move(refs)), kind_(kind), theta_(theta) {
  if (!refs_ || refs_->empty()) {
    throw ReferenceSetError("reference set is empty; generate one with gen-refset");
  }
  products_ = refs_->front().num_products();
  features_.reserve(refs_->size() * products_);
  for (const auto& r : *refs_) {
    if (r.num_products() != products_ || r.view_prob.size() != products_) {
      throw ReferenceSetError("reference records have inconsistent product counts");
    }
    const auto f = reference_features(r, kind_, theta_);
    features_.insert(features_.end(), f.begin(), f.end());
    norms_.push_back(std::sqrt(std::inner_product(f.begin(), f.end(), f.begin(), 0.0)));
    ids_.push_back(r.ref_user_id);
    ctr_rows_.emplace_back(r.ctr);
    view_rows_.emplace_back(r.view_prob);
  }
}

std::vector<double> ReferenceIndex::similarities(std::span<const double> target) const {
  if (target.size() != products_) {
    throw std::invalid_argument(fmt::format("target has {} products, reference set has {}", target.size(), products_));
  }
  const double target_norm = std::sqrt(std::inner_product(target.begin(), target.end(), target.begin(), 0.0));
  std::vector<double> sims(size(), 0.0);
  if (target_norm == 0.0) return sims;
  for (std::size_t r = 0; r < sims.size(); ++r) {
    if (norms_[r] == 0.0) continue;
    const double* row = features_.data() + r * products_;
    double dot = 0.0;
    for (std::size_t p = 0; p < products_; ++p) dot += target[p] * row[p];
    sims[r] = dot / (target_norm * norms_[r]);
  }
  return sims;
}

UcbRsScores score_ucb_rs(const UserStats& stats, const ReferenceIndex& index, const UcbRsConfig& config, Rng& rng) {
  if (index.size() == 0) throw ReferenceSetError("reference set is empty; generate one with gen-refset");
  if (stats.num_products() != index.num_products()) {
    throw std::invalid_argument(fmt::format("user has {} products, reference set has {}", stats.num_products(),
                                            index.num_products()));
  }
  if (index.kind() != feature_kind(config.variant) ||
      (index.kind() == FeatureKind::Combined && index.theta() != config.theta)) {
    throw std::invalid_argument("reference index was built for a different feature kind");
  }

  UcbRsScores s;
  const auto features = build_features(stats, config.variant, config.theta);
  const auto sims = index.similarities(features);
  if (stats.is_new()) {
    std::vector<std::size_t> all(index.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> picked;
    std::sample(all.begin(), all.end(), std::back_inserter(picked), std::min(config.top_n, all.size()), rng);
    for (auto i : picked) s.neighbors.push_back({i, sims[i]});
  } else {
    s.neighbors = select_top_n(sims, index.ids(), config.top_n);
  }

  s.ctr_estimate = weighted_estimate(s.neighbors, index.ctr_rows());
  const auto instant_ctr = stats.ctr_vector();
  if (config.variant == UcbRsVariant::Combined) {
    s.view_estimate = weighted_estimate(s.neighbors, index.view_rows());
    const std::size_t P = stats.num_products();
    std::vector<double> combined(P);
    for (std::size_t i = 0; i < P; ++i) {
      combined[i] = config.lambda * (instant_ctr[i] + config.theta * stats.view_probability(i)) +
                    (1.0 - config.lambda) * (s.ctr_estimate[i] + config.theta * s.view_estimate[i]);
    }
    s.mean_estimate = config.blend == CombinedBlend::Direct
                          ? std::move(combined)
                          : estimate_mean_reward(instant_ctr, combined, config.lambda);
  } else {
    s.mean_estimate = estimate_mean_reward(instant_ctr, s.ctr_estimate, config.lambda);
  }

  s.bonus.resize(stats.num_products());
  s.upper.resize(stats.num_products());
  for (std::size_t i = 0; i < s.upper.size(); ++i) {
    s.bonus[i] = confidence_interval(stats.displays[i], stats.t, config.alpha, config.horizon);
    s.upper[i] = s.mean_estimate[i] + s.bonus[i];
  }
  return s;
}

std::size_t act_ucb_rs(const UserStats& stats, const ReferenceIndex& index, const UcbRsConfig& config, Rng& rng) {
  const auto scores = score_ucb_rs(stats, index, config, rng);
  return argmax(scores.upper, config.tie_break, &rng);
}

std::size_t act_ucb_rs(const UserStats& stats, std::shared_ptr<const std::vector<ReferenceRecord>> refs,
                       const UcbRsConfig& config, Rng& rng) {
  if (!refs || refs->empty()) throw ReferenceSetError("reference set is empty; generate one with gen-refset");
  const ReferenceIndex index(std::move(refs), feature_kind(config.variant), config.theta);
  return act_ucb_rs(stats, index, config, rng);
}

UcbRsAgent::UcbRsAgent(std::shared_ptr<const ReferenceIndex> index, const UcbRsConfig& config)
    : index_(std::move(index)), config_(config), rng_(config.seed) {
  config_.validate();
  if (!index_) throw ReferenceSetError("UCB-RS agent needs a reference set; generate one with gen-refset");
  stats_ = UserStats(index_->num_products());
}

std::size_t UcbRsAgent::act() { return act_ucb_rs(stats_, *index_, config_, rng_); }

}  // namespace banditlab
