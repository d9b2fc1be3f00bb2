#pragma once

// UCB with a collaborative-filtering estimate of the mean reward and a
// warming-start bonus for never-played arms.
//
// Per bandit step:
//   1. Build the user's instant feature vector (CTR, view probability, or
//      CTR + theta * view probability depending on the variant).
//   2. Pick the top-N most cosine-similar reference users (N random
//      references for a user with no history at all).
//   3. mu_hat = similarity-weighted mean of their CTR profiles.
//   4. mu_tilde = lambda * instant CTR + (1 - lambda) * mu_hat.
//   5. U_i = mu_tilde_i + xi_i with xi_i = sqrt(alpha ln T) for unplayed arms
//      and sqrt(alpha ln t / N_i) otherwise; play argmax U.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "banditlab/agents.hpp"
#include "banditlab/cf.hpp"
#include "banditlab/rng.hpp"

namespace banditlab {

enum class UcbRsVariant { CtrFeatures = 1, ViewFeatures = 2, Combined = 3 };

// How the combined variant forms its mean estimate:
//  Direct: mu_tilde = lambda (chi + theta nu) + (1 - lambda) (chi_hat + theta nu_hat)
//  Nested: the Direct value is used as mu_hat and blended again with lambda.
enum class CombinedBlend { Direct, Nested };

FeatureKind feature_kind(UcbRsVariant variant);

struct UserStats {
  std::vector<std::uint64_t> displays;
  std::vector<std::uint64_t> clicks;
  std::vector<std::uint64_t> views;
  std::uint64_t t = 0;            // bandit steps
  std::uint64_t total_views = 0;  // organic views

  UserStats() = default;
  explicit UserStats(std::size_t products)
      : displays(products, 0), clicks(products, 0), views(products, 0) {}

  std::size_t num_products() const { return displays.size(); }
  bool is_new() const { return t == 0 && total_views == 0; }

  void record_display(std::size_t product, bool click);
  void record_view(std::size_t product);

  // chi_i: 0 for undisplayed products.
  double ctr(std::size_t i) const {
    return displays[i] == 0 ? 0.0 : static_cast<double>(clicks[i]) / static_cast<double>(displays[i]);
  }
  // nu_i = V_i / max(1, V).
  double view_probability(std::size_t i) const {
    return static_cast<double>(views[i]) / static_cast<double>(std::max<std::uint64_t>(1, total_views));
  }
  FeatureVector ctr_vector() const;
  FeatureVector view_vector() const;
};

struct UcbRsConfig {
  UcbRsVariant variant = UcbRsVariant::Combined;
  double lambda = 0.5;
  double theta = 10.0;
  double alpha = 2.0;
  std::size_t top_n = 15;
  std::uint64_t horizon = 10000;
  CombinedBlend blend = CombinedBlend::Direct;
  TieBreak tie_break = TieBreak::UniformRandom;
  std::uint64_t seed = 0;

  void validate() const;
};

FeatureVector build_features(const UserStats& stats, UcbRsVariant variant, double theta = 0.0);

// lambda * instant + (1 - lambda) * estimate, elementwise.
std::vector<double> estimate_mean_reward(std::span<const double> instant, std::span<const double> estimate,
                                         double lambda);

// sqrt(alpha ln T): the bonus of a never-played arm.
double warm_start_bonus(double alpha, double horizon);
// sqrt(alpha ln t / N) for N >= 1.
double explored_bonus(std::uint64_t displays, double t, double alpha);

double confidence_interval(std::uint64_t displays, std::uint64_t t, double alpha, std::uint64_t horizon);

// Reference feature rows precomputed for one feature kind; shared read-only
// by every agent in an experiment cell.
class ReferenceIndex {
 public:
  ReferenceIndex(std::shared_ptr<const std::vector<ReferenceRecord>> refs, FeatureKind kind, double theta);

  std::span<const ReferenceRecord> records() const { return *refs_; }
  std::size_t size() const { return refs_->size(); }
  std::size_t num_products() const { return products_; }
  FeatureKind kind() const { return kind_; }
  double theta() const { return theta_; }
  std::span<const std::uint64_t> ids() const { return ids_; }

  std::vector<double> similarities(std::span<const double> target) const;
  std::span<const std::span<const double>> ctr_rows() const { return ctr_rows_; }
  std::span<const std::span<const double>> view_rows() const { return view_rows_; }

 private:
  std::shared_ptr<const std::vector<ReferenceRecord>> refs_;
  FeatureKind kind_;
  double theta_;
  std::size_t products_ = 0;
  std::vector<double> features_;  // size() x products_, row-major
  std::vector<double> norms_;
  std::vector<std::uint64_t> ids_;
  std::vector<std::span<const double>> ctr_rows_;
  std::vector<std::span<const double>> view_rows_;
};

// Every intermediate of one decision, for inspection and tests.
struct UcbRsScores {
  std::vector<Neighbor> neighbors;
  FeatureVector ctr_estimate;   // chi_hat
  FeatureVector view_estimate;  // nu_hat, combined variant only
  std::vector<double> mean_estimate;  // mu_tilde
  std::vector<double> bonus;          // xi
  std::vector<double> upper;          // U
};

// `rng` is used only for the new-user random neighbor draw.
UcbRsScores score_ucb_rs(const UserStats& stats, const ReferenceIndex& index, const UcbRsConfig& config, Rng& rng);

std::size_t act_ucb_rs(const UserStats& stats, const ReferenceIndex& index, const UcbRsConfig& config, Rng& rng);

// Builds a throwaway index; convenient for one-off calls.
std::size_t act_ucb_rs(const UserStats& stats, std::shared_ptr<const std::vector<ReferenceRecord>> refs,
                       const UcbRsConfig& config, Rng& rng);

class UcbRsAgent final : public Agent {
 public:
  UcbRsAgent(std::shared_ptr<const ReferenceIndex> index, const UcbRsConfig& config);

  std::size_t act() override;
  void observe_reward(std::size_t arm, bool click) override { stats_.record_display(arm, click); }
  void observe_view(std::size_t product) override { stats_.record_view(product); }
  const UserStats& stats() const { return stats_; }

 private:
  std::shared_ptr<const ReferenceIndex> index_;
  UcbRsConfig config_;
  UserStats stats_;
  Rng rng_;
};

}  // namespace banditlab
