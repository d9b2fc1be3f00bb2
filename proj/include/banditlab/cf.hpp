#pragma once

// User-user collaborative filtering over per-product feature vectors.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace banditlab {

using FeatureVector = std::vector<double>;

// Which per-product profile a feature vector is built from. Combined is
// ctr + theta * view_probability.
enum class FeatureKind { Ctr, ViewProbability, Combined };

std::string_view to_string(FeatureKind kind);

// Profile of one historical user. Counts are kept so profiles can be
// recomputed exactly after a file round-trip.
struct ReferenceRecord {
  std::uint64_t ref_user_id = 0;
  std::uint64_t total_events = 0;
  std::uint64_t total_clicks = 0;
  std::vector<std::uint32_t> displays;
  std::vector<std::uint32_t> clicks;
  std::vector<std::uint32_t> views;
  FeatureVector ctr;        // clicks / displays, 0 where undisplayed
  FeatureVector view_prob;  // views / total views, all 0 without organic views

  std::size_t num_products() const { return ctr.size(); }

  // Recomputes ctr and view_prob from the counts.
  void refresh_profiles();

  friend bool operator==(const ReferenceRecord&, const ReferenceRecord&) = default;
};

FeatureVector reference_features(const ReferenceRecord& record, FeatureKind kind, double theta = 0.0);

// <u,v> / (|u| |v|), or 0 when either vector is all zeros.
// Throws std::invalid_argument on a length mismatch.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

struct Neighbor {
  std::size_t index = 0;  // position in the reference sequence
  double similarity = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

inline constexpr double kSimilarityTieTolerance = 1e-12;

// The min(n, size) entries with the largest similarity; similarities equal to
// within kSimilarityTieTolerance are ordered by ascending id. Throws
// ReferenceSetError when empty.
std::vector<Neighbor> select_top_n(std::span<const double> similarities,
                                   std::span<const std::uint64_t> ids, std::size_t n);

std::vector<Neighbor> select_top_n(std::span<const double> target, std::span<const ReferenceRecord> refs,
                                   std::size_t n, FeatureKind kind, double theta = 0.0);

// Similarity-weighted mean of the neighbors' rows; the unweighted mean
// when the similarities sum to zero.
FeatureVector weighted_estimate(std::span<const Neighbor> neighbors,
                                std::span<const std::span<const double>> rows);

// Estimate of the target's profile of `value_kind` (Ctr or ViewProbability).
FeatureVector estimate_features(std::span<const Neighbor> neighbors, std::span<const ReferenceRecord> refs,
                                FeatureKind value_kind);

}  // namespace banditlab
