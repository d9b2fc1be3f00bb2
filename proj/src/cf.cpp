#include "banditlab/cf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "banditlab/errors.hpp"

namespace banditlab {

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Ctr: return "ctr";
    case FeatureKind::ViewProbability: return "view";
    case FeatureKind::Combined: return "combined";
  }
  return "unknown";
}

void ReferenceRecord::refresh_profiles() {
  const std::size_t P = displays.size();
  if (clicks.size() != P || views.size() != P) {
    throw std::invalid_argument("reference record count vectors differ in length");
  }
  ctr.assign(P, 0.0);
  view_prob.assign(P, 0.0);
  std::uint64_t total_views = 0;
  for (auto v : views) total_views += v;
  for (std::size_t p = 0; p < P; ++p) {
    if (displays[p] > 0) ctr[p] = static_cast<double>(clicks[p]) / static_cast<double>(displays[p]);
    if (total_views > 0) view_prob[p] = static_cast<double>(views[p]) / static_cast<double>(total_views);
  }
}

FeatureVector reference_features(const ReferenceRecord& record, FeatureKind kind, double theta) {
  switch (kind) {
    case FeatureKind::Ctr: return record.ctr;
    case FeatureKind::ViewProbability: return record.view_prob;
    case FeatureKind::Combined: {
      FeatureVector f(record.ctr.size());
      for (std::size_t p = 0; p < f.size(); ++p) f[p] = record.ctr[p] + theta * record.view_prob[p];
      return f;
    }
  }
  return {};
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument(fmt::format("cosine_similarity length mismatch: {} vs {}", u.size(), v.size()));
  }
  double uv = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

std::vector<Neighbor> select_top_n(std::span<const double> similarities,
                                   std::span<const std::uint64_t> ids, std::size_t n) {
  if (similarities.empty()) throw ReferenceSetError("reference set is empty; generate one with gen-refset");
  if (ids.size() != similarities.size()) throw std::invalid_argument("select_top_n: ids and similarities differ in length");
  if (n == 0) throw std::invalid_argument("select_top_n: N must be >= 1");

  std::vector<Neighbor> all(similarities.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = {i, similarities[i]};
  const std::size_t keep = std::min(n, all.size());
  // Similarities are compared on a 1e-12 grid so that mathematically equal
  // values differing by rounding still tie and fall back to the id order.
  std::vector<long long> key(similarities.size());
  for (std::size_t i = 0; i < key.size(); ++i) key[i] = std::llround(similarities[i] / kSimilarityTieTolerance);
  auto better = [&](const Neighbor& a, const Neighbor& b) {
    if (key[a.index] != key[b.index]) return key[a.index] > key[b.index];
    return ids[a.index] < ids[b.index];
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), better);
  all.resize(keep);
  return all;
}

std::vector<Neighbor> select_top_n(std::span<const double> target, std::span<const ReferenceRecord> refs,
                                   std::size_t n, FeatureKind kind, double theta) {
  std::vector<double> sims(refs.size());
  std::vector<std::uint64_t> ids(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    sims[i] = cosine_similarity(target, reference_features(refs[i], kind, theta));
    ids[i] = refs[i].ref_user_id;
  }
  return select_top_n(sims, ids, n);
}

FeatureVector weighted_estimate(std::span<const Neighbor> neighbors,
                                std::span<const std::span<const double>> rows) {
  if (neighbors.empty()) throw std::invalid_argument("weighted_estimate needs at least one neighbor");
  const std::size_t P = rows[neighbors.front().index].size();
  FeatureVector out(P, 0.0);
  double weight_sum = 0.0;
  for (const auto& nb : neighbors) weight_sum += nb.similarity;

  const bool unweighted = weight_sum == 0.0;
  for (const auto& nb : neighbors) {
    const auto row = rows[nb.index];
    const double w = unweighted ? 1.0 : nb.similarity;
    for (std::size_t p = 0; p < P; ++p) out[p] += w * row[p];
  }
  const double norm = unweighted ? static_cast<double>(neighbors.size()) : weight_sum;
  for (auto& x : out) x /= norm;
  return out;
}

FeatureVector estimate_features(std::span<const Neighbor> neighbors, std::span<const ReferenceRecord> refs,
                                FeatureKind value_kind) {
  std::vector<std::span<const double>> rows(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    rows[i] = value_kind == FeatureKind::ViewProbability ? std::span<const double>(refs[i].view_prob)
                                                         : std::span<const double>(refs[i].ctr);
  }
  return weighted_estimate(neighbors, rows);
}

}  // namespace banditlab
