#pragma once

// Deterministic synthetic populations with controllable demographic skew.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fairrag/demographics.hpp"
#include "fairrag/embedding_store.hpp"
#include "fairrag/error.hpp"
#include "fairrag/rng.hpp"

namespace fairrag {

/// Every (age, gender, skin) combination in lexicographic order.
inline std::vector<IntersectionalGroup> all_groups() {
  std::vector<IntersectionalGroup> out;
  out.reserve(kAgeGroupCount * kGenderCount * kSkinToneCount);
  for (std::size_t a = 0; a < kAgeGroupCount; ++a)
    for (std::size_t g = 0; g < kGenderCount; ++g)
      for (int s = 1; s <= static_cast<int>(kSkinToneCount); ++s)
        out.push_back({static_cast<AgeGroup>(a), static_cast<Gender>(g), SkinTone(s)});
  return out;
}

struct PopulationSpec {
  std::size_t count = 1000;
  std::size_t dim = 64;
  std::vector<std::pair<IntersectionalGroup, double>> group_prior;
  double cluster_noise = 0.05;
  std::uint64_t seed = 0;
  // Optional direction shared by every record (a "concept"); empty for none.
  std::vector<float> shared_direction;
  double centroid_weight = 1.0;
};

struct Population {
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<float> matrix;
  std::vector<Annotation> annotations;
  std::map<IntersectionalGroup, std::vector<float>> centroids;

  /// Consumes the population; rows are already unit-norm.
  EmbeddingStore into_store() && {
    return EmbeddingStore::build(std::move(ids), std::move(matrix), dim, annotations);
  }
};

inline std::vector<float> random_unit_vector(std::size_t dim, Rng& rng, NormalSampler& normal) {
  std::vector<double> v(dim);
  double sq = 0.0;
  do {
    sq = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      sq += x * x;
    }
  } while (sq == 0.0);
  const double inv = 1.0 / std::sqrt(sq);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

inline std::string synthetic_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%07zu", i);
  return buf;
}

inline void validate(const PopulationSpec& spec) {
  if (spec.count < 1) throw Error(ErrorCode::InvalidArgument, "population count must be at least 1");
  if (spec.dim < 2) throw Error(ErrorCode::InvalidArgument, "population dim must be at least 2");
  if (!(spec.cluster_noise >= 0.0)) throw Error(ErrorCode::InvalidArgument, "cluster_noise must be non-negative");
  if (!spec.shared_direction.empty() && spec.shared_direction.size() != spec.dim)
    throw Error(ErrorCode::DimensionMismatch, "shared direction has wrong dimension");
  if (spec.group_prior.empty()) throw Error(ErrorCode::InvalidPrior, "group prior is empty");
  double sum = 0.0;
  std::map<IntersectionalGroup, int> seen;
  for (const auto& [g, p] : spec.group_prior) {
    if (!(p >= 0.0)) throw Error(ErrorCode::InvalidPrior, "negative prior for " + to_string(g));
    if (seen[g]++) throw Error(ErrorCode::InvalidPrior, "group listed twice: " + to_string(g));
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidPrior, "prior sums to " + std::to_string(sum));
}

/// Draws each record's group from the prior and embeds it as
/// normalise(shared + centroid_weight * centroid + cluster_noise * N(0, I)).
inline Population synth_population(const PopulationSpec& spec) {
  validate(spec);
  auto prior = spec.group_prior;
  std::sort(prior.begin(), prior.end());

  Rng rng(spec.seed);
  NormalSampler normal;
  Population pop;
  pop.dim = spec.dim;
  for (const auto& [g, p] : prior) pop.centroids.emplace(g, random_unit_vector(spec.dim, rng, normal));

  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& [g, p] : prior) cumulative.push_back(acc += p);

  pop.ids.reserve(spec.count);
  pop.annotations.reserve(spec.count);
  pop.matrix.resize(spec.count * spec.dim);
  std::vector<double> v(spec.dim);
  for (std::size_t r = 0; r < spec.count; ++r) {
    const double u = uniform01(rng) * acc;
    std::size_t gi = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    gi = std::min(gi, prior.size() - 1);
    const auto& group = prior[gi].first;
    const auto& centroid = pop.centroids.at(group);
    double sq = 0.0;
    for (std::size_t i = 0; i < spec.dim; ++i) {
      double x = spec.centroid_weight * centroid[i] + spec.cluster_noise * normal(rng);
      if (!spec.shared_direction.empty()) x += spec.shared_direction[i];
      v[i] = x;
      sq += x * x;
    }
    const double inv = 1.0 / std::sqrt(sq);
    float* out = pop.matrix.data() + r * spec.dim;
    for (std::size_t i = 0; i < spec.dim; ++i) out[i] = static_cast<float>(v[i] * inv);
    pop.ids.push_back(synthetic_id(r));
    pop.annotations.push_back({pop.ids.back(), group, std::nullopt});
  }
  return pop;
}

/// Prior with `majority_fraction` on one group and the rest spread evenly
/// over the other groups of the universe. A fraction of 0 gives a uniform prior.
inline std::vector<std::pair<IntersectionalGroup, double>> skewed_prior(
    double majority_fraction, const IntersectionalGroup& majority,
    const std::vector<IntersectionalGroup>& universe) {
  if (!(majority_fraction >= 0.0 && majority_fraction < 1.0))
    throw Error(ErrorCode::InvalidFraction, "majority fraction must be in [0,1)");
  std::vector<std::pair<IntersectionalGroup, double>> prior;
  if (majority_fraction == 0.0) {
    for (const auto& g : universe) prior.emplace_back(g, 1.0 / static_cast<double>(universe.size()));
    return prior;
  }
  const double rest = (1.0 - majority_fraction) / static_cast<double>(universe.size() - 1);
  for (const auto& g : universe) prior.emplace_back(g, g == majority ? majority_fraction : rest);
  return prior;
}

inline constexpr IntersectionalGroup kDefaultMajorityGroup{AgeGroup::A30_39, Gender::Male, SkinTone(2)};

struct SkewedPoolOptions {
  IntersectionalGroup majority = kDefaultMajorityGroup;
  std::vector<IntersectionalGroup> universe = all_groups();
  double centroid_weight = 0.5;
  double cluster_noise = 0.05;
};

struct SkewedPool {
  EmbeddingStore store;
  std::vector<float> query;
  std::vector<Candidate> candidates;  // every row, ranked against `query`
  IntersectionalGroup majority;
};

/// Pool where floor(fraction * count) records belong to the majority group
/// and the remainder is dealt round-robin over a seeded shuffle of the
/// other groups. Records share a concept direction, which is the query.
inline SkewedPool synth_skewed_pool(double majority_fraction, std::size_t count, std::size_t dim,
                                    std::uint64_t seed, const SkewedPoolOptions& opt = {}) {
  if (!(majority_fraction > 0.0 && majority_fraction < 1.0))
    throw Error(ErrorCode::InvalidFraction, "majority fraction must be in (0,1)");
  if (count < 1 || dim < 2) throw Error(ErrorCode::InvalidArgument, "pool needs count >= 1 and dim >= 2");
  std::vector<IntersectionalGroup> others;
  for (const auto& g : opt.universe)
    if (g != opt.majority) others.push_back(g);
  if (others.empty()) throw Error(ErrorCode::InvalidArgument, "universe has no minority groups");

  Rng rng(seed);
  NormalSampler normal;
  shuffle(others, rng);
  const auto majority_count = static_cast<std::size_t>(std::floor(majority_fraction * static_cast<double>(count)));
  std::vector<IntersectionalGroup> assignment(majority_count, opt.majority);
  for (std::size_t i = 0; assignment.size() < count; ++i) assignment.push_back(others[i % others.size()]);
  shuffle(assignment, rng);

  const std::vector<float> concept_dir = random_unit_vector(dim, rng, normal);
  std::map<IntersectionalGroup, std::vector<float>> centroids;
  std::vector<IntersectionalGroup> sorted_universe = opt.universe;
  std::sort(sorted_universe.begin(), sorted_universe.end());
  for (const auto& g : sorted_universe) centroids.emplace(g, random_unit_vector(dim, rng, normal));

  std::vector<std::string> ids;
  std::vector<Annotation> meta;
  std::vector<float> matrix(count * dim);
  for (std::size_t r = 0; r < count; ++r) {
    const auto& c = centroids.at(assignment[r]);
    for (std::size_t i = 0; i < dim; ++i)
      matrix[r * dim + i] = static_cast<float>(concept_dir[i] + opt.centroid_weight * c[i] +
                                               opt.cluster_noise * normal(rng));
    ids.push_back(synthetic_id(r));
    meta.push_back({ids.back(), assignment[r], std::nullopt});
  }
  SkewedPool pool{EmbeddingStore::build(std::move(ids), std::move(matrix), dim, meta), concept_dir, {}, opt.majority};
  pool.candidates = top_n(pool.store, pool.query, count, 1);
  return pool;
}

}  // namespace fairrag
