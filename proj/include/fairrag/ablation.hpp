#pragma once

// Monte-Carlo comparison of the selection variants on skewed synthetic stores.
// The original prompt is modelled as a query pulled toward the majority
// group's centroid; the debiased query is pulled toward the mean centroid.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairrag/fair_retrieval.hpp"
#include "fairrag/fixtures.hpp"
#include "fairrag/metrics.hpp"

namespace fairrag {

struct AblationConfig {
  std::size_t store_size = 5000;
  std::size_t dim = 64;
  double majority_fraction = 0.8;
  double query_bias = 0.5;
  double centroid_weight = 0.6;
  double cluster_noise = 0.05;
  std::size_t n = kDefaultTopN;
  int k = static_cast<int>(kDefaultTopK);
  std::size_t seeds = 200;
  std::uint64_t master_seed = 0;
};

struct AblationVariant {
  std::string name;
  bool debiased_query = true;
  bool balanced_sampling = true;
};

inline const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> variants{
      {"plain_top_k", false, false},
      {"no_debiased_query", false, true},
      {"no_balanced_sampling", true, false},
      {"full", true, true},
  };
  return variants;
}

struct AblationRow {
  AblationVariant variant;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Intersectional diversity of the groups in a selection (unannotated rows skipped).
inline double selection_diversity(const SelectionResult& s, const AttributeCardinalities& n = {}) {
  IndexHistogram h;
  h.n_possible = n.intersectional();
  for (const auto& c : s.chosen)
    if (c.group) h.add(static_cast<int>(c.group->flat_index(n)));
  return h.total() == 0 ? 0.0 : diversity(h);
}

inline std::vector<float> normalized_sum(const std::vector<float>& a, const std::vector<double>& b, double wb) {
  std::vector<double> v(a.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    v[i] = a[i] + wb * b[i];
    sq += v[i] * v[i];
  }
  const double inv = 1.0 / std::sqrt(sq);
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

inline std::vector<AblationRow> run_ablation(const AblationConfig& cfg) {
  const auto& variants = ablation_variants();
  std::vector<double> sum(variants.size(), 0.0), sum_sq(variants.size(), 0.0);
  Rng seeder(cfg.master_seed);
  const auto universe = all_groups();

  for (std::size_t trial = 0; trial < cfg.seeds; ++trial) {
    const std::uint64_t pop_seed = seeder();
    const std::uint64_t select_seed = seeder();

    Rng rng(pop_seed);
    NormalSampler normal;
    PopulationSpec spec;
    spec.count = cfg.store_size;
    spec.dim = cfg.dim;
    spec.group_prior = skewed_prior(cfg.majority_fraction, kDefaultMajorityGroup, universe);
    spec.cluster_noise = cfg.cluster_noise;
    spec.centroid_weight = cfg.centroid_weight;
    spec.shared_direction = random_unit_vector(cfg.dim, rng, normal);
    spec.seed = rng();
    Population pop = synth_population(spec);

    std::vector<double> majority_dir(cfg.dim), mean_dir(cfg.dim, 0.0);
    const auto& maj = pop.centroids.at(kDefaultMajorityGroup);
    for (std::size_t i = 0; i < cfg.dim; ++i) majority_dir[i] = maj[i];
    for (const auto& [g, c] : pop.centroids)
      for (std::size_t i = 0; i < cfg.dim; ++i) mean_dir[i] += c[i] / static_cast<double>(pop.centroids.size());
    const auto biased_query = normalized_sum(spec.shared_direction, majority_dir, cfg.query_bias);
    const auto debiased_query = normalized_sum(spec.shared_direction, mean_dir, cfg.query_bias);

    const EmbeddingStore store = std::move(pop).into_store();
    const auto biased_top = top_n(store, biased_query, cfg.n, 1);
    const auto debiased_top = top_n(store, debiased_query, cfg.n, 1);

    for (std::size_t v = 0; v < variants.size(); ++v) {
      const auto& cands = variants[v].debiased_query ? debiased_top : biased_top;
      const auto sel = variants[v].balanced_sampling ? balanced_select(cands, cfg.k, select_seed)
                                                     : plain_top_k(cands, cfg.k, select_seed);
      const double d = selection_diversity(sel);
      sum[v] += d;
      sum_sq[v] += d * d;
    }
  }

  std::vector<AblationRow> rows;
  const double n = static_cast<double>(cfg.seeds);
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const double mean = sum[v] / n;
    const double var = cfg.seeds > 1 ? std::max(0.0, (sum_sq[v] - n * mean * mean) / (n - 1.0)) : 0.0;
    rows.push_back({variants[v], mean, std::sqrt(var)});
  }
  return rows;
}

inline nlohmann::ordered_json to_json(const AblationConfig& cfg, const std::vector<AblationRow>& rows) {
  nlohmann::ordered_json j;
  j["config"] = {{"store_size", cfg.store_size}, {"dim", cfg.dim},
                 {"majority_fraction", cfg.majority_fraction}, {"query_bias", cfg.query_bias},
                 {"n", cfg.n}, {"k", cfg.k}, {"seeds", cfg.seeds}, {"master_seed", cfg.master_seed}};
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows)
    arr.push_back({{"variant", r.variant.name},
                   {"debiased_query", r.variant.debiased_query},
                   {"balanced_sampling", r.variant.balanced_sampling},
                   {"intersectional_diversity_mean", r.mean},
                   {"intersectional_diversity_std", r.stddev}});
  j["variants"] = std::move(arr);
  return j;
}

}  // namespace fairrag
