#pragma once

// Debiased query construction, balanced-sampling weights and Top-K selection.
//
// For the set G of unique intersectional groups among annotated candidates,
// m[g[a]] counts how many groups in G share the individual group g[a], and
//
//     w_g = 1 / sum_a ( m[g[a]] / n_a )
//
// so groups built from rare attribute values are drawn more often.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fairrag/demographics.hpp"
#include "fairrag/embedding_store.hpp"
#include "fairrag/error.hpp"
#include "fairrag/rng.hpp"

namespace fairrag {

inline constexpr std::string_view kDebiasSuffix = "with any age, gender, skin tone";
inline constexpr std::size_t kDefaultTopN = 250;
inline constexpr std::size_t kDefaultTopK = 20;

struct DebiasedQuery {
  std::string original;
  std::string debiased_text;
  std::optional<std::vector<float>> embedding;
};

inline DebiasedQuery make_debiased_query(std::string prompt, std::string_view suffix = kDebiasSuffix) {
  if (prompt.empty()) throw Error(ErrorCode::EmptyPrompt, "prompt must not be empty");
  DebiasedQuery q;
  q.debiased_text = suffix.empty() ? prompt : prompt + " " + std::string(suffix);
  q.original = std::move(prompt);
  return q;
}

struct GroupStats {
  std::vector<IntersectionalGroup> groups;        // G, sorted and unique
  std::array<std::map<int, int>, 3> counts;       // per attribute: g[a] -> m
  AttributeCardinalities n;

  [[nodiscard]] int m(const IntersectionalGroup& g, Attribute a) const {
    return counts[static_cast<std::size_t>(a)].at(g[a]);
  }
};

inline GroupStats collect_group_stats(std::span<const IntersectionalGroup> groups,
                                      AttributeCardinalities n = {}) {
  GroupStats stats;
  stats.n = n;
  std::set<IntersectionalGroup> unique(groups.begin(), groups.end());
  stats.groups.assign(unique.begin(), unique.end());
  for (const auto& g : stats.groups)
    for (Attribute a : kAttributes) ++stats.counts[static_cast<std::size_t>(a)][g[a]];
  return stats;
}

using GroupWeights = std::map<IntersectionalGroup, double>;

inline GroupWeights compute_weights(const GroupStats& stats) {
  if (stats.groups.empty()) throw Error(ErrorCode::EmptyGroupSet, "no groups to weight");
  for (Attribute a : kAttributes)
    if (stats.n.of(a) <= 0) throw Error(ErrorCode::InvalidArgument, "attribute cardinality must be positive");
  GroupWeights w;
  for (const auto& g : stats.groups) {
    double s = 0.0;
    for (Attribute a : kAttributes) s += static_cast<double>(stats.m(g, a)) / stats.n.of(a);
    w.emplace(g, 1.0 / s);
  }
  return w;
}

struct SelectionResult {
  std::vector<Candidate> chosen;
  GroupWeights weights;
  std::uint64_t seed = 0;
  std::size_t n_used = 0;
  std::size_t k_requested = 0;
  std::size_t skipped_unannotated = 0;
  bool balanced = true;
  std::string query_text;
};

/// Weighted group sampling with replacement across draws: each draw picks a
/// non-empty group with probability w_g / sum(w) and consumes that group's
/// best remaining candidate. Weights are computed once up front.
inline SelectionResult balanced_select(std::span<const Candidate> candidates, int k,
                                       std::uint64_t seed, AttributeCardinalities n = {}) {
  if (k <= 0) throw Error(ErrorCode::NonPositiveK, "k must be positive");
  SelectionResult result;
  result.seed = seed;
  result.n_used = candidates.size();
  result.k_requested = static_cast<std::size_t>(k);

  std::map<IntersectionalGroup, std::vector<const Candidate*>> buckets;
  std::set<std::size_t> rows;
  for (const Candidate& c : candidates) {
    if (!rows.insert(c.row).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate candidate row " + std::to_string(c.row));
    if (!c.group) {
      ++result.skipped_unannotated;
      continue;
    }
    buckets[*c.group].push_back(&c);
  }
  if (buckets.empty()) throw Error(ErrorCode::NoAnnotatedCandidates, "no candidate carries a group");

  std::vector<IntersectionalGroup> present;
  for (auto& [g, list] : buckets) {
    present.push_back(g);
    std::sort(list.begin(), list.end(),
              [](const Candidate* a, const Candidate* b) { return ranks_before(*a, *b); });
  }
  result.weights = compute_weights(collect_group_stats(present, n));

  struct Pool {
    double weight;
    std::vector<const Candidate*>* list;
    std::size_t next = 0;
  };
  std::vector<Pool> pool;
  for (auto& [g, list] : buckets) pool.push_back({result.weights.at(g), &list});

  Rng rng(seed);
  while (result.chosen.size() < result.k_requested && !pool.empty()) {
    double total = 0.0;
    for (const auto& p : pool) total += p.weight;
    const double u = uniform01(rng) * total;
    std::size_t pick = pool.size() - 1;
    double cumulative = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      cumulative += pool[i].weight;
      if (u < cumulative) {
        pick = i;
        break;
      }
    }
    Pool& p = pool[pick];
    result.chosen.push_back(*(*p.list)[p.next++]);
    if (p.next == p.list->size()) pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return result;
}

/// Similarity-only selection: the first k candidates in ranking order.
inline SelectionResult plain_top_k(std::span<const Candidate> candidates, int k, std::uint64_t seed = 0) {
  if (k <= 0) throw Error(ErrorCode::NonPositiveK, "k must be positive");
  SelectionResult result;
  result.seed = seed;
  result.n_used = candidates.size();
  result.k_requested = static_cast<std::size_t>(k);
  result.balanced = false;
  std::vector<Candidate> ranked(candidates.begin(), candidates.end());
  std::stable_sort(ranked.begin(), ranked.end(), ranks_before);
  ranked.resize(std::min(ranked.size(), result.k_requested));
  result.chosen = std::move(ranked);
  return result;
}

struct RetrievalOptions {
  std::size_t n = kDefaultTopN;
  int k = static_cast<int>(kDefaultTopK);
  std::uint64_t seed = 0;
  bool balanced_sampling = true;
  AttributeCardinalities cardinalities{};
  std::size_t workers = 0;
};

/// Top-N retrieval followed by balanced (or plain) Top-K selection.
inline SelectionResult fair_retrieve(const EmbeddingStore& store, const DebiasedQuery& query,
                                     const RetrievalOptions& opt = {}) {
  if (!query.embedding) throw Error(ErrorCode::InvalidArgument, "query has no embedding");
  if (opt.n == 0) throw Error(ErrorCode::InvalidArgument, "n must be positive");
  const auto candidates = top_n(store, *query.embedding, opt.n, opt.workers);
  SelectionResult r = opt.balanced_sampling
                          ? balanced_select(candidates, opt.k, opt.seed, opt.cardinalities)
                          : plain_top_k(candidates, opt.k, opt.seed);
  r.n_used = opt.n;
  r.query_text = query.debiased_text;
  return r;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::ordered_json candidate_to_json(const Candidate& c) {
  nlohmann::ordered_json j;
  j["id"] = c.id;
  j["row"] = c.row;
  j["score"] = c.score;
  j["group"] = c.group ? to_json(*c.group) : nlohmann::ordered_json(nullptr);
  return j;
}

inline Candidate candidate_from_json(const nlohmann::json& j) {
  Candidate c;
  c.id = j.at("id").get<std::string>();
  c.row = j.at("row").get<std::size_t>();
  c.score = j.at("score").get<double>();
  if (auto it = j.find("group"); it != j.end() && !it->is_null()) c.group = group_from_json(*it);
  return c;
}

inline nlohmann::ordered_json to_json(const SelectionResult& r) {
  nlohmann::ordered_json j;
  j["seed"] = r.seed;
  j["n"] = r.n_used;
  j["k"] = r.k_requested;
  j["skipped_unannotated"] = r.skipped_unannotated;
  j["selection"] = r.balanced ? "balanced" : "top_k";
  j["rng"] = kRngAlgorithm;
  j["query"] = r.query_text;
  auto weights = nlohmann::ordered_json::array();
  for (const auto& [g, w] : r.weights) weights.push_back({{"group", to_json(g)}, {"w", w}});
  j["weights"] = std::move(weights);
  auto chosen = nlohmann::ordered_json::array();
  for (const auto& c : r.chosen) chosen.push_back(candidate_to_json(c));
  j["chosen"] = std::move(chosen);
  return j;
}

inline SelectionResult selection_from_json(const nlohmann::json& j) {
  SelectionResult r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.n_used = j.at("n").get<std::size_t>();
  r.k_requested = j.at("k").get<std::size_t>();
  r.skipped_unannotated = j.value("skipped_unannotated", std::size_t{0});
  r.balanced = j.value("selection", std::string("balanced")) != "top_k";
  r.query_text = j.value("query", std::string());
  for (const auto& w : j.at("weights")) r.weights.emplace(group_from_json(w.at("group")), w.at("w").get<double>());
  for (const auto& c : j.at("chosen")) r.chosen.push_back(candidate_from_json(c));
  return r;
}

}  // namespace fairrag
