#pragma once

// Immutable store of L2-normalised embeddings with row-aligned demographic
// annotations, plus exact brute-force cosine Top-N search.
//
// On disk a store is an FRG1 matrix file and a JSONL sidecar at
// `<path>.jsonl` whose line i describes row i:
//   {"id": str, "age_group": str|null, "gender": "male"|"female"|null,
//    "skin_tone": int|null, "age_years": int|null}

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fairrag/binary_io.hpp"
#include "fairrag/demographics.hpp"
#include "fairrag/error.hpp"

namespace fairrag {

inline constexpr double kRowNormTolerance = 1e-5;

struct Annotation {
  std::string id;
  std::optional<IntersectionalGroup> group;
  std::optional<int> age_years;

  bool operator==(const Annotation&) const = default;
};

struct Candidate {
  std::size_t row = 0;
  std::string id;
  double score = 0.0;
  std::optional<IntersectionalGroup> group;

  bool operator==(const Candidate&) const = default;
};

/// Score-descending order with ascending row as the tie-break.
inline bool ranks_before(const Candidate& a, const Candidate& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  return a.row < b.row;
}

/// Dot product of an f32 row against an f64 query. 32 independent
/// accumulators keep several vector FMA chains in flight; the summation
/// order is fixed, so results do not depend on the build's vector width.
inline double dot_f32_f64(const float* row, const double* query, std::size_t dim) noexcept {
  constexpr std::size_t kLanes = 32;
  double acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= dim; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += static_cast<double>(row[i + l]) * query[i + l];
  double tail = 0.0;
  for (; i < dim; ++i) tail += static_cast<double>(row[i]) * query[i];
  for (std::size_t width = kLanes / 2; width > 0; width /= 2)
    for (std::size_t l = 0; l < width; ++l) acc[l] += acc[l + width];
  return acc[0] + tail;
}

class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  /// Takes ownership of a row-major matrix and normalises each row.
  /// Annotations are joined by id; rows without one get an absent group.
  static EmbeddingStore build(std::vector<std::string> ids, std::vector<float> matrix,
                              std::size_t dim, std::span<const Annotation> annotations = {}) {
    if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "embedding dimension must be positive");
    if (matrix.size() != ids.size() * dim)
      throw Error(ErrorCode::DimensionMismatch, "matrix size does not match ids x dim");
    EmbeddingStore s;
    s.dim_ = dim;
    s.ids_ = std::move(ids);
    s.matrix_ = std::move(matrix);
    s.index_ids();
    for (std::size_t r = 0; r < s.size(); ++r) {
      std::span<float> row(s.matrix_.data() + r * dim, dim);
      double sq = 0.0;
      for (float v : row) {
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "non-finite value in " + s.ids_[r]);
        sq += static_cast<double>(v) * v;
      }
      if (sq == 0.0) throw Error(ErrorCode::ZeroVector, "embedding " + s.ids_[r] + " has zero norm");
      const double inv = 1.0 / std::sqrt(sq);
      for (float& v : row) v = static_cast<float>(v * inv);
    }
    s.meta_.resize(s.size());
    for (std::size_t r = 0; r < s.size(); ++r) s.meta_[r].id = s.ids_[r];
    for (const Annotation& a : annotations) {
      auto it = s.by_id_.find(a.id);
      if (it == s.by_id_.end())
        throw Error(ErrorCode::InvalidArgument, "annotation for unknown id " + a.id);
      s.meta_[it->second] = a;
    }
    return s;
  }

  /// Convenience overload over (id, vector) pairs.
  static EmbeddingStore build(std::span<const std::pair<std::string, std::vector<float>>> rows,
                              std::span<const Annotation> annotations = {}) {
    if (rows.empty()) return build({}, {}, 1, annotations);
    const std::size_t dim = rows.front().second.size();
    std::vector<std::string> ids;
    std::vector<float> matrix;
    ids.reserve(rows.size());
    matrix.reserve(rows.size() * dim);
    for (const auto& [id, v] : rows) {
      if (v.size() != dim)
        throw Error(ErrorCode::DimensionMismatch,
                    "embedding " + id + " has dim " + std::to_string(v.size()) + ", expected " +
                        std::to_string(dim));
      ids.push_back(id);
      matrix.insert(matrix.end(), v.begin(), v.end());
    }
    return build(std::move(ids), std::move(matrix), dim, annotations);
  }

  /// Adopts already-normalised rows (as read from disk) after validating them.
  static EmbeddingStore from_normalized(std::vector<Annotation> meta, std::vector<float> matrix,
                                        std::size_t dim) {
    if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "embedding dimension must be positive");
    if (matrix.size() != meta.size() * dim)
      throw Error(ErrorCode::DimensionMismatch, "matrix size does not match metadata rows");
    EmbeddingStore s;
    s.dim_ = dim;
    s.matrix_ = std::move(matrix);
    s.meta_ = std::move(meta);
    s.ids_.reserve(s.meta_.size());
    for (const auto& m : s.meta_) s.ids_.push_back(m.id);
    s.index_ids();
    for (std::size_t r = 0; r < s.size(); ++r) {
      const float* row = s.matrix_.data() + r * dim;
      double sq = 0.0;
      for (std::size_t i = 0; i < dim; ++i) sq += static_cast<double>(row[i]) * row[i];
      const double norm = std::sqrt(sq);
      if (!(std::abs(norm - 1.0) <= kRowNormTolerance))
        throw Error(ErrorCode::NotNormalized,
                    "row " + std::to_string(r) + " has norm " + std::to_string(norm));
    }
    return s;
  }

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return ids_.size(); }
  [[nodiscard]] bool empty() const noexcept { return ids_.empty(); }
  [[nodiscard]] std::span<const float> matrix() const noexcept { return matrix_; }
  [[nodiscard]] std::span<const float> row(std::size_t r) const {
    return std::span<const float>(matrix_).subspan(r * dim_, dim_);
  }
  [[nodiscard]] const std::string& id(std::size_t r) const { return ids_.at(r); }
  [[nodiscard]] const Annotation& annotation(std::size_t r) const { return meta_.at(r); }
  [[nodiscard]] const std::vector<Annotation>& annotations() const noexcept { return meta_; }

  [[nodiscard]] std::optional<std::size_t> find(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  [[nodiscard]] Candidate candidate(std::size_t r, double score) const {
    return {r, ids_[r], score, meta_[r].group};
  }

 private:
  void index_ids() {
    by_id_.reserve(ids_.size());
    for (std::size_t r = 0; r < ids_.size(); ++r)
      if (!by_id_.emplace(ids_[r], r).second) throw Error(ErrorCode::DuplicateId, "duplicate id " + ids_[r]);
  }

  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> matrix_;
  std::vector<Annotation> meta_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// ---------------------------------------------------------------------------
// Search

namespace detail {

struct Scored {
  double score;
  std::size_t row;
};

// Heap order: the worst-ranked element sits on top.
inline bool scored_better(const Scored& a, const Scored& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  return a.row < b.row;
}

inline void scan_range(const EmbeddingStore& store, const std::vector<double>& query,
                       std::size_t begin, std::size_t end, std::size_t n, std::vector<Scored>& heap) {
  const float* base = store.matrix().data();
  const std::size_t dim = store.dim();
  heap.clear();
  heap.reserve(n + 1);
  constexpr std::size_t kPrefetchRows = 2;
  for (std::size_t r = begin; r < end; ++r) {
#if defined(__GNUC__)
    // Sequential hardware prefetch alone leaves the scan well short of memory bandwidth.
    if (r + kPrefetchRows < end) {
      const char* ahead = reinterpret_cast<const char*>(base + (r + kPrefetchRows) * dim);
      for (std::size_t b = 0; b < dim * sizeof(float); b += 64) __builtin_prefetch(ahead + b);
    }
#endif
    const Scored s{dot_f32_f64(base + r * dim, query.data(), dim), r};
    if (heap.size() < n) {
      heap.push_back(s);
      std::push_heap(heap.begin(), heap.end(), scored_better);
    } else if (scored_better(s, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), scored_better);
      heap.back() = s;
      std::push_heap(heap.begin(), heap.end(), scored_better);
    }
  }
}

}  // namespace detail

/// Exact Top-N by cosine similarity. `workers` = 0 picks the hardware
/// concurrency; any worker count yields the same result.
inline std::vector<Candidate> top_n(const EmbeddingStore& store, std::span<const float> query,
                                    std::size_t n, std::size_t workers = 0) {
  if (store.empty()) throw Error(ErrorCode::EmptyStore, "cannot search an empty store");
  if (query.size() != store.dim())
    throw Error(ErrorCode::DimensionMismatch,
                "query dim " + std::to_string(query.size()) + " != store dim " +
                    std::to_string(store.dim()));
  detail::require_unit(query, "query", kUnitNormTolerance);
  if (n == 0) return {};
  n = std::min(n, store.size());

  const std::vector<double> q(query.begin(), query.end());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  constexpr std::size_t kMinRowsPerWorker = 16384;
  workers = std::clamp<std::size_t>(store.size() / kMinRowsPerWorker, 1, workers);

  std::vector<std::vector<detail::Scored>> partial(workers);
  if (workers == 1) {
    detail::scan_range(store, q, 0, store.size(), n, partial[0]);
  } else {
    std::vector<std::jthread> threads;
    const std::size_t chunk = (store.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(store.size(), w * chunk);
      const std::size_t end = std::min(store.size(), begin + chunk);
      threads.emplace_back([&, w, begin, end] { detail::scan_range(store, q, begin, end, n, partial[w]); });
    }
  }

  std::vector<detail::Scored> merged;
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  std::sort(merged.begin(), merged.end(), detail::scored_better);
  merged.resize(std::min(n, merged.size()));

  std::vector<Candidate> out;
  out.reserve(merged.size());
  for (const auto& s : merged) out.push_back(store.candidate(s.row, s.score));
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline std::filesystem::path sidecar_path(const std::filesystem::path& store_path) {
  return std::filesystem::path(store_path.string() + ".jsonl");
}

inline nlohmann::ordered_json annotation_to_json(const Annotation& a) {
  nlohmann::ordered_json j;
  j["id"] = a.id;
  if (a.group) {
    j["age_group"] = to_string(a.group->age);
    j["gender"] = to_string(a.group->gender);
    j["skin_tone"] = a.group->skin.mst();
  } else {
    j["age_group"] = nullptr;
    j["gender"] = nullptr;
    j["skin_tone"] = nullptr;
  }
  j["age_years"] = a.age_years ? nlohmann::ordered_json(*a.age_years) : nlohmann::ordered_json(nullptr);
  return j;
}

/// Parses one sidecar record. A missing age_group is derived from age_years
/// when present. Either all three attributes resolve or none may be given.
inline Annotation annotation_from_json(const nlohmann::json& j) {
  Annotation a;
  a.id = j.at("id").get<std::string>();
  auto field = [&](const char* key) -> const nlohmann::json* {
    auto it = j.find(key);
    return (it == j.end() || it->is_null()) ? nullptr : &*it;
  };
  if (const auto* years = field("age_years")) {
    a.age_years = years->get<int>();
    if (*a.age_years < 0) throw Error(ErrorCode::Parse, "negative age_years for " + a.id);
  }
  std::optional<AgeGroup> age;
  std::optional<Gender> gender;
  std::optional<SkinTone> skin;
  if (const auto* v = field("age_group")) {
    age = parse_age_group(v->get<std::string>());
    if (!age) throw Error(ErrorCode::Parse, "unknown age_group " + v->dump());
  } else if (a.age_years) {
    age = bucket_age(*a.age_years);
  }
  if (const auto* v = field("gender")) {
    gender = parse_gender(v->get<std::string>());
    if (!gender) throw Error(ErrorCode::Parse, "unknown gender " + v->dump());
  }
  if (const auto* v = field("skin_tone")) {
    const int mst = v->get<int>();
    if (mst < 1 || mst > 10) throw Error(ErrorCode::Parse, "skin_tone out of range for " + a.id);
    skin = SkinTone(mst);
  }
  const bool any_explicit = field("age_group") || gender || skin;
  if (age && gender && skin) {
    a.group = IntersectionalGroup{*age, *gender, *skin};
  } else if (any_explicit) {
    throw Error(ErrorCode::Parse, "partial demographic annotation for " + a.id);
  }
  return a;
}

/// Reads a JSONL file of annotations; errors name the 1-based line.
inline std::vector<Annotation> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<Annotation> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(annotation_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline void write_annotations(const std::filesystem::path& path, std::span<const Annotation> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  for (const auto& a : rows) out << annotation_to_json(a).dump() << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

inline void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  io::write_matrix(path, static_cast<std::uint32_t>(store.dim()), store.size(), store.matrix());
  write_annotations(sidecar_path(path), store.annotations());
}

inline EmbeddingStore load_store(const std::filesystem::path& path) {
  io::Matrix m = io::read_matrix(path);
  std::vector<Annotation> meta = read_annotations(sidecar_path(path));
  if (meta.size() != m.count)
    throw Error(ErrorCode::Parse, sidecar_path(path).string() + " has " + std::to_string(meta.size()) +
                                      " rows, matrix has " + std::to_string(m.count));
  return EmbeddingStore::from_normalized(std::move(meta), std::move(m.data), m.dim);
}

}  // namespace fairrag
