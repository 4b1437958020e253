#pragma once

// Evaluation kernels: normalised-entropy diversity, the no-face penalty,
// CLIP score aggregation and Fréchet distance between Gaussian feature fits.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairrag/demographics.hpp"
#include "fairrag/error.hpp"

namespace fairrag {

template <class Key>
struct GroupHistogram {
  std::map<Key, std::uint64_t> counts;
  std::size_t n_possible = 0;

  void add(const Key& key, std::uint64_t count = 1) { counts[key] += count; }
  [[nodiscard]] std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& [k, c] : counts) t += c;
    return t;
  }
};

/// Entropy of group proportions divided by the entropy of the uniform
/// distribution over all n_possible groups: 1 when uniform, 0 for a point mass.
template <class Key>
double diversity(const GroupHistogram<Key>& hist) {
  if (hist.n_possible < 2) throw Error(ErrorCode::InvalidArgument, "n_possible must be at least 2");
  const std::uint64_t total = hist.total();
  if (total == 0) throw Error(ErrorCode::EmptyHistogram, "histogram has no counts");
  std::size_t occupied = 0;
  double plogp = 0.0;
  for (const auto& [key, c] : hist.counts) {
    if (c == 0) continue;
    ++occupied;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    plogp += p * std::log(p);
  }
  if (occupied > hist.n_possible)
    throw Error(ErrorCode::InvalidArgument, "histogram has more groups than n_possible");
  const double d = plogp / std::log(1.0 / static_cast<double>(hist.n_possible));
  return std::clamp(d, 0.0, 1.0) + 0.0;
}

using IndexHistogram = GroupHistogram<int>;

/// Histograms for one prompt after penalising images without a face.
struct PenalizedHistograms {
  IndexHistogram intersectional;
  IndexHistogram age;
  IndexHistogram gender;
  IndexHistogram skin;
  std::size_t no_face = 0;
  std::size_t images = 0;
  std::optional<IntersectionalGroup> penalty_group;  // absent when nothing was classified
};

/// Images without a group are counted as the most frequent intersectional
/// group among the classified images (ties: smallest group). The individual
/// histograms are derived from the same reassigned list.
inline PenalizedHistograms apply_no_face_penalty(std::span<const std::optional<IntersectionalGroup>> classified,
                                                 const AttributeCardinalities& n = {}) {
  if (classified.empty()) throw Error(ErrorCode::EmptyList, "no images for prompt");
  PenalizedHistograms h;
  h.intersectional.n_possible = n.intersectional();
  h.age.n_possible = static_cast<std::size_t>(n.age);
  h.gender.n_possible = static_cast<std::size_t>(n.gender);
  h.skin.n_possible = static_cast<std::size_t>(n.skin);
  h.images = classified.size();

  std::map<IntersectionalGroup, std::uint64_t> freq;
  for (const auto& g : classified) {
    if (g) ++freq[*g];
    else ++h.no_face;
  }
  if (freq.empty()) return h;

  auto best = freq.begin();
  for (auto it = freq.begin(); it != freq.end(); ++it)
    if (it->second > best->second) best = it;  // strict: keeps the smallest group on ties
  h.penalty_group = best->first;
  if (h.no_face > 0) best->second += h.no_face;

  for (const auto& [g, c] : freq) {
    h.intersectional.add(static_cast<int>(g.flat_index(n)), c);
    h.age.add(g[Attribute::Age], c);
    h.gender.add(g[Attribute::Gender], c);
    h.skin.add(g[Attribute::Skin], c);
  }
  return h;
}

struct DiversityScores {
  double age = 0.0;
  double gender = 0.0;
  double skin = 0.0;
  double intersectional = 0.0;
};

/// All four scores for one prompt; zero when no image was classified.
inline DiversityScores prompt_diversity(const PenalizedHistograms& h) {
  if (!h.penalty_group) return {};
  return {diversity(h.age), diversity(h.gender), diversity(h.skin), diversity(h.intersectional)};
}

/// Mean raw cosine between each image embedding and the text embedding.
inline double clip_score(std::span<const std::span<const float>> images, std::span<const float> text) {
  if (images.empty()) throw Error(ErrorCode::EmptyList, "no image embeddings");
  detail::require_unit(text, "text embedding", kUnitNormTolerance);
  double sum = 0.0;
  for (const auto& img : images) {
    if (img.size() != text.size())
      throw Error(ErrorCode::DimensionMismatch, "image and text embeddings differ in dimension");
    detail::require_unit(img, "image embedding", kUnitNormTolerance);
    sum += detail::dot(img, text);
  }
  return sum / static_cast<double>(images.size());
}

struct FeatureSetStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t n_samples = 0;
};

/// Mean and unbiased (n-1) covariance of row-major features, symmetrised.
inline FeatureSetStats feature_stats(std::span<const float> rows, std::size_t dim) {
  if (dim == 0 || rows.size() % dim != 0)
    throw Error(ErrorCode::DimensionMismatch, "feature buffer is not a whole number of rows");
  const std::size_t n = rows.size() / dim;
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "need at least two feature vectors");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) x(i, j) = rows[i * dim + j];
  FeatureSetStats s;
  s.n_samples = n;
  s.mean = x.colwise().mean().transpose();
  x.rowwise() -= s.mean.transpose();
  Eigen::MatrixXd c = (x.transpose() * x) / static_cast<double>(n - 1);
  s.cov = 0.5 * (c + c.transpose());
  return s;
}

inline FeatureSetStats feature_stats(const std::vector<std::vector<double>>& features) {
  if (features.size() < 2) throw Error(ErrorCode::TooFewSamples, "need at least two feature vectors");
  const std::size_t dim = features.front().size();
  std::vector<float> flat;
  flat.reserve(features.size() * dim);
  for (const auto& f : features) {
    if (f.size() != dim) throw Error(ErrorCode::DimensionMismatch, "feature vectors differ in dimension");
    for (double v : f) flat.push_back(static_cast<float>(v));
  }
  return feature_stats(flat, dim);
}

inline constexpr double kEigenClampTolerance = 1e-10;

namespace detail {

/// Eigenvalues of a symmetric PSD matrix; small negatives are clamped to 0.
/// The tolerance scales with the largest eigenvalue magnitude.
inline Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> psd_eigen(const Eigen::MatrixXd& m,
                                                                 const char* what,
                                                                 Eigen::VectorXd& clamped) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success)
    throw Error(ErrorCode::NonConvergedEigen, std::string("eigendecomposition of ") + what + " failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  clamped = ev;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -kEigenClampTolerance * scale)
      throw Error(ErrorCode::NegativeEigenvalue,
                  std::string(what) + " has eigenvalue " + std::to_string(ev(i)));
    if (ev(i) < 0.0) clamped(i) = 0.0;
  }
  return es;
}

}  // namespace detail

/// ‖μa−μb‖² + Tr(Σa + Σb − 2 (Σa^½ Σb Σa^½)^½), via symmetric eigendecompositions.
inline double fid(const FeatureSetStats& a, const FeatureSetStats& b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows())
    throw Error(ErrorCode::DimensionMismatch, "feature statistics differ in dimension");
  Eigen::VectorXd ev_a;
  const auto es_a = detail::psd_eigen(a.cov, "covariance A", ev_a);
  const Eigen::MatrixXd sqrt_a =
      es_a.eigenvectors() * ev_a.cwiseSqrt().asDiagonal() * es_a.eigenvectors().transpose();
  Eigen::MatrixXd inner = sqrt_a * b.cov * sqrt_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::VectorXd ev_inner;
  detail::psd_eigen(inner, "sqrt(A) B sqrt(A)", ev_inner);
  Eigen::VectorXd ev_b;
  detail::psd_eigen(b.cov, "covariance B", ev_b);

  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double trace_term = a.cov.trace() + b.cov.trace() - 2.0 * ev_inner.cwiseSqrt().sum();
  return std::max(0.0, mean_term + trace_term);
}

}  // namespace fairrag
