#include <gtest/gtest.h>

#include <random>

#include "fairrag/metrics.hpp"

using namespace fairrag;

namespace {

IntersectionalGroup G(AgeGroup a, Gender g, int s) { return {a, g, SkinTone(s)}; }

// Independent formulation: 1 - H(p) / ln n with base-2 logs.
double diversity_oracle(const std::vector<std::uint64_t>& counts, std::size_t n_possible) {
  long double total = 0, h = 0;
  for (auto c : counts) total += c;
  for (auto c : counts)
    if (c) {
      const long double p = c / total;
      h -= p * std::log2(p);
    }
  return double(h / std::log2((long double)n_possible));
}

IndexHistogram hist(const std::vector<std::uint64_t>& counts, std::size_t n_possible) {
  IndexHistogram h;
  h.n_possible = n_possible;
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (counts[i]) h.add(int(i), counts[i]);
  return h;
}

FeatureSetStats diag_stats(std::vector<double> mean, std::vector<double> var) {
  FeatureSetStats s;
  const auto d = Eigen::Index(mean.size());
  s.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), d);
  s.cov = Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(var.data(), d)).asDiagonal();
  s.n_samples = 2;
  return s;
}

FeatureSetStats random_stats(std::mt19937_64& gen, std::size_t d) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = nd(gen);
  FeatureSetStats s;
  s.mean = Eigen::VectorXd(d);
  for (auto& x : s.mean) x = nd(gen);
  s.cov = a * a.transpose() / double(d);
  s.n_samples = d + 1;
  return s;
}

}  // namespace

TEST(Diversity, Examples) {
  EXPECT_NEAR(diversity(hist({5, 5, 5, 5}, 4)), 1.0, 1e-12);
  EXPECT_EQ(diversity(hist({20}, 6)), 0.0);
  EXPECT_NEAR(diversity(hist({3, 1}, 2)), 0.811278, 1e-6);
  EXPECT_NEAR(diversity(hist({10, 10}, 4)), 0.5, 1e-12);
}

TEST(Diversity, Errors) {
  EXPECT_THROW(diversity(hist({}, 4)), Error);
  EXPECT_THROW(diversity(hist({1}, 1)), Error);
  EXPECT_THROW(diversity(hist({1, 1, 1}, 2)), Error);
}

TEST(Diversity, MatchesOracleOnRandomHistograms) {
  std::mt19937_64 gen(11);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + gen() % 119;
    std::vector<std::uint64_t> counts(n);
    const std::size_t used = 1 + gen() % n;
    for (std::size_t i = 0; i < used; ++i) counts[gen() % n] += 1 + gen() % 50;
    const double d = diversity(hist(counts, n));
    ASSERT_NEAR(d, diversity_oracle(counts, n), 1e-9);
    ASSERT_GE(d, 0.0);
    ASSERT_LE(d, 1.0);
  }
}

TEST(Diversity, ScaleAndPermutationInvariance) {
  std::mt19937_64 gen(12);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + gen() % 30;
    std::vector<std::uint64_t> counts(n);
    for (auto& c : counts) c = gen() % 7;
    counts[0] += 1;
    auto scaled = counts;
    for (auto& c : scaled) c *= 13;
    auto perm = counts;
    std::shuffle(perm.begin(), perm.end(), gen);
    const double d = diversity(hist(counts, n));
    ASSERT_NEAR(d, diversity(hist(scaled, n)), 1e-12);
    ASSERT_NEAR(d, diversity(hist(perm, n)), 1e-12);
  }
}

TEST(Diversity, MovingMassToLargerGroupLowersScore) {
  std::mt19937_64 gen(13);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 3 + gen() % 20;
    std::vector<std::uint64_t> counts(n);
    for (auto& c : counts) c = 1 + gen() % 10;
    auto big = std::max_element(counts.begin(), counts.end()) - counts.begin();
    auto small = std::min_element(counts.begin(), counts.end()) - counts.begin();
    if (big == small) continue;
    auto moved = counts;
    moved[small] -= 1;
    moved[big] += 1;
    ASSERT_LT(diversity(hist(moved, n)), diversity(hist(counts, n)));
  }
}

TEST(Penalty, Examples) {
  const auto a = G(AgeGroup::A20_29, Gender::Male, 2);
  const auto b = G(AgeGroup::A40_49, Gender::Female, 7);
  std::vector<std::optional<IntersectionalGroup>> imgs{a, a, b, std::nullopt};
  const auto h = apply_no_face_penalty(imgs);
  EXPECT_EQ(h.no_face, 1u);
  EXPECT_EQ(h.images, 4u);
  EXPECT_EQ(h.penalty_group, a);
  EXPECT_EQ(h.intersectional.counts.at(int(a.flat_index({}))), 3u);
  EXPECT_EQ(h.gender.counts.at(0), 3u);
  EXPECT_EQ(h.intersectional.total(), 4u);

  // tie: the smaller group absorbs the missing face
  std::vector<std::optional<IntersectionalGroup>> tie{b, a, std::nullopt};
  EXPECT_EQ(apply_no_face_penalty(tie).penalty_group, std::min(a, b));

  std::vector<std::optional<IntersectionalGroup>> none{std::nullopt, std::nullopt};
  const auto z = prompt_diversity(apply_no_face_penalty(none));
  EXPECT_EQ(z.age, 0.0);
  EXPECT_EQ(z.intersectional, 0.0);
  EXPECT_THROW(apply_no_face_penalty({}), Error);
}

TEST(Penalty, NeverRaisesDiversity) {
  std::mt19937_64 gen(14);
  for (int t = 0; t < 300; ++t) {
    std::vector<std::optional<IntersectionalGroup>> imgs;
    const int n = 1 + int(gen() % 30);
    for (int i = 0; i < n; ++i)
      imgs.push_back(G(static_cast<AgeGroup>(gen() % 6), static_cast<Gender>(gen() % 2), 1 + int(gen() % 10)));
    const auto base = prompt_diversity(apply_no_face_penalty(imgs));
    imgs.push_back(std::nullopt);
    const auto pen = prompt_diversity(apply_no_face_penalty(imgs));
    ASSERT_LE(pen.intersectional, base.intersectional + 1e-12);
  }
}

TEST(ClipScore, Examples) {
  const std::vector<float> t{1, 0};
  const std::vector<float> i1{1, 0}, i2{0, 1}, i3{0.6f, 0.8f};
  std::vector<std::span<const float>> imgs{i1};
  EXPECT_NEAR(clip_score(imgs, t), 1.0, 1e-12);
  imgs = {i1, i2};
  EXPECT_NEAR(clip_score(imgs, t), 0.5, 1e-12);
  imgs = {i3};
  EXPECT_NEAR(clip_score(imgs, t), 0.6, 1e-7);
  EXPECT_THROW(clip_score({}, t), Error);
  const std::vector<float> unnorm{2, 0};
  imgs = {unnorm};
  EXPECT_THROW(clip_score(imgs, t), Error);
}

TEST(FeatureStats, Examples) {
  const auto s = feature_stats({{0.0}, {2.0}});
  EXPECT_DOUBLE_EQ(s.mean(0), 1.0);
  EXPECT_DOUBLE_EQ(s.cov(0, 0), 2.0);
  const auto z = feature_stats({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}});
  EXPECT_DOUBLE_EQ(z.cov.norm(), 0.0);
  try {
    feature_stats({{1.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewSamples);
  }
}

TEST(Fid, Examples) {
  const auto a = diag_stats({0}, {1});
  const auto b = diag_stats({1}, {1});
  EXPECT_NEAR(fid(a, b), 1.0, 1e-9);
  EXPECT_NEAR(fid(a, a), 0.0, 1e-12);
  // diag(1,4) vs diag(4,1): 5 + 5 - 2 (2 + 2) = 2
  EXPECT_NEAR(fid(diag_stats({0, 0}, {1, 4}), diag_stats({0, 0}, {4, 1})), 2.0, 1e-9);
}

TEST(Fid, DiagonalClosedForm) {
  std::mt19937_64 gen(15);
  std::uniform_real_distribution<double> u(0.0, 3.0), m(-2.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 1 + gen() % 32;
    std::vector<double> ma(d), mb(d), va(d), vb(d);
    double expected = 0;
    for (std::size_t i = 0; i < d; ++i) {
      ma[i] = m(gen);
      mb[i] = m(gen);
      va[i] = u(gen);
      vb[i] = u(gen);
      expected += (ma[i] - mb[i]) * (ma[i] - mb[i]) + std::pow(std::sqrt(va[i]) - std::sqrt(vb[i]), 2);
    }
    ASSERT_NEAR(fid(diag_stats(ma, va), diag_stats(mb, vb)), expected, 1e-6);
  }
}

TEST(Fid, SymmetricAndSelfZero) {
  std::mt19937_64 gen(16);
  for (std::size_t d : {1u, 2u, 5u, 16u, 64u}) {
    const auto a = random_stats(gen, d), b = random_stats(gen, d);
    EXPECT_NEAR(fid(a, b), fid(b, a), 1e-6) << d;
    EXPECT_LE(fid(a, a), 1e-8) << d;
    EXPECT_GE(fid(a, b), 0.0);
  }
}

TEST(Fid, FromSamples) {
  // Rank-deficient covariance (n < d) still works.
  std::mt19937_64 gen(17);
  std::normal_distribution<float> nd;
  std::vector<float> x(5 * 8), y(5 * 8);
  for (auto& v : x) v = nd(gen);
  for (auto& v : y) v = nd(gen);
  const auto sx = feature_stats(x, 8), sy = feature_stats(y, 8);
  EXPECT_LE(fid(sx, sx), 1e-8);
  EXPECT_GT(fid(sx, sy), 0.0);
}

TEST(Fid, Errors) {
  auto bad = diag_stats({0, 0}, {1, -1});
  try {
    fid(bad, diag_stats({0, 0}, {1, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NegativeEigenvalue);
  }
  EXPECT_THROW(fid(diag_stats({0}, {1}), diag_stats({0, 0}, {1, 1})), Error);
}
