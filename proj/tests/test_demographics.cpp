#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "fairrag/demographics.hpp"

using namespace fairrag;

namespace {

// Independent re-statement of the seven RGB clauses.
bool skin_rule_oracle(int r, int g, int b) {
  const int mx = std::max(r, std::max(g, b));
  const int mn = std::min(r, std::min(g, b));
  if (!(r > 95)) return false;
  if (!(g > 40)) return false;
  if (!(b > 20)) return false;
  if (!(mx - mn > 15)) return false;
  if (!(r - g > 15 || g - r > 15)) return false;
  if (!(r > g)) return false;
  return r > b;
}

std::vector<float> unit(std::vector<float> v) {
  double s = 0;
  for (float x : v) s += double(x) * x;
  for (float& x : v) x = float(x / std::sqrt(s));
  return v;
}

MstPalette official_palette() { return load_palette(FAIRRAG_DATA_DIR "/mst_palette.json"); }

}  // namespace

TEST(BucketAge, Boundaries) {
  EXPECT_EQ(bucket_age(25), AgeGroup::A20_29);
  EXPECT_EQ(bucket_age(19), AgeGroup::Under20);
  EXPECT_EQ(bucket_age(60), AgeGroup::A60Plus);
  EXPECT_EQ(bucket_age(0), AgeGroup::Under20);
  EXPECT_EQ(bucket_age(20), AgeGroup::A20_29);
  EXPECT_EQ(bucket_age(29), AgeGroup::A20_29);
  EXPECT_EQ(bucket_age(30), AgeGroup::A30_39);
  EXPECT_EQ(bucket_age(49), AgeGroup::A40_49);
  EXPECT_EQ(bucket_age(59), AgeGroup::A50_59);
  EXPECT_EQ(bucket_age(120), AgeGroup::A60Plus);
}

TEST(BucketAge, NegativeRejected) {
  EXPECT_THROW(bucket_age(-1), Error);
}

TEST(BucketAge, Monotone) {
  for (int a = 0; a < 130; ++a)
    for (int b = a; b < 130; ++b) ASSERT_LE(bucket_age(a), bucket_age(b));
}

TEST(ClassifyGender, ArgmaxAndTie) {
  // image = e0; prompts built so cosines equal the requested values.
  auto prompt_with_cos = [](float c) { return std::vector<float>{c, std::sqrt(1 - c * c), 0}; };
  const std::vector<float> image{1, 0, 0};
  EXPECT_EQ(classify_gender(image, prompt_with_cos(0.31f), prompt_with_cos(0.29f)), Gender::Male);
  EXPECT_EQ(classify_gender(image, prompt_with_cos(0.10f), prompt_with_cos(0.40f)), Gender::Female);
  EXPECT_EQ(classify_gender(image, prompt_with_cos(0.25f), prompt_with_cos(0.25f)), Gender::Male);
}

TEST(ClassifyGender, Errors) {
  const std::vector<float> a{1, 0}, b{0, 1}, c{1, 0, 0}, big{2, 0};
  try {
    classify_gender(a, b, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
  try {
    classify_gender(big, a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotNormalized);
  }
}

TEST(ClassifyGender, RandomInputsMatchArgmaxOracle) {
  std::mt19937 gen(7);
  std::normal_distribution<float> nd;
  for (int t = 0; t < 2000; ++t) {
    std::vector<float> img(16), m(16), f(16);
    for (auto* v : {&img, &m, &f})
      for (auto& x : *v) x = nd(gen);
    img = unit(img);
    m = unit(m);
    f = unit(f);
    double cm = 0, cf = 0;
    for (int i = 0; i < 16; ++i) {
      cm += double(img[i]) * m[i];
      cf += double(img[i]) * f[i];
    }
    ASSERT_EQ(classify_gender(img, m, f), cf > cm ? Gender::Female : Gender::Male);
  }
}

TEST(SkinPixel, Examples) {
  EXPECT_TRUE(is_skin_pixel({200, 150, 120}));
  EXPECT_FALSE(is_skin_pixel({80, 80, 80}));
  // Every clause holds: R=96>95, G=41>40, B=21>20, spread 75, |R-G|=55, R>G, R>B.
  EXPECT_TRUE(is_skin_pixel({96, 41, 21}));
  EXPECT_FALSE(is_skin_pixel({95, 41, 21}));
}

TEST(SkinPixel, AgreesWithOracleOnRandomTriples) {
  std::mt19937 gen(11);
  std::uniform_int_distribution<int> ch(0, 255);
  for (int t = 0; t < 10000; ++t) {
    const int r = ch(gen), g = ch(gen), b = ch(gen);
    ASSERT_EQ(is_skin_pixel({std::uint8_t(r), std::uint8_t(g), std::uint8_t(b)}), skin_rule_oracle(r, g, b))
        << r << "," << g << "," << b;
  }
}

TEST(Palette, OfficialScaleLoads) {
  const auto p = official_palette();
  EXPECT_EQ(p.swatch(SkinTone(1)), (Rgb{246, 237, 228}));
  EXPECT_EQ(p.swatch(SkinTone(10)), (Rgb{41, 36, 32}));
}

TEST(Palette, RejectsMalformed) {
  EXPECT_THROW(parse_palette(nlohmann::json::array()), Error);
  auto j = nlohmann::json::parse(R"([{"mst":1,"rgb":[1,2,3]}])");
  EXPECT_THROW(parse_palette(j), Error);
  nlohmann::json dup = nlohmann::json::array();
  for (int i = 0; i < 10; ++i) dup.push_back({{"mst", 1}, {"rgb", {1, 2, 3}}});
  EXPECT_THROW(parse_palette(dup), Error);
}

TEST(SkinTone, SwatchFixedPoint) {
  const auto p = official_palette();
  int checked = 0;
  for (int i = 1; i <= 10; ++i) {
    const Rgb s = p.swatch(SkinTone(i));
    if (!is_skin_pixel(s)) continue;
    const std::vector<Rgb> pixels(25, s);
    EXPECT_EQ(classify_skin_tone(pixels, p).mst(), i);
    ++checked;
  }
  EXPECT_EQ(checked, 5);  // MST 4..8 pass the RGB rule
}

namespace {

// Brute-force nearest swatch by ΔE76 on the mean of the given pixels.
int nearest_swatch_oracle(const std::vector<Rgb>& px, const MstPalette& p) {
  double r = 0, g = 0, b = 0;
  int n = 0;
  for (const auto& q : px)
    if (is_skin_pixel(q)) {
      r += srgb_to_linear(q.r / 255.0);
      g += srgb_to_linear(q.g / 255.0);
      b += srgb_to_linear(q.b / 255.0);
      ++n;
    }
  const Lab m = linear_rgb_to_lab(r / n, g / n, b / n);
  std::vector<double> d;
  for (int i = 1; i <= 10; ++i) d.push_back(delta_e76(m, srgb_to_lab(p.swatch(SkinTone(i)))));
  return int(std::min_element(d.begin(), d.end()) - d.begin()) + 1;
}

std::vector<Rgb> jitter(Rgb base, int count, std::mt19937& gen) {
  std::uniform_int_distribution<int> d(-1, 1);
  std::vector<Rgb> out;
  for (int i = 0; i < count; ++i)
    out.push_back({std::uint8_t(base.r + d(gen)), std::uint8_t(base.g + d(gen)), std::uint8_t(base.b + d(gen))});
  return out;
}

}  // namespace

TEST(SkinTone, NoisySwatchOnOfficialPalette) {
  // Swatch 1 of the official scale fails the skin rule, so the lowest
  // skin-passing swatch (MST 4) carries the noisy-swatch check.
  const auto p = official_palette();
  std::mt19937 gen(3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto px = jitter(p.swatch(SkinTone(4)), 50, gen);
    ASSERT_EQ(nearest_swatch_oracle(px, p), 4);
    ASSERT_EQ(classify_skin_tone(px, p).mst(), 4);
  }
  const std::vector<Rgb> swatch1(50, p.swatch(SkinTone(1)));
  EXPECT_THROW(classify_skin_tone(swatch1, p), Error);
}

TEST(SkinTone, NoisySwatchOneWhenItPassesTheRule) {
  MstPalette p;
  for (int i = 0; i < 10; ++i)
    p.swatches[i] = {std::uint8_t(240 - 14 * i), std::uint8_t(190 - 14 * i), std::uint8_t(150 - 12 * i)};
  ASSERT_TRUE(is_skin_pixel(p.swatches[0]));
  std::mt19937 gen(5);
  const auto px = jitter(p.swatches[0], 40, gen);
  EXPECT_EQ(nearest_swatch_oracle(px, p), 1);
  EXPECT_EQ(classify_skin_tone(px, p).mst(), 1);
}

TEST(SkinTone, NoSkinPixels) {
  const std::vector<Rgb> black(10, Rgb{0, 0, 0});
  try {
    classify_skin_tone(black, official_palette());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoSkinPixels);
  }
}

TEST(SkinTone, TiesGoToLowerIndex) {
  MstPalette p;
  p.swatches.fill({200, 150, 120});
  const std::vector<Rgb> px(3, Rgb{200, 150, 120});
  EXPECT_EQ(classify_skin_tone(px, p).mst(), 1);
}

TEST(SkinTone, RangeEnforced) {
  EXPECT_THROW(SkinTone(0), Error);
  EXPECT_THROW(SkinTone(11), Error);
}

TEST(IntersectionalGroup, OrderAndAccessors) {
  const IntersectionalGroup a{AgeGroup::A20_29, Gender::Male, SkinTone(5)};
  const IntersectionalGroup b{AgeGroup::A20_29, Gender::Female, SkinTone(1)};
  const IntersectionalGroup c{AgeGroup::A30_39, Gender::Male, SkinTone(1)};
  EXPECT_LT(a, b);
  EXPECT_LT(b, c);
  EXPECT_EQ(a[Attribute::Age], 1);
  EXPECT_EQ(b[Attribute::Gender], 1);
  EXPECT_EQ(a[Attribute::Skin], 4);
  EXPECT_EQ(std::hash<IntersectionalGroup>{}(a), std::hash<IntersectionalGroup>{}(a));
  EXPECT_EQ(group_from_json(to_json(a)), a);
}
