#pragma once

// Demographic attributes, intersectional groups and the three classifiers
// (age bucketing, CLIP-prompt gender argmax, Monk skin tone estimation).

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "fairrag/error.hpp"

namespace fairrag {

enum class AgeGroup : std::uint8_t { Under20, A20_29, A30_39, A40_49, A50_59, A60Plus };
enum class Gender : std::uint8_t { Male, Female };
enum class Attribute : std::uint8_t { Age, Gender, Skin };

inline constexpr std::array<Attribute, 3> kAttributes{Attribute::Age, Attribute::Gender,
                                                      Attribute::Skin};
inline constexpr std::size_t kAgeGroupCount = 6;
inline constexpr std::size_t kGenderCount = 2;
inline constexpr std::size_t kSkinToneCount = 10;

/// Monk Skin Tone index, 1 (lightest) .. 10 (darkest).
class SkinTone {
 public:
  constexpr SkinTone() = default;
  explicit constexpr SkinTone(int mst) : mst_(mst) {
    if (mst < 1 || mst > static_cast<int>(kSkinToneCount))
      throw Error(ErrorCode::InvalidArgument, "skin tone must be in [1,10]");
  }
  [[nodiscard]] constexpr int mst() const noexcept { return mst_; }
  constexpr auto operator<=>(const SkinTone&) const = default;

 private:
  int mst_ = 1;
};

/// Number of values each attribute can take. Configurable so a coarser
/// annotation scheme (e.g. three skin-tone levels) can be used.
struct AttributeCardinalities {
  int age = static_cast<int>(kAgeGroupCount);
  int gender = static_cast<int>(kGenderCount);
  int skin = static_cast<int>(kSkinToneCount);

  [[nodiscard]] constexpr int of(Attribute a) const noexcept {
    switch (a) {
      case Attribute::Age: return age;
      case Attribute::Gender: return gender;
      case Attribute::Skin: return skin;
    }
    return 0;
  }
  [[nodiscard]] constexpr std::size_t intersectional() const noexcept {
    return static_cast<std::size_t>(age) * static_cast<std::size_t>(gender) *
           static_cast<std::size_t>(skin);
  }
  constexpr bool operator==(const AttributeCardinalities&) const = default;
};

/// (age, gender, skin tone) tuple. Ordered lexicographically in that order.
struct IntersectionalGroup {
  AgeGroup age = AgeGroup::Under20;
  Gender gender = Gender::Male;
  SkinTone skin{};

  /// Zero-based index of the individual group g[a].
  [[nodiscard]] constexpr int operator[](Attribute a) const noexcept {
    switch (a) {
      case Attribute::Age: return static_cast<int>(age);
      case Attribute::Gender: return static_cast<int>(gender);
      case Attribute::Skin: return skin.mst() - 1;
    }
    return 0;
  }

  /// Dense index in [0, age*gender*skin) for histogramming.
  [[nodiscard]] constexpr std::size_t flat_index(const AttributeCardinalities& n = {}) const {
    return (static_cast<std::size_t>((*this)[Attribute::Age]) * n.gender +
            static_cast<std::size_t>((*this)[Attribute::Gender])) *
               n.skin +
           static_cast<std::size_t>((*this)[Attribute::Skin]);
  }

  constexpr auto operator<=>(const IntersectionalGroup&) const = default;
};

// ---------------------------------------------------------------------------
// Labels

inline constexpr std::array<std::string_view, kAgeGroupCount> kAgeGroupLabels{
    "<20", "20-29", "30-39", "40-49", "50-59", "60+"};

constexpr std::string_view to_string(AgeGroup g) noexcept {
  return kAgeGroupLabels[static_cast<std::size_t>(g)];
}
constexpr std::string_view to_string(Gender g) noexcept {
  return g == Gender::Male ? "male" : "female";
}

inline std::optional<AgeGroup> parse_age_group(std::string_view label) {
  for (std::size_t i = 0; i < kAgeGroupLabels.size(); ++i)
    if (kAgeGroupLabels[i] == label) return static_cast<AgeGroup>(i);
  return std::nullopt;
}

inline std::optional<Gender> parse_gender(std::string_view label) {
  if (label == "male") return Gender::Male;
  if (label == "female") return Gender::Female;
  return std::nullopt;
}

inline std::string to_string(const IntersectionalGroup& g) {
  return "(" + std::string(to_string(g.age)) + "," + std::string(to_string(g.gender)) + ",MST" +
         std::to_string(g.skin.mst()) + ")";
}

inline nlohmann::ordered_json to_json(const IntersectionalGroup& g) {
  return {{"age_group", to_string(g.age)},
          {"gender", to_string(g.gender)},
          {"skin_tone", g.skin.mst()}};
}

inline IntersectionalGroup group_from_json(const nlohmann::json& j) {
  const auto age = parse_age_group(j.at("age_group").get<std::string>());
  const auto gender = parse_gender(j.at("gender").get<std::string>());
  if (!age) throw Error(ErrorCode::Parse, "unknown age_group " + j.at("age_group").dump());
  if (!gender) throw Error(ErrorCode::Parse, "unknown gender " + j.at("gender").dump());
  return {*age, *gender, SkinTone(j.at("skin_tone").get<int>())};
}

// ---------------------------------------------------------------------------
// Age

inline AgeGroup bucket_age(int years) {
  if (years < 0) throw Error(ErrorCode::InvalidArgument, "age must be non-negative");
  if (years < 20) return AgeGroup::Under20;
  if (years >= 60) return AgeGroup::A60Plus;
  return static_cast<AgeGroup>(years / 10 - 1);
}

// ---------------------------------------------------------------------------
// Gender

inline constexpr double kUnitNormTolerance = 1e-6;

namespace detail {

inline double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

inline void require_unit(std::span<const float> v, std::string_view what, double tol) {
  const double norm = std::sqrt(dot(v, v));
  if (!(std::abs(norm - 1.0) <= tol))
    throw Error(ErrorCode::NotNormalized,
                std::string(what) + " has L2 norm " + std::to_string(norm));
}

}  // namespace detail

/// Picks the prompt with the higher cosine score. Ties go to Male.
inline Gender classify_gender(std::span<const float> image, std::span<const float> male_prompt,
                              std::span<const float> female_prompt) {
  if (image.size() != male_prompt.size() || image.size() != female_prompt.size())
    throw Error(ErrorCode::DimensionMismatch, "gender classifier inputs differ in dimension");
  detail::require_unit(image, "image embedding", kUnitNormTolerance);
  detail::require_unit(male_prompt, "male prompt embedding", kUnitNormTolerance);
  detail::require_unit(female_prompt, "female prompt embedding", kUnitNormTolerance);
  return detail::dot(image, female_prompt) > detail::dot(image, male_prompt) ? Gender::Female
                                                                              : Gender::Male;
}

// ---------------------------------------------------------------------------
// Skin tone

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  constexpr bool operator==(const Rgb&) const = default;
};

/// Uniform-daylight RGB skin rule.
constexpr bool is_skin_pixel(Rgb p) noexcept {
  const int r = p.r, g = p.g, b = p.b;
  const int hi = std::max({r, g, b});
  const int lo = std::min({r, g, b});
  return r > 95 && g > 40 && b > 20 && (hi - lo) > 15 && std::abs(r - g) > 15 && r > g && r > b;
}

struct Lab {
  double l = 0.0;
  double a = 0.0;
  double b = 0.0;
};

inline double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

/// Linear-light sRGB (each channel in [0,1]) to CIELAB under D65.
inline Lab linear_rgb_to_lab(double r, double g, double b) {
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  constexpr double delta = 6.0 / 29.0;
  auto f = [](double t) {
    return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
  };
  const double fx = f(x), fy = f(y), fz = f(z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

inline Lab srgb_to_lab(Rgb p) {
  return linear_rgb_to_lab(srgb_to_linear(p.r / 255.0), srgb_to_linear(p.g / 255.0),
                           srgb_to_linear(p.b / 255.0));
}

inline double delta_e76(const Lab& x, const Lab& y) {
  return std::sqrt((x.l - y.l) * (x.l - y.l) + (x.a - y.a) * (x.a - y.a) +
                   (x.b - y.b) * (x.b - y.b));
}

/// Ten reference swatches; swatches[i] is MST i+1.
struct MstPalette {
  std::array<Rgb, kSkinToneCount> swatches{};

  [[nodiscard]] const Rgb& swatch(SkinTone t) const {
    return swatches[static_cast<std::size_t>(t.mst() - 1)];
  }
};

/// Parses `[{"mst": 1, "rgb": [r, g, b]}, ...]` with every index 1..10 exactly once.
inline MstPalette parse_palette(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != kSkinToneCount)
    throw Error(ErrorCode::Parse, "palette must be an array of 10 entries");
  MstPalette palette;
  std::array<bool, kSkinToneCount> seen{};
  for (const auto& entry : j) {
    const int mst = entry.at("mst").get<int>();
    if (mst < 1 || mst > static_cast<int>(kSkinToneCount))
      throw Error(ErrorCode::Parse, "palette mst index out of range: " + std::to_string(mst));
    if (seen[mst - 1]) throw Error(ErrorCode::Parse, "duplicate palette mst " + std::to_string(mst));
    seen[mst - 1] = true;
    const auto& rgb = entry.at("rgb");
    if (!rgb.is_array() || rgb.size() != 3)
      throw Error(ErrorCode::Parse, "palette rgb must have three channels");
    std::array<std::uint8_t, 3> ch{};
    for (std::size_t c = 0; c < 3; ++c) {
      const int v = rgb[c].get<int>();
      if (v < 0 || v > 255) throw Error(ErrorCode::Parse, "palette channel out of range");
      ch[c] = static_cast<std::uint8_t>(v);
    }
    palette.swatches[mst - 1] = {ch[0], ch[1], ch[2]};
  }
  return palette;
}

inline MstPalette load_palette(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open palette " + path.string());
  try {
    return parse_palette(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

/// Nearest swatch (ΔE76) to the mean colour of the skin pixels. The mean is
/// taken in linear light. Ties go to the lower MST index.
inline SkinTone classify_skin_tone(std::span<const Rgb> face_pixels, const MstPalette& palette) {
  if (face_pixels.empty()) throw Error(ErrorCode::InvalidArgument, "no face pixels given");
  double sr = 0.0, sg = 0.0, sb = 0.0;
  std::size_t n = 0;
  for (const Rgb& p : face_pixels) {
    if (!is_skin_pixel(p)) continue;
    sr += srgb_to_linear(p.r / 255.0);
    sg += srgb_to_linear(p.g / 255.0);
    sb += srgb_to_linear(p.b / 255.0);
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::NoSkinPixels, "no pixel in the face region passed the skin rule");
  const Lab mean = linear_rgb_to_lab(sr / n, sg / n, sb / n);
  int best = 1;
  double best_distance = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= static_cast<int>(kSkinToneCount); ++i) {
    const double d = delta_e76(mean, srgb_to_lab(palette.swatch(SkinTone(i))));
    if (d < best_distance) {
      best_distance = d;
      best = i;
    }
  }
  return SkinTone(best);
}

}  // namespace fairrag

template <>
struct std::hash<fairrag::IntersectionalGroup> {
  std::size_t operator()(const fairrag::IntersectionalGroup& g) const noexcept {
    return std::hash<std::size_t>{}(g.flat_index());
  }
};
