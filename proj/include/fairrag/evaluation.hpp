#pragma once

// Per-prompt evaluation of generated image sets and the JSON report.
//
// Classification input is JSONL, one generated image per line:
//   {"prompt": str, "image_id": str, "face": bool,
//    "age_group": str | "age_years": int,
//    "gender": "male"|"female"      (or derived from the image embedding
//                                    and the two gender prompt embeddings),
//    "skin_tone": int | "face_pixels": [[r,g,b], ...]}
// "face": false, or face pixels with no skin pixel, marks a no-face image.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fairrag/demographics.hpp"
#include "fairrag/embedding_store.hpp"
#include "fairrag/error.hpp"
#include "fairrag/metrics.hpp"

namespace fairrag {

struct PromptClassifications {
  std::string prompt;
  std::vector<std::optional<IntersectionalGroup>> groups;
  std::vector<std::string> image_ids;
};

/// Row-major feature vectors, optionally tagged with the prompt each row belongs to.
struct FeatureSet {
  std::vector<float> rows;
  std::size_t dim = 0;
  std::vector<std::string> prompts;

  [[nodiscard]] std::size_t size() const { return dim == 0 ? 0 : rows.size() / dim; }
};

struct EvalConfig {
  AttributeCardinalities cardinalities{};
  bool per_prompt_fid = false;
};

struct EvalInputs {
  std::vector<PromptClassifications> classifications;
  std::map<std::string, std::vector<std::vector<float>>> image_embeddings;  // empty: no CLIP score
  std::map<std::string, std::vector<float>> text_embeddings;
  std::optional<FeatureSet> generated_features;
  std::optional<FeatureSet> real_features;
};

struct PromptReport {
  std::string prompt;
  DiversityScores diversity;
  std::size_t images = 0;
  std::size_t no_face = 0;
  std::optional<double> clip_score;
  std::optional<double> fid;
};

struct EvaluationReport {
  std::vector<PromptReport> per_prompt;
  DiversityScores aggregate;
  std::optional<double> clip_score;
  std::optional<double> fid;
  bool per_prompt_fid = false;
};

namespace detail {

inline FeatureSet rows_for_prompt(const FeatureSet& all, const std::string& prompt) {
  FeatureSet out;
  out.dim = all.dim;
  for (std::size_t r = 0; r < all.size(); ++r)
    if (all.prompts[r] == prompt)
      out.rows.insert(out.rows.end(), all.rows.begin() + static_cast<std::ptrdiff_t>(r * all.dim),
                      all.rows.begin() + static_cast<std::ptrdiff_t>((r + 1) * all.dim));
  return out;
}

template <class Map>
void require_same_keys(const std::vector<PromptClassifications>& prompts, const Map& m, const char* what) {
  std::set<std::string> expected;
  for (const auto& p : prompts) expected.insert(p.prompt);
  std::set<std::string> got;
  for (const auto& [k, v] : m) got.insert(k);
  if (expected != got) {
    std::string detail_msg;
    for (const auto& k : expected)
      if (!got.count(k)) detail_msg += " missing '" + k + "'";
    for (const auto& k : got)
      if (!expected.count(k)) detail_msg += " unexpected '" + k + "'";
    throw Error(ErrorCode::KeyMismatch, std::string(what) + " prompt keys differ:" + detail_msg);
  }
}

}  // namespace detail

/// Scores every prompt, then averages the per-prompt values in input order.
inline EvaluationReport evaluate_prompt_set(const EvalInputs& in, const EvalConfig& cfg = {}) {
  if (in.classifications.empty()) throw Error(ErrorCode::EmptyList, "no prompts to evaluate");
  {
    std::set<std::string> seen;
    for (const auto& p : in.classifications)
      if (!seen.insert(p.prompt).second) throw Error(ErrorCode::KeyMismatch, "prompt listed twice: " + p.prompt);
  }
  const bool with_clip = !in.image_embeddings.empty();
  if (with_clip) {
    detail::require_same_keys(in.classifications, in.image_embeddings, "image embeddings");
    detail::require_same_keys(in.classifications, in.text_embeddings, "text embeddings");
  }
  const bool with_fid = in.generated_features && in.real_features;
  if ((in.generated_features.has_value()) != (in.real_features.has_value()))
    throw Error(ErrorCode::InvalidArgument, "FID needs both generated and real features");
  if (with_fid && in.generated_features->dim != in.real_features->dim)
    throw Error(ErrorCode::DimensionMismatch, "generated and real features differ in dimension");
  if (with_fid && cfg.per_prompt_fid) {
    for (const FeatureSet* fs : {&*in.generated_features, &*in.real_features}) {
      if (fs->prompts.size() != fs->size())
        throw Error(ErrorCode::KeyMismatch, "per-prompt FID needs a prompt tag on every feature row");
      std::map<std::string, int> tags;
      for (const auto& t : fs->prompts) tags[t] = 0;
      detail::require_same_keys(in.classifications, tags, "feature");
    }
  }

  EvaluationReport report;
  report.per_prompt_fid = cfg.per_prompt_fid;
  double clip_sum = 0.0, fid_sum = 0.0;
  for (const auto& pc : in.classifications) {
    PromptReport pr;
    pr.prompt = pc.prompt;
    const auto hist = apply_no_face_penalty(pc.groups, cfg.cardinalities);
    pr.diversity = prompt_diversity(hist);
    pr.images = hist.images;
    pr.no_face = hist.no_face;
    if (with_clip) {
      const auto& imgs = in.image_embeddings.at(pc.prompt);
      std::vector<std::span<const float>> views(imgs.begin(), imgs.end());
      pr.clip_score = clip_score(views, in.text_embeddings.at(pc.prompt));
      clip_sum += *pr.clip_score;
    }
    if (with_fid && cfg.per_prompt_fid) {
      const FeatureSet g = detail::rows_for_prompt(*in.generated_features, pc.prompt);
      const FeatureSet r = detail::rows_for_prompt(*in.real_features, pc.prompt);
      pr.fid = fid(feature_stats(g.rows, g.dim), feature_stats(r.rows, r.dim));
      fid_sum += *pr.fid;
    }
    report.aggregate.age += pr.diversity.age;
    report.aggregate.gender += pr.diversity.gender;
    report.aggregate.skin += pr.diversity.skin;
    report.aggregate.intersectional += pr.diversity.intersectional;
    report.per_prompt.push_back(std::move(pr));
  }
  const double count = static_cast<double>(report.per_prompt.size());
  report.aggregate.age /= count;
  report.aggregate.gender /= count;
  report.aggregate.skin /= count;
  report.aggregate.intersectional /= count;
  if (with_clip) report.clip_score = clip_sum / count;
  if (with_fid) {
    report.fid = cfg.per_prompt_fid
                     ? fid_sum / count
                     : fid(feature_stats(in.generated_features->rows, in.generated_features->dim),
                           feature_stats(in.real_features->rows, in.real_features->dim));
  }
  return report;
}

inline nlohmann::ordered_json to_json(const DiversityScores& d) {
  return {{"age", d.age}, {"gender", d.gender}, {"skin", d.skin}, {"intersectional", d.intersectional}};
}

inline nlohmann::ordered_json to_json(const EvaluationReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json per_prompt = nlohmann::ordered_json::object();
  nlohmann::ordered_json no_face = nlohmann::ordered_json::object();
  for (const auto& p : r.per_prompt) {
    auto entry = to_json(p.diversity);
    entry["images"] = p.images;
    entry["clip_score"] = opt(p.clip_score);
    if (r.per_prompt_fid) entry["fid"] = opt(p.fid);
    per_prompt[p.prompt] = std::move(entry);
    no_face[p.prompt] = p.no_face;
  }
  nlohmann::ordered_json j;
  j["per_prompt"] = std::move(per_prompt);
  j["aggregate"] = to_json(r.aggregate);
  j["no_face_counts"] = std::move(no_face);
  j["clip_score"] = opt(r.clip_score);
  j["fid"] = opt(r.fid);
  j["fid_mode"] = r.per_prompt_fid ? "per_prompt" : "pooled";
  return j;
}

// ---------------------------------------------------------------------------
// File inputs

/// Optional inputs for deriving attributes that are not given directly.
struct ClassifierContext {
  const MstPalette* palette = nullptr;
  const EmbeddingStore* images = nullptr;
  std::optional<std::pair<std::vector<float>, std::vector<float>>> gender_prompts;  // (male, female)
};

inline std::optional<IntersectionalGroup> classify_record(const nlohmann::json& j, const ClassifierContext& ctx) {
  if (j.contains("face") && !j.at("face").get<bool>()) return std::nullopt;
  auto field = [&](const char* key) -> const nlohmann::json* {
    auto it = j.find(key);
    return (it == j.end() || it->is_null()) ? nullptr : &*it;
  };

  AgeGroup age;
  if (const auto* v = field("age_group")) {
    const auto parsed = parse_age_group(v->get<std::string>());
    if (!parsed) throw Error(ErrorCode::Parse, "unknown age_group " + v->dump());
    age = *parsed;
  } else if (const auto* y = field("age_years")) {
    age = bucket_age(y->get<int>());
  } else {
    throw Error(ErrorCode::Parse, "record has neither age_group nor age_years");
  }

  Gender gender;
  if (const auto* v = field("gender")) {
    const auto parsed = parse_gender(v->get<std::string>());
    if (!parsed) throw Error(ErrorCode::Parse, "unknown gender " + v->dump());
    gender = *parsed;
  } else if (ctx.gender_prompts && ctx.images && field("image_id")) {
    const auto row = ctx.images->find(j.at("image_id").get<std::string>());
    if (!row) throw Error(ErrorCode::MissingEmbedding, "no embedding for image " + j.at("image_id").dump());
    gender = classify_gender(ctx.images->row(*row), ctx.gender_prompts->first, ctx.gender_prompts->second);
  } else {
    throw Error(ErrorCode::Parse, "record has no gender and no gender prompts were supplied");
  }

  SkinTone skin;
  if (const auto* v = field("skin_tone")) {
    skin = SkinTone(v->get<int>());
  } else if (const auto* px = field("face_pixels")) {
    if (!ctx.palette) throw Error(ErrorCode::InvalidArgument, "face_pixels given but no palette configured");
    std::vector<Rgb> pixels;
    pixels.reserve(px->size());
    for (const auto& p : *px) {
      const int r = p.at(0).get<int>(), g = p.at(1).get<int>(), b = p.at(2).get<int>();
      if (r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255)
        throw Error(ErrorCode::Parse, "pixel channel out of range");
      pixels.push_back({static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)});
    }
    try {
      skin = classify_skin_tone(pixels, *ctx.palette);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoSkinPixels) return std::nullopt;
      throw;
    }
  } else {
    throw Error(ErrorCode::Parse, "record has neither skin_tone nor face_pixels");
  }
  return IntersectionalGroup{age, gender, skin};
}

/// Groups JSONL records by prompt, keeping first-appearance order.
inline std::vector<PromptClassifications> read_classifications(const std::filesystem::path& path,
                                                               const ClassifierContext& ctx = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<PromptClassifications> out;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const std::string prompt = j.at("prompt").get<std::string>();
      auto [it, inserted] = index.emplace(prompt, out.size());
      if (inserted) out.push_back({prompt, {}, {}});
      auto& pc = out[it->second];
      pc.groups.push_back(classify_record(j, ctx));
      pc.image_ids.push_back(j.value("image_id", std::string()));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

/// FRG1 feature file plus an optional `<path>.jsonl` sidecar of {"prompt": str} rows.
inline FeatureSet read_feature_set(const std::filesystem::path& path) {
  io::Matrix m = io::read_matrix(path);
  FeatureSet fs;
  fs.dim = m.dim;
  fs.rows = std::move(m.data);
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    std::ifstream in(side);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        fs.prompts.push_back(nlohmann::json::parse(line).at("prompt").get<std::string>());
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, side.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (fs.prompts.size() != fs.size())
      throw Error(ErrorCode::Parse, side.string() + " row count does not match " + path.string());
  }
  return fs;
}

/// Gathers image embeddings per prompt from a store keyed by image id.
inline std::map<std::string, std::vector<std::vector<float>>> gather_image_embeddings(
    const std::vector<PromptClassifications>& prompts, const EmbeddingStore& images) {
  std::map<std::string, std::vector<std::vector<float>>> out;
  for (const auto& pc : prompts) {
    auto& list = out[pc.prompt];
    for (const auto& id : pc.image_ids) {
      const auto row = images.find(id);
      if (!row) throw Error(ErrorCode::MissingEmbedding, "no embedding for image '" + id + "'");
      const auto v = images.row(*row);
      list.emplace_back(v.begin(), v.end());
    }
  }
  return out;
}

/// Text embeddings keyed by the store's row ids (the prompt strings).
inline std::map<std::string, std::vector<float>> text_embeddings_by_id(const EmbeddingStore& texts) {
  std::map<std::string, std::vector<float>> out;
  for (std::size_t r = 0; r < texts.size(); ++r) {
    const auto v = texts.row(r);
    out.emplace(texts.id(r), std::vector<float>(v.begin(), v.end()));
  }
  return out;
}

}  // namespace fairrag
