#pragma once

// Linear projection of reference embeddings into the generator's token
// space, bimodal prompt assembly and conditioning bundles.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fairrag/binary_io.hpp"
#include "fairrag/embedding_store.hpp"
#include "fairrag/error.hpp"
#include "fairrag/fair_retrieval.hpp"

namespace fairrag {

inline constexpr std::string_view kTransferInstruction = "with age, gender and skin tone of:";
inline constexpr std::string_view kNegativePrompt =
    "bad, disfigured, cropped, bad anatomy, poorly drawn hands, poorly drawn fingers";

inline constexpr std::array<char, 4> kProjectorMagic{'F', 'R', 'G', 'W'};
inline constexpr std::uint16_t kProjectorVersion = 1;

/// Affine map token = W v + b, W stored row-major as d_token x d_visual.
struct ProjectorWeights {
  std::uint32_t d_visual = 0;
  std::uint32_t d_token = 0;
  std::vector<float> w;
  std::vector<float> b;

  void validate() const {
    if (d_visual == 0 || d_token == 0)
      throw Error(ErrorCode::DimensionMismatch, "projector dimensions must be positive");
    if (w.size() != static_cast<std::size_t>(d_visual) * d_token || b.size() != d_token)
      throw Error(ErrorCode::DimensionMismatch, "projector arrays do not match declared shape");
    for (float x : w)
      if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteInput, "non-finite projector weight");
    for (float x : b)
      if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteInput, "non-finite projector bias");
  }
};

inline std::vector<float> apply_projector(const ProjectorWeights& weights, std::span<const float> v) {
  if (v.size() != weights.d_visual)
    throw Error(ErrorCode::DimensionMismatch,
                "projector expects dim " + std::to_string(weights.d_visual) + ", got " +
                    std::to_string(v.size()));
  for (float x : v)
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteInput, "non-finite projector input");
  const std::vector<double> x(v.begin(), v.end());
  std::vector<float> out(weights.d_token);
  for (std::size_t t = 0; t < weights.d_token; ++t) {
    const float* row = weights.w.data() + t * weights.d_visual;
    out[t] = static_cast<float>(weights.b[t] + dot_f32_f64(row, x.data(), weights.d_visual));
  }
  return out;
}

inline std::vector<char> encode_projector(const ProjectorWeights& weights) {
  weights.validate();
  std::vector<char> out(kProjectorMagic.begin(), kProjectorMagic.end());
  io::detail::put_le(out, kProjectorVersion);
  io::detail::put_le(out, weights.d_visual);
  io::detail::put_le(out, weights.d_token);
  io::append_floats(out, weights.w);
  io::append_floats(out, weights.b);
  return out;
}

inline ProjectorWeights decode_projector(std::span<const char> bytes, const std::string& source) {
  io::ByteReader reader(bytes, source);
  auto magic = reader.take(4);
  if (!std::equal(magic.begin(), magic.end(), kProjectorMagic.begin()))
    throw Error(ErrorCode::BadMagic, source + ": expected FRGW header");
  const auto version = reader.read<std::uint16_t>();
  if (version != kProjectorVersion)
    throw Error(ErrorCode::VersionMismatch, source + ": unsupported version " + std::to_string(version));
  ProjectorWeights p;
  p.d_visual = reader.read<std::uint32_t>();
  p.d_token = reader.read<std::uint32_t>();
  if (p.d_visual == 0 || p.d_token == 0)
    throw Error(ErrorCode::Parse, source + ": projector dimensions must be positive");
  const std::size_t floats = (static_cast<std::size_t>(p.d_visual) + 1) * p.d_token;
  if (reader.remaining() / sizeof(float) < floats)
    throw Error(ErrorCode::TruncatedFile, source + ": weight payload shorter than header declares");
  p.w.resize(static_cast<std::size_t>(p.d_visual) * p.d_token);
  p.b.resize(p.d_token);
  reader.read_floats(p.w);
  reader.read_floats(p.b);
  if (reader.remaining() != 0) throw Error(ErrorCode::Parse, source + ": trailing bytes after bias");
  p.validate();
  return p;
}

inline void save_projector(const ProjectorWeights& weights, const std::filesystem::path& path) {
  io::write_file(path, encode_projector(weights));
}

inline ProjectorWeights load_projector(const std::filesystem::path& path) {
  return decode_projector(io::read_file(path), path.string());
}

/// Text part plus the projected reference token as the final conditioning element.
struct BimodalPrompt {
  std::string prompt;
  std::string instruction;
  std::vector<std::string> text_tokens;
  std::vector<float> reference_token;

  [[nodiscard]] std::string full_text() const {
    return instruction.empty() ? prompt : prompt + ", " + instruction;
  }
};

inline BimodalPrompt make_bimodal_prompt(std::string prompt, std::vector<float> token,
                                         std::string_view instruction = kTransferInstruction) {
  if (prompt.empty()) throw Error(ErrorCode::EmptyPrompt, "prompt must not be empty");
  BimodalPrompt bp;
  bp.prompt = std::move(prompt);
  bp.instruction = std::string(instruction);
  bp.reference_token = std::move(token);
  std::istringstream words(bp.full_text());
  for (std::string w; words >> w;) bp.text_tokens.push_back(w);
  return bp;
}

struct ConditioningBundle {
  std::string prompt;
  std::string full_text;
  std::optional<std::string> negative_prompt;
  std::string reference_id;
  std::vector<float> token;
  std::uint64_t selection_seed = 0;

  bool operator==(const ConditioningBundle&) const = default;
};

struct BundleOptions {
  std::string instruction = std::string(kTransferInstruction);
  std::optional<std::string> negative_prompt = std::string(kNegativePrompt);
};

/// One bundle per selected reference, in selection order.
inline std::vector<ConditioningBundle> export_bundles(const std::string& prompt,
                                                      const SelectionResult& selection,
                                                      const EmbeddingStore& store,
                                                      const ProjectorWeights& weights,
                                                      const BundleOptions& opt = {}) {
  std::vector<ConditioningBundle> out;
  out.reserve(selection.chosen.size());
  for (const Candidate& c : selection.chosen) {
    const auto row = store.find(c.id);
    if (!row) throw Error(ErrorCode::MissingEmbedding, "no embedding stored for reference " + c.id);
    const BimodalPrompt bp = make_bimodal_prompt(prompt, apply_projector(weights, store.row(*row)), opt.instruction);
    out.push_back({prompt, bp.full_text(), opt.negative_prompt, c.id, bp.reference_token, selection.seed});
  }
  return out;
}

inline nlohmann::ordered_json to_json(const ConditioningBundle& b) {
  nlohmann::ordered_json j;
  j["prompt"] = b.prompt;
  j["full_text"] = b.full_text;
  j["negative_prompt"] = b.negative_prompt ? nlohmann::ordered_json(*b.negative_prompt)
                                           : nlohmann::ordered_json(nullptr);
  j["reference_id"] = b.reference_id;
  j["token"] = b.token;
  j["selection_seed"] = b.selection_seed;
  return j;
}

inline ConditioningBundle bundle_from_json(const nlohmann::json& j) {
  ConditioningBundle b;
  b.prompt = j.at("prompt").get<std::string>();
  b.full_text = j.at("full_text").get<std::string>();
  if (auto it = j.find("negative_prompt"); it != j.end() && !it->is_null())
    b.negative_prompt = it->get<std::string>();
  b.reference_id = j.at("reference_id").get<std::string>();
  for (const auto& x : j.at("token")) b.token.push_back(static_cast<float>(x.get<double>()));
  b.selection_seed = j.at("selection_seed").get<std::uint64_t>();
  return b;
}

}  // namespace fairrag
