#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "fairrag/conditioning.hpp"
#include "fairrag/demographics.hpp"
#include "fairrag/error.hpp"
#include "fairrag/fair_retrieval.hpp"

namespace fairrag {

/// Run-wide settings. Mode flags switch off individual pipeline stages
/// (all off reproduces plain similarity retrieval).
struct RunConfig {
  std::size_t n = kDefaultTopN;
  int k = static_cast<int>(kDefaultTopK);
  std::uint64_t seed = 0;
  AttributeCardinalities cardinalities{};
  std::string suffix = std::string(kDebiasSuffix);
  std::string instruction = std::string(kTransferInstruction);
  bool debiased_query = true;
  bool balanced_sampling = true;
  bool text_instruction = true;

  void validate() const {
    if (k < 1) throw Error(ErrorCode::NonPositiveK, "k must be at least 1");
    if (n < static_cast<std::size_t>(k)) throw Error(ErrorCode::InvalidArgument, "n must be at least k");
    if (cardinalities.age < 1 || cardinalities.gender < 1 || cardinalities.skin < 1)
      throw Error(ErrorCode::InvalidArgument, "attribute cardinalities must be positive");
  }
};

/// Overlays the keys present in `j` onto `cfg`.
inline void merge_run_config(RunConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Parse, "run config must be a JSON object");
  cfg.n = j.value("n", cfg.n);
  cfg.k = j.value("k", cfg.k);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.suffix = j.value("suffix", cfg.suffix);
  cfg.instruction = j.value("instruction", cfg.instruction);
  cfg.debiased_query = j.value("debiased_query", cfg.debiased_query);
  cfg.balanced_sampling = j.value("balanced_sampling", cfg.balanced_sampling);
  cfg.text_instruction = j.value("text_instruction", cfg.text_instruction);
  if (auto it = j.find("n_a"); it != j.end()) {
    cfg.cardinalities.age = it->value("age", cfg.cardinalities.age);
    cfg.cardinalities.gender = it->value("gender", cfg.cardinalities.gender);
    cfg.cardinalities.skin = it->value("skin", cfg.cardinalities.skin);
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  RunConfig cfg;
  try {
    merge_run_config(cfg, nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  return cfg;
}

/// Defaults, overlaid with the file named by FAIRRAG_CONFIG when set.
inline RunConfig run_config_from_env() {
  const char* path = std::getenv("FAIRRAG_CONFIG");
  if (path == nullptr || *path == '\0') return {};
  return load_run_config(path);
}

}  // namespace fairrag
