// fairrag: command-line front end for fair reference retrieval, conditioning
// bundle export and evaluation of generated image sets.
//
//   fairrag index build   --embeddings E.jsonl [--annotations A.jsonl] --out store.frg
//   fairrag synth         --out store.frg [--count --dim --majority --noise --seed --query-out q.json]
//   fairrag retrieve      --store S --query q.json --prompt "Photo of a doctor" [--n --k --seed ...]
//   fairrag select        --candidates c.json [--k --seed --no-balanced-sampling]
//   fairrag bundle        --selection sel.json --store S --projector p.frgw --prompt P --out-dir D
//   fairrag eval          --classifications c.jsonl [--image-embeddings --text-embeddings ...]
//   fairrag ablation-demo [--seeds --majority --query-bias ...]
//   fairrag prompts       [--template "Headshot of"]
//
// FAIRRAG_CONFIG may name a JSON run config; explicit flags override it.
// Data goes to stdout, diagnostics to stderr; any failure exits non-zero.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

// Eigen must be parsed before cpp-httplib drags in <resolv.h>, whose `_res`
// macro collides with Eigen parameter names.
#include "fairrag/fairrag.hpp"
#include "fairrag/backend_client.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json parse_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw fairrag::Error(fairrag::ErrorCode::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw fairrag::Error(fairrag::ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw fairrag::Error(fairrag::ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

std::vector<float> to_floats(const json& arr, const std::string& what) {
  if (!arr.is_array()) throw fairrag::Error(fairrag::ErrorCode::Parse, what + " must be an array of numbers");
  std::vector<float> v;
  v.reserve(arr.size());
  for (const auto& x : arr) v.push_back(static_cast<float>(x.get<double>()));
  return v;
}

std::vector<float> normalized(std::vector<float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (sq == 0.0) throw fairrag::Error(fairrag::ErrorCode::ZeroVector, "query embedding has zero norm");
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x * inv);
  return v;
}

// --- index build -----------------------------------------------------------

struct IndexArgs {
  std::string embeddings, annotations, out;
};

int cmd_index_build(const IndexArgs& a) {
  std::ifstream in(a.embeddings);
  if (!in) throw fairrag::Error(fairrag::ErrorCode::Io, "cannot open " + a.embeddings);
  std::vector<std::pair<std::string, std::vector<float>>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      rows.emplace_back(j.at("id").get<std::string>(), to_floats(j.at("embedding"), "embedding"));
    } catch (const json::exception& e) {
      throw fairrag::Error(fairrag::ErrorCode::Parse, a.embeddings + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::vector<fairrag::Annotation> annotations;
  if (!a.annotations.empty()) annotations = fairrag::read_annotations(a.annotations);
  const auto store = fairrag::EmbeddingStore::build(rows, annotations);
  fairrag::save_store(store, a.out);
  std::cout << ordered_json{{"store", a.out}, {"count", store.size()}, {"dim", store.dim()}}.dump() << '\n';
  return 0;
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string out, query_out;
  std::size_t count = 1000;
  std::size_t dim = 64;
  double majority = 0.0;
  double noise = 0.05;
  double centroid_weight = 0.6;
};

int cmd_synth(const SynthArgs& a, std::uint64_t seed) {
  fairrag::Rng rng(seed);
  fairrag::NormalSampler normal;
  fairrag::PopulationSpec spec;
  spec.count = a.count;
  spec.dim = a.dim;
  spec.cluster_noise = a.noise;
  spec.centroid_weight = a.centroid_weight;
  spec.group_prior = fairrag::skewed_prior(a.majority, fairrag::kDefaultMajorityGroup, fairrag::all_groups());
  spec.shared_direction = fairrag::random_unit_vector(a.dim, rng, normal);
  spec.seed = rng();
  auto query = spec.shared_direction;
  const auto store = fairrag::synth_population(spec).into_store();
  fairrag::save_store(store, a.out);
  if (!a.query_out.empty()) write_text(a.query_out, json(query).dump() + "\n");
  std::cout << ordered_json{{"store", a.out}, {"count", store.size()}, {"dim", store.dim()}, {"seed", seed}}.dump()
            << '\n';
  return 0;
}

// --- retrieve / select -----------------------------------------------------

struct RetrieveArgs {
  std::string store, query, prompt, candidates_out;
};

std::vector<float> resolve_query(const fs::path& path, const std::string& text) {
  const json j = parse_json_file(path);
  if (j.is_array()) return normalized(to_floats(j, "query"));
  if (j.is_object()) {
    auto it = j.find(text);
    if (it == j.end())
      throw fairrag::Error(fairrag::ErrorCode::KeyMismatch, path.string() + " has no embedding for \"" + text + "\"");
    return normalized(to_floats(*it, "query"));
  }
  throw fairrag::Error(fairrag::ErrorCode::Parse, path.string() + ": expected an array or an object of arrays");
}

int cmd_retrieve(const RetrieveArgs& a, const fairrag::RunConfig& cfg) {
  cfg.validate();
  const auto store = fairrag::load_store(a.store);
  auto query = fairrag::make_debiased_query(a.prompt, cfg.debiased_query ? cfg.suffix : std::string());
  query.embedding = resolve_query(a.query, query.debiased_text);

  fairrag::RetrievalOptions opt;
  opt.n = cfg.n;
  opt.k = cfg.k;
  opt.seed = cfg.seed;
  opt.balanced_sampling = cfg.balanced_sampling;
  opt.cardinalities = cfg.cardinalities;
  if (!a.candidates_out.empty()) {
    auto arr = ordered_json::array();
    for (const auto& c : fairrag::top_n(store, *query.embedding, cfg.n)) arr.push_back(fairrag::candidate_to_json(c));
    write_text(a.candidates_out, ordered_json{{"candidates", arr}}.dump(2) + "\n");
  }
  const auto result = fairrag::fair_retrieve(store, query, opt);
  std::cout << fairrag::to_json(result).dump(2) << '\n';
  return 0;
}

struct SelectArgs {
  std::string candidates;
};

int cmd_select(const SelectArgs& a, const fairrag::RunConfig& cfg) {
  const json j = parse_json_file(a.candidates);
  const json& arr = j.is_object() ? j.at("candidates") : j;
  std::vector<fairrag::Candidate> cands;
  for (const auto& c : arr) cands.push_back(fairrag::candidate_from_json(c));
  std::stable_sort(cands.begin(), cands.end(), fairrag::ranks_before);
  auto result = cfg.balanced_sampling ? fairrag::balanced_select(cands, cfg.k, cfg.seed, cfg.cardinalities)
                                      : fairrag::plain_top_k(cands, cfg.k, cfg.seed);
  std::cout << fairrag::to_json(result).dump(2) << '\n';
  return 0;
}

// --- bundle ----------------------------------------------------------------

struct BundleArgs {
  std::string selection, store, projector, prompt, out_dir, backend;
  bool no_negative_prompt = false;
  int backend_timeout_ms = 30000;
  int backend_retries = 2;
};

int cmd_bundle(const BundleArgs& a, const fairrag::RunConfig& cfg) {
  const auto selection = fairrag::selection_from_json(parse_json_file(a.selection));
  const auto store = fairrag::load_store(a.store);
  const auto weights = fairrag::load_projector(a.projector);
  fairrag::BundleOptions opt;
  opt.instruction = cfg.text_instruction ? cfg.instruction : std::string();
  if (a.no_negative_prompt) opt.negative_prompt.reset();
  const auto bundles = fairrag::export_bundles(a.prompt, selection, store, weights, opt);

  fs::create_directories(a.out_dir);
  std::optional<fairrag::GenerationClient> client;
  if (!a.backend.empty()) {
    fairrag::BackendConfig bc;
    bc.base_url = a.backend;
    bc.timeout = std::chrono::milliseconds(a.backend_timeout_ms);
    bc.retries = a.backend_retries;
    client.emplace(bc);
  }
  ordered_json summary;
  auto files = ordered_json::array();
  auto generated = ordered_json::array();
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "bundle_%03zu.json", i);
    const fs::path path = fs::path(a.out_dir) / name;
    write_text(path, fairrag::to_json(bundles[i]).dump(2) + "\n");
    files.push_back(path.string());
    if (client) {
      const auto r = client->generate(bundles[i]);
      generated.push_back({{"reference_id", bundles[i].reference_id}, {"image_id", r.image_id}, {"status", r.status}});
    }
  }
  summary["bundles"] = std::move(files);
  if (client) summary["generated"] = std::move(generated);
  std::cout << summary.dump(2) << '\n';
  return 0;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string classifications, image_embeddings, text_embeddings, gen_features, real_features;
  std::string palette, gender_prompts, report_out;
  bool per_prompt_fid = false;
};

int cmd_eval(const EvalArgs& a, const fairrag::RunConfig& cfg) {
  std::optional<fairrag::MstPalette> palette;
  if (!a.palette.empty()) palette = fairrag::load_palette(a.palette);
  std::optional<fairrag::EmbeddingStore> images;
  if (!a.image_embeddings.empty()) images = fairrag::load_store(a.image_embeddings);

  fairrag::ClassifierContext ctx;
  ctx.palette = palette ? &*palette : nullptr;
  ctx.images = images ? &*images : nullptr;
  if (!a.gender_prompts.empty()) {
    const json gp = parse_json_file(a.gender_prompts);
    ctx.gender_prompts.emplace(to_floats(gp.at("male"), "male prompt"), to_floats(gp.at("female"), "female prompt"));
  }

  fairrag::EvalInputs in;
  in.classifications = fairrag::read_classifications(a.classifications, ctx);
  if (images) {
    if (a.text_embeddings.empty())
      throw fairrag::Error(fairrag::ErrorCode::InvalidArgument, "--image-embeddings needs --text-embeddings");
    in.image_embeddings = fairrag::gather_image_embeddings(in.classifications, *images);
    in.text_embeddings = fairrag::text_embeddings_by_id(fairrag::load_store(a.text_embeddings));
  }
  if (a.gen_features.empty() != a.real_features.empty())
    throw fairrag::Error(fairrag::ErrorCode::InvalidArgument, "--gen-features and --real-features go together");
  if (!a.gen_features.empty()) {
    in.generated_features = fairrag::read_feature_set(a.gen_features);
    in.real_features = fairrag::read_feature_set(a.real_features);
  }
  fairrag::EvalConfig ec;
  ec.cardinalities = cfg.cardinalities;
  ec.per_prompt_fid = a.per_prompt_fid;
  const std::string report = fairrag::to_json(fairrag::evaluate_prompt_set(in, ec)).dump(2) + "\n";
  if (!a.report_out.empty()) write_text(a.report_out, report);
  std::cout << report;
  return 0;
}

// --- ablation-demo -----------------------------------------------------------

struct AblationArgs {
  fairrag::AblationConfig cfg;
  std::string json_out;
  std::string format = "table";
};

int cmd_ablation(AblationArgs a, const fairrag::RunConfig& run) {
  a.cfg.n = run.n;
  a.cfg.k = run.k;
  a.cfg.master_seed = run.seed;
  const auto rows = fairrag::run_ablation(a.cfg);
  const auto j = fairrag::to_json(a.cfg, rows);
  if (!a.json_out.empty()) write_text(a.json_out, j.dump(2) + "\n");
  if (a.format == "json") {
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  std::printf("%-22s %-9s %-9s %10s %10s\n", "variant", "debiased", "balanced", "mean", "std");
  for (const auto& r : rows)
    std::printf("%-22s %-9s %-9s %10.4f %10.4f\n", r.variant.name.c_str(), r.variant.debiased_query ? "yes" : "no",
                r.variant.balanced_sampling ? "yes" : "no", r.mean, r.stddev);
  std::printf("intersectional diversity over %zu seeds, majority fraction %.2f, N=%zu K=%d\n", a.cfg.seeds,
              a.cfg.majority_fraction, a.cfg.n, a.cfg.k);
  return 0;
}

int cmd_prompts(const std::string& prefix) {
  auto arr = ordered_json::array();
  for (const auto& e : fairrag::prompt_set(prefix))
    arr.push_back({{"text", e.text}, {"profession", e.profession}, {"category", fairrag::to_string(e.category)}});
  std::cout << arr.dump(2) << '\n';
  return 0;
}

void add_selection_flags(CLI::App* cmd, fairrag::RunConfig& cfg) {
  cmd->add_option("--n", cfg.n, "Top-N candidates to retrieve")->capture_default_str();
  cmd->add_option("--k", cfg.k, "references to select")->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "selection seed")->capture_default_str();
  cmd->add_option("--n-age", cfg.cardinalities.age, "number of age groups");
  cmd->add_option("--n-gender", cfg.cardinalities.gender, "number of gender groups");
  cmd->add_option("--n-skin", cfg.cardinalities.skin, "number of skin tone groups");
  cmd->add_flag_callback("--no-balanced-sampling", [&cfg] { cfg.balanced_sampling = false; },
                         "take the first K by similarity");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair reference retrieval, conditioning export and diversity evaluation"};
  app.require_subcommand(1);

  fairrag::RunConfig cfg;
  try {
    cfg = fairrag::run_config_from_env();
  } catch (const std::exception& e) {
    std::cerr << "error: FAIRRAG_CONFIG: " << e.what() << '\n';
    return 1;
  }

  auto* index = app.add_subcommand("index", "embedding store management");
  index->require_subcommand(1);
  IndexArgs index_args;
  auto* build = index->add_subcommand("build", "build a store from JSONL embeddings and annotations");
  build->add_option("--embeddings", index_args.embeddings, "JSONL of {\"id\", \"embedding\"}")->required();
  build->add_option("--annotations", index_args.annotations, "JSONL annotation sidecar");
  build->add_option("--out", index_args.out, "output store path")->required();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "write a synthetic annotated store");
  synth->add_option("--out,--store", synth_args.out, "output store path")->required();
  synth->add_option("--count", synth_args.count)->capture_default_str();
  synth->add_option("--dim", synth_args.dim)->capture_default_str();
  synth->add_option("--majority", synth_args.majority, "majority group fraction, 0 for uniform")->capture_default_str();
  synth->add_option("--noise", synth_args.noise)->capture_default_str();
  synth->add_option("--centroid-weight", synth_args.centroid_weight)->capture_default_str();
  synth->add_option("--seed", cfg.seed)->capture_default_str();
  synth->add_option("--query-out", synth_args.query_out, "write the shared concept direction as a query");

  RetrieveArgs retrieve_args;
  auto* retrieve = app.add_subcommand("retrieve", "debiased Top-N retrieval and Top-K selection");
  retrieve->add_option("--store", retrieve_args.store)->required();
  retrieve->add_option("--query", retrieve_args.query,
                       "JSON array, or object mapping query text to embedding")->required();
  retrieve->add_option("--prompt", retrieve_args.prompt)->required();
  retrieve->add_option("--suffix", cfg.suffix, "debiasing suffix")->capture_default_str();
  retrieve->add_flag_callback("--no-debiased-query", [&cfg] { cfg.debiased_query = false; });
  retrieve->add_option("--candidates-out", retrieve_args.candidates_out, "also write the Top-N candidates");
  add_selection_flags(retrieve, cfg);

  SelectArgs select_args;
  auto* select = app.add_subcommand("select", "Top-K selection over a candidate list");
  select->add_option("--candidates", select_args.candidates)->required();
  add_selection_flags(select, cfg);

  BundleArgs bundle_args;
  auto* bundle = app.add_subcommand("bundle", "export conditioning bundles for the selected references");
  bundle->add_option("--selection", bundle_args.selection)->required();
  bundle->add_option("--store", bundle_args.store)->required();
  bundle->add_option("--projector", bundle_args.projector)->required();
  bundle->add_option("--prompt", bundle_args.prompt)->required();
  bundle->add_option("--out-dir", bundle_args.out_dir)->required();
  bundle->add_option("--instruction", cfg.instruction)->capture_default_str();
  bundle->add_flag_callback("--no-text-instruction", [&cfg] { cfg.text_instruction = false; });
  bundle->add_flag("--no-negative-prompt", bundle_args.no_negative_prompt);
  bundle->add_option("--backend", bundle_args.backend, "generation backend base URL");
  bundle->add_option("--backend-timeout-ms", bundle_args.backend_timeout_ms)->capture_default_str();
  bundle->add_option("--backend-retries", bundle_args.backend_retries)->capture_default_str();

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "diversity, CLIP score and FID report");
  eval->add_option("--classifications", eval_args.classifications)->required();
  eval->add_option("--image-embeddings", eval_args.image_embeddings, "store keyed by image id");
  eval->add_option("--text-embeddings", eval_args.text_embeddings, "store keyed by prompt text");
  eval->add_option("--gen-features", eval_args.gen_features, "FRG1 features of generated images");
  eval->add_option("--real-features", eval_args.real_features, "FRG1 features of real images");
  eval->add_flag("--per-prompt-fid", eval_args.per_prompt_fid);
  eval->add_option("--palette", eval_args.palette, "Monk palette JSON for face_pixels records");
  eval->add_option("--gender-prompts", eval_args.gender_prompts, "JSON {\"male\": [...], \"female\": [...]}");
  eval->add_option("--report-out", eval_args.report_out);
  eval->add_option("--n-age", cfg.cardinalities.age);
  eval->add_option("--n-gender", cfg.cardinalities.gender);
  eval->add_option("--n-skin", cfg.cardinalities.skin);

  AblationArgs ablation_args;
  auto* ablation = app.add_subcommand("ablation-demo", "compare selection variants on skewed synthetic stores");
  ablation->add_option("--seeds", ablation_args.cfg.seeds)->capture_default_str();
  ablation->add_option("--majority", ablation_args.cfg.majority_fraction)->capture_default_str();
  ablation->add_option("--store-size", ablation_args.cfg.store_size)->capture_default_str();
  ablation->add_option("--dim", ablation_args.cfg.dim)->capture_default_str();
  ablation->add_option("--query-bias", ablation_args.cfg.query_bias)->capture_default_str();
  ablation->add_option("--n", cfg.n)->capture_default_str();
  ablation->add_option("--k", cfg.k)->capture_default_str();
  ablation->add_option("--seed", cfg.seed)->capture_default_str();
  ablation->add_option("--json-out", ablation_args.json_out);
  ablation->add_option("--format", ablation_args.format)->check(CLI::IsMember({"table", "json"}));

  std::string template_prefix(fairrag::kPhotoTemplate);
  auto* prompts = app.add_subcommand("prompts", "print the evaluation prompt set");
  prompts->add_option("--template", template_prefix)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (build->parsed()) return cmd_index_build(index_args);
    if (synth->parsed()) return cmd_synth(synth_args, cfg.seed);
    if (retrieve->parsed()) return cmd_retrieve(retrieve_args, cfg);
    if (select->parsed()) return cmd_select(select_args, cfg);
    if (bundle->parsed()) return cmd_bundle(bundle_args, cfg);
    if (eval->parsed()) return cmd_eval(eval_args, cfg);
    if (ablation->parsed()) return cmd_ablation(ablation_args, cfg);
    if (prompts->parsed()) return cmd_prompts(template_prefix);
  } catch (const fairrag::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
