#include "mrphe/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mrphe/errors.hpp"
#include "mrphe/rng.hpp"

namespace mrphe {

namespace {

const char* kModeNames[] = {"full", "basic_prompts", "single_scale", "global_only", "patch_only", "average_weighting"};

std::string backend_name(Backend b) {
  switch (b) {
    case Backend::Mock: return "mock";
    case Backend::Table: return "table";
    case Backend::Store: return "store";
    case Backend::Remote: return "remote";
  }
  return "mock";
}

Backend parse_backend(const std::string& s) {
  if (s == "mock") return Backend::Mock;
  if (s == "table") return Backend::Table;
  if (s == "store") return Backend::Store;
  if (s == "remote") return Backend::Remote;
  throw ConfigError("backend: expected one of mock|table|store|remote, got '" + s + "'");
}

TextWeighting parse_text_weighting(const std::string& s) {
  if (s == "softmax") return TextWeighting::Softmax;
  if (s == "average") return TextWeighting::Average;
  throw ConfigError("text_weighting: expected 'softmax' or 'average', got '" + s + "'");
}

std::size_t placeholder_count(const std::string& s) {
  std::size_t n = 0;
  for (auto pos = s.find("{}"); pos != std::string::npos; pos = s.find("{}", pos + 2)) ++n;
  return n;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

AblationMode parse_ablation_mode(const std::string& s) {
  for (int i = 0; i < 6; ++i)
    if (s == kModeNames[i]) return static_cast<AblationMode>(i);
  throw ConfigError("ablation: unknown mode '" + s +
                    "' (expected full|basic_prompts|single_scale|global_only|patch_only|average_weighting)");
}

std::string to_string(AblationMode m) { return kModeNames[static_cast<int>(m)]; }

std::vector<AblationMode> parse_ablation_list(const std::string& s) {
  std::vector<AblationMode> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(parse_ablation_mode(item));
  if (out.empty()) out.push_back(AblationMode::Full);
  return out;
}

void PipelineConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha: must lie in [0, 1] (got " + fmt(alpha) + ")");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau: must be > 0 (got " + fmt(tau) + ")");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta: must be >= 0 (got " + fmt(beta) + ")");
  if (k < 1) throw ConfigError("k: must be >= 1 (got " + std::to_string(k) + ")");
  if (mock_dim < 1) throw ConfigError("mock_dim: must be >= 1");
  if (!(val_fraction >= 0.0 && val_fraction <= 1.0))
    throw ConfigError("val_fraction: must lie in [0, 1] (got " + fmt(val_fraction) + ")");
  if (placeholder_count(reference_template) != 1)
    throw ConfigError("reference_template: must contain exactly one {} placeholder");
  plan().validate();
  for (auto m : parse_ablation_list(ablation)) (void)m;
  if (backend == Backend::Table && table.empty()) throw ConfigError("table: required with --backend table");
  if (backend == Backend::Store && store.empty()) throw ConfigError("store: required with --backend store");
}

PatchPlan PipelineConfig::plan() const {
  return {scales, patches_per_scale, crop_fraction_min, crop_fraction_max, min_crop_px, seed};
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"alpha", alpha},
          {"tau", tau},
          {"beta", beta},
          {"k", k},
          {"scales", scales},
          {"patches_per_scale", patches_per_scale},
          {"crop_fraction_min", crop_fraction_min},
          {"crop_fraction_max", crop_fraction_max},
          {"min_crop_px", min_crop_px},
          {"seed", seed},
          {"backend", backend_name(backend)},
          {"remote_url", remote_url},
          {"table", table},
          {"store", store},
          {"mock_dim", mock_dim},
          {"lexicon", lexicon},
          {"manifest", manifest},
          {"val_manifest", val_manifest},
          {"val_fraction", val_fraction},
          {"ablation", ablation},
          {"global_in_attention", global_in_attention},
          {"f1_average", to_string(f1_average)},
          {"text_weighting", text_weighting == TextWeighting::Softmax ? "softmax" : "average"},
          {"reference_template", reference_template},
          {"dump_attention", dump_attention},
          {"provenance", provenance},
          {"out", out}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  PipelineConfig c;
  const auto known = c.to_json();
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("alpha", c.alpha);
    get("tau", c.tau);
    get("beta", c.beta);
    get("k", c.k);
    get("scales", c.scales);
    get("patches_per_scale", c.patches_per_scale);
    get("crop_fraction_min", c.crop_fraction_min);
    get("crop_fraction_max", c.crop_fraction_max);
    get("min_crop_px", c.min_crop_px);
    get("seed", c.seed);
    if (j.contains("backend")) c.backend = parse_backend(j.at("backend").get<std::string>());
    get("remote_url", c.remote_url);
    get("table", c.table);
    get("store", c.store);
    get("mock_dim", c.mock_dim);
    get("lexicon", c.lexicon);
    get("manifest", c.manifest);
    get("val_manifest", c.val_manifest);
    get("val_fraction", c.val_fraction);
    get("ablation", c.ablation);
    get("global_in_attention", c.global_in_attention);
    if (j.contains("f1_average")) c.f1_average = parse_f1_average(j.at("f1_average").get<std::string>());
    if (j.contains("text_weighting")) c.text_weighting = parse_text_weighting(j.at("text_weighting").get<std::string>());
    get("reference_template", c.reference_template);
    get("dump_attention", c.dump_attention);
    get("provenance", c.provenance);
    get("out", c.out);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return from_json(j);
}

std::string PipelineConfig::hash() const {
  auto j = to_json();
  j.erase("out");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

PipelineConfig apply_ablation(PipelineConfig config, AblationMode mode) {
  config.ablation = to_string(mode);
  return config;
}

}  // namespace mrphe
