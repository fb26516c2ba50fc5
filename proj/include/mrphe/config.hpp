#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrphe/metrics.hpp"
#include "mrphe/patching.hpp"

namespace mrphe {

enum class Backend { Mock, Table, Store, Remote };
enum class TextWeighting { Softmax, Average };

// One component switched off per mode, mirroring the ablation table rows.
enum class AblationMode { Full, BasicPrompts, SingleScale, GlobalOnly, PatchOnly, AverageWeighting };

AblationMode parse_ablation_mode(const std::string& s);
std::string to_string(AblationMode m);
// Comma-separated list; empty input yields {Full}.
std::vector<AblationMode> parse_ablation_list(const std::string& s);

struct PipelineConfig {
  double alpha = 0.5;
  double tau = 1.5;
  double beta = 2.0;
  int k = 30;
  std::vector<double> scales{0.25, 0.50, 0.75};
  std::vector<int> patches_per_scale{5, 5, 5};
  double crop_fraction_min = 0.5;
  double crop_fraction_max = 0.9;
  int min_crop_px = 32;
  std::uint64_t seed = 0;

  Backend backend = Backend::Mock;
  std::string remote_url;
  std::string table;  // JSON fixture for the table backend
  std::string store;  // EMB1 file for the store backend
  int mock_dim = 512;

  std::string lexicon;
  std::string manifest;
  std::string val_manifest;
  double val_fraction = 0.0;
  std::string ablation = "full";
  bool global_in_attention = false;
  F1Average f1_average = F1Average::Macro;
  TextWeighting text_weighting = TextWeighting::Softmax;
  std::string reference_template = "a photo of a {}.";
  bool dump_attention = false;
  bool provenance = false;
  std::string out = "out";

  // Throws ConfigError naming the field and its legal range.
  void validate() const;

  PatchPlan plan() const;

  nlohmann::json to_json() const;
  // Rejects unknown keys; missing keys keep their defaults.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig from_file(const std::string& path);

  // fnv1a64 of the canonical JSON (all keys except "out"), as 16 hex digits.
  std::string hash() const;
};

// The config with exactly one component toggled for `mode`.
PipelineConfig apply_ablation(PipelineConfig config, AblationMode mode);

}  // namespace mrphe
