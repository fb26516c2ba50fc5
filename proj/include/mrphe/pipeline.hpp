#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrphe/classification.hpp"
#include "mrphe/config.hpp"
#include "mrphe/encoder.hpp"
#include "mrphe/hybrid.hpp"
#include "mrphe/manifest.hpp"
#include "mrphe/metrics.hpp"
#include "mrphe/prompting.hpp"
#include "mrphe/store.hpp"

namespace mrphe {

// Concrete switches for one pipeline run after applying the ablation mode.
struct RunOptions {
  PatchPlan plan;
  double alpha = 0.5;
  double tau = 1.5;
  double beta = 2.0;
  int k = 30;
  bool basic_prompts = false;
  bool uniform_patch_weights = false;
  bool global_in_attention = false;
  TextWeighting text_weighting = TextWeighting::Softmax;
  std::string reference_template{kReferenceTemplate};
};

// Requires config.ablation to name exactly one mode.
RunOptions resolve_options(const PipelineConfig& config);

std::unique_ptr<Encoder> make_encoder(const PipelineConfig& config);

// --- stage: embed -----------------------------------------------------------

// Raw embeddings of each original (key = id) and, when with_patches, of every patch
// (key = "<id>#<k>"). Provenance records are appended when `provenance` is non-null.
void embed_images(std::span<const ImageRef> images, const PatchPlan& plan, const Encoder& encoder, bool with_patches,
                  EmbeddingStore& store, nlohmann::json* provenance = nullptr);

// --- stage: prompt bank -----------------------------------------------------

struct PromptBankSpec {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::string>> prompts;  // empty per class in basic-prompts mode
  std::vector<std::string> references;

  nlohmann::json to_json() const;
  static PromptBankSpec from_json(const nlohmann::json& j);
};

// Generates every class's prompts and the reference prompts, and encodes them into `text_store`
// keyed by prompt text.
PromptBankSpec build_prompt_bank(const Lexicon& lexicon, const Encoder& encoder, const RunOptions& options,
                                 EmbeddingStore& text_store);

// --- stage: selection -------------------------------------------------------

struct ClassSelection {
  std::string class_name;
  std::string reference_prompt;
  std::vector<std::string> texts;
  std::vector<std::size_t> bank_indices;
  std::vector<std::optional<double>> scores;
  std::vector<double> weights;
  std::string score_source;
};

struct Selection {
  std::vector<ClassSelection> classes;
  double beta = 2.0;
  int k = 30;
  std::string text_weighting = "softmax";
  bool basic_prompts = false;
  std::string config_hash;

  std::vector<std::string> class_names() const;
  nlohmann::json to_json() const;
  static Selection from_json(const nlohmann::json& j);
};

UnitRows<double> load_unit_rows(const EmbeddingStore& store, std::span<const std::string> keys);

// Scores, selects the top K and assigns text weights. Validation images are given by their
// global embeddings (normalized) and label indices.
Selection select_prompts(const PromptBankSpec& bank, const EmbeddingStore& text_store,
                         const UnitRows<double>& val_global, std::span<const int> val_labels,
                         const RunOptions& options);

// t_c = normalize(sum_j v_j t_cj), rebuilt from the selection and the prompt embeddings.
UnitRows<double> assemble_class_embeddings(const Selection& selection, const EmbeddingStore& text_store);

// --- stage: classify --------------------------------------------------------

struct PredictionSet {
  std::vector<std::string> ids;  // sorted
  std::vector<std::string> class_names;
  RowMatrix<double> similarity;
  Classified<double> classified;
  std::vector<Vector<double>> attention;  // per image; empty when no attention rows
};

PredictionSet classify_images(std::vector<std::string> ids, const EmbeddingStore& image_store,
                              const UnitRows<double>& class_embeddings, const std::vector<std::string>& class_names,
                              const RunOptions& options);

std::string predictions_csv(const PredictionSet& predictions);
nlohmann::json attention_json(const PredictionSet& predictions);

struct PredictionRow {
  std::string image_id;
  std::string predicted_class;
  std::vector<double> probabilities;
  bool tie_broken = false;
};

struct PredictionsFile {
  std::vector<std::string> class_names;
  std::vector<PredictionRow> rows;
};

PredictionsFile parse_predictions_csv(const std::string& text);
PredictionsFile read_predictions_csv(const std::filesystem::path& path);

MetricsReport evaluate_predictions(const PredictionsFile& predictions, const Manifest& truth, F1Average average);

// --- whole pipeline ---------------------------------------------------------

struct RunResult {
  PredictionSet predictions;
  Selection selection;
  MetricsReport metrics;
  EmbeddingStore image_store;
  EmbeddingStore text_store;
  nlohmann::json provenance;
};

// Patches -> embeddings -> prompt bank -> selection -> text weights -> class embeddings ->
// attention -> hybrid -> similarity -> temperature softmax -> argmax.
RunResult run_pipeline(std::span<const ImageRef> images, std::span<const int> labels,
                       std::span<const ImageRef> val_images, std::span<const int> val_labels, const Lexicon& lexicon,
                       const Encoder& encoder, const PipelineConfig& config);

// --- ablation ---------------------------------------------------------------

struct AblationRow {
  AblationMode mode;
  MetricsReport metrics;
};

std::vector<AblationRow> run_ablation(std::span<const ImageRef> images, std::span<const int> labels,
                                      std::span<const ImageRef> val_images, std::span<const int> val_labels,
                                      const Lexicon& lexicon, const Encoder& encoder, const PipelineConfig& config,
                                      std::vector<AblationMode> modes);

// configuration,multiresolution_patches,hybrid_embedding,patch_weighting,prompt_generation_selection,
// accuracy,delta,f1
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace mrphe
