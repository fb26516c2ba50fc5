#include "mrphe/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mrphe/errors.hpp"

namespace mrphe {

RunOptions resolve_options(const PipelineConfig& config) {
  const auto modes = parse_ablation_list(config.ablation);
  if (modes.size() != 1) throw ConfigError("ablation: a pipeline run takes exactly one mode, got '" + config.ablation + "'");
  RunOptions o;
  o.plan = config.plan();
  o.alpha = config.alpha;
  o.tau = config.tau;
  o.beta = config.beta;
  o.k = config.k;
  o.global_in_attention = config.global_in_attention;
  o.text_weighting = config.text_weighting;
  o.reference_template = config.reference_template;
  switch (modes.front()) {
    case AblationMode::Full: break;
    case AblationMode::BasicPrompts: o.basic_prompts = true; break;
    case AblationMode::SingleScale:
      o.plan.patches_per_scale = {o.plan.total_patches()};
      o.plan.scales = {1.0};
      break;
    case AblationMode::GlobalOnly: o.alpha = 1.0; break;
    case AblationMode::PatchOnly: o.alpha = 0.0; break;
    case AblationMode::AverageWeighting: o.uniform_patch_weights = true; break;
  }
  return o;
}

std::unique_ptr<Encoder> make_encoder(const PipelineConfig& config) {
  switch (config.backend) {
    case Backend::Mock: return std::make_unique<MockEncoder>(config.mock_dim, config.seed);
    case Backend::Table: return std::make_unique<TableEncoder>(TableEncoder::from_json_file(config.table));
    case Backend::Store: return std::make_unique<TableEncoder>(TableEncoder::from_store_file(config.store));
    case Backend::Remote: {
      std::string url = config.remote_url;
      if (url.empty())
        if (const char* env = std::getenv("MRPHE_REMOTE_URL")) url = env;
      if (url.empty()) throw ConfigError("remote_url: required with --backend remote (or set MRPHE_REMOTE_URL)");
      return std::make_unique<RemoteEncoder>(url);
    }
  }
  throw ConfigError("backend: unsupported");
}

// --- embed ---------------------------------------------------------------------

void embed_images(std::span<const ImageRef> images, const PatchPlan& plan, const Encoder& encoder, bool with_patches,
                  EmbeddingStore& store, nlohmann::json* provenance) {
  const auto info = encoder.info();
  if (!info.supports_image()) throw ConfigError("encoder '" + info.model_name + "' has no image modality");
  if (static_cast<std::uint32_t>(info.dim) != store.dim())
    throw ConfigError("encoder dimension " + std::to_string(info.dim) + " does not match store dimension " +
                      std::to_string(store.dim()));
  for (const auto& image : images) {
    if (image.pixels.empty()) throw DataError("empty raster for '" + image.id + "'");
    std::vector<ImageInput> inputs{{image.id, &image.pixels}};
    PatchSet patches;
    if (with_patches) {
      patches = extract_patches(image, plan);
      for (std::size_t k = 0; k < patches.patches.size(); ++k)
        inputs.push_back({patch_key(image.id, k), &patches.patches[k].pixels});
      if (provenance) provenance->push_back(patch_provenance(patches, plan));
    }
    auto vectors = encoder.embed_images(inputs);
    if (vectors.size() != inputs.size()) throw DataError("encoder returned a short batch for '" + image.id + "'");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (vectors[i].size() != store.dim())
        throw ConfigError("encoder returned dimension " + std::to_string(vectors[i].size()) + " for '" + inputs[i].key +
                          "', pipeline expects " + std::to_string(store.dim()));
      store.upsert(inputs[i].key, std::move(vectors[i]));
    }
  }
}

// --- prompt bank -------------------------------------------------------------------

nlohmann::json PromptBankSpec::to_json() const {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < class_names.size(); ++c)
    classes.push_back({{"name", class_names[c]}, {"reference_prompt", references[c]}, {"prompts", prompts[c]}});
  return {{"classes", std::move(classes)}};
}

PromptBankSpec PromptBankSpec::from_json(const nlohmann::json& j) {
  PromptBankSpec spec;
  try {
    for (const auto& c : j.at("classes")) {
      spec.class_names.push_back(c.at("name").get<std::string>());
      spec.references.push_back(c.at("reference_prompt").get<std::string>());
      spec.prompts.push_back(c.at("prompts").get<std::vector<std::string>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("prompt bank: ") + e.what());
  }
  return spec;
}

PromptBankSpec build_prompt_bank(const Lexicon& lexicon, const Encoder& encoder, const RunOptions& options,
                                 EmbeddingStore& text_store) {
  const auto info = encoder.info();
  if (!info.supports_text()) throw ConfigError("encoder '" + info.model_name + "' has no text modality");
  if (lexicon.classes.empty()) throw ConfigError("lexicon: no classes");
  lexicon.templates.validate();

  PromptBankSpec spec;
  std::vector<std::string> pending;
  std::set<std::string> queued;
  auto queue = [&](const std::string& text) {
    if (text.empty()) throw DataError("empty prompt text");
    if (!text_store.contains(text) && queued.insert(text).second) pending.push_back(text);
  };
  for (const auto& cls : lexicon.classes) {
    spec.class_names.push_back(cls.class_name);
    spec.references.push_back(reference_prompt(cls.class_name, options.reference_template));
    spec.prompts.push_back(options.basic_prompts ? std::vector<std::string>{} : generate_prompts(cls, lexicon.templates));
    queue(spec.references.back());
    for (const auto& p : spec.prompts.back()) queue(p);
  }
  auto vectors = encoder.embed_texts(pending);
  if (vectors.size() != pending.size()) throw DataError("encoder returned a short text batch");
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (vectors[i].size() != text_store.dim())
      throw ConfigError("encoder returned dimension " + std::to_string(vectors[i].size()) + " for '" + pending[i] +
                        "', pipeline expects " + std::to_string(text_store.dim()));
    text_store.insert(pending[i], std::move(vectors[i]));
  }
  return spec;
}

// --- selection ---------------------------------------------------------------------

UnitRows<double> load_unit_rows(const EmbeddingStore& store, std::span<const std::string> keys) {
  RowMatrix<double> m(static_cast<Eigen::Index>(keys.size()), store.dim());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto* v = store.find(keys[i]);
    if (!v) throw DataError("no embedding for key '" + keys[i] + "'");
    for (std::uint32_t d = 0; d < store.dim(); ++d) m(static_cast<Eigen::Index>(i), d) = (*v)[d];
  }
  return UnitRows<double>::normalize(std::move(m), keys);
}

std::vector<std::string> Selection::class_names() const {
  std::vector<std::string> names;
  for (const auto& c : classes) names.push_back(c.class_name);
  return names;
}

nlohmann::json Selection::to_json() const {
  nlohmann::json cls = nlohmann::json::array();
  for (const auto& c : classes) {
    nlohmann::json prompts = nlohmann::json::array();
    for (std::size_t j = 0; j < c.texts.size(); ++j) {
      nlohmann::json p{{"text", c.texts[j]}, {"weight", c.weights[j]}};
      p["score"] = c.scores[j] ? nlohmann::json(*c.scores[j]) : nlohmann::json(nullptr);
      if (j < c.bank_indices.size()) p["bank_index"] = c.bank_indices[j];
      prompts.push_back(std::move(p));
    }
    cls.push_back({{"name", c.class_name},
                   {"reference_prompt", c.reference_prompt},
                   {"score_source", c.score_source},
                   {"prompts", std::move(prompts)}});
  }
  return {{"beta", beta},
          {"k", k},
          {"text_weighting", text_weighting},
          {"basic_prompts", basic_prompts},
          {"config_hash", config_hash},
          {"classes", std::move(cls)}};
}

Selection Selection::from_json(const nlohmann::json& j) {
  Selection s;
  try {
    s.beta = j.at("beta").get<double>();
    s.k = j.at("k").get<int>();
    s.text_weighting = j.at("text_weighting").get<std::string>();
    s.basic_prompts = j.at("basic_prompts").get<bool>();
    s.config_hash = j.value("config_hash", "");
    for (const auto& c : j.at("classes")) {
      ClassSelection cs;
      cs.class_name = c.at("name").get<std::string>();
      cs.reference_prompt = c.at("reference_prompt").get<std::string>();
      cs.score_source = c.value("score_source", "none");
      for (const auto& p : c.at("prompts")) {
        cs.texts.push_back(p.at("text").get<std::string>());
        cs.weights.push_back(p.at("weight").get<double>());
        const auto& score = p.at("score");
        cs.scores.push_back(score.is_null() ? std::nullopt : std::optional<double>(score.get<double>()));
        if (p.contains("bank_index")) cs.bank_indices.push_back(p.at("bank_index").get<std::size_t>());
      }
      if (cs.texts.empty()) throw DataError("selected prompts: class '" + cs.class_name + "' has no prompts");
      s.classes.push_back(std::move(cs));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("selected prompts: ") + e.what());
  }
  return s;
}

namespace {

const char* score_source_name(ScoreSource s) {
  switch (s) {
    case ScoreSource::ValidationAccuracy: return "validation_accuracy";
    case ScoreSource::MarginFallback: return "margin_fallback";
    case ScoreSource::None: break;
  }
  return "none";
}

}  // namespace

Selection select_prompts(const PromptBankSpec& bank, const EmbeddingStore& text_store,
                         const UnitRows<double>& val_global, std::span<const int> val_labels,
                         const RunOptions& options) {
  Selection out;
  out.beta = options.beta;
  out.k = options.k;
  out.text_weighting = options.text_weighting == TextWeighting::Softmax ? "softmax" : "average";
  out.basic_prompts = options.basic_prompts;

  const auto C = bank.class_names.size();
  if (options.basic_prompts) {
    for (std::size_t c = 0; c < C; ++c)
      out.classes.push_back({bank.class_names[c], bank.references[c], {bank.references[c]}, {}, {std::nullopt}, {1.0}, "none"});
    return out;
  }

  PromptBank<double> prompt_bank;
  for (std::size_t c = 0; c < C; ++c) {
    if (bank.prompts[c].empty()) throw ConfigError("class '" + bank.class_names[c] + "' has an empty prompt bank");
    prompt_bank.classes.push_back({bank.class_names[c], bank.prompts[c], load_unit_rows(text_store, bank.prompts[c]),
                                   std::vector<std::optional<double>>(bank.prompts[c].size()), ScoreSource::None});
  }
  const auto references = load_unit_rows(text_store, bank.references);
  score_prompts(prompt_bank, val_global, val_labels, references);
  auto selected = select_top_k(prompt_bank, options.k);

  for (std::size_t c = 0; c < C; ++c) {
    auto& sel = selected[c];
    const auto K = sel.embeddings.rows();
    Vector<double> weights = options.text_weighting == TextWeighting::Softmax
                                 ? text_weights(sel.embeddings, references.row(static_cast<Eigen::Index>(c)), options.beta)
                                 : Vector<double>::Constant(K, 1.0 / static_cast<double>(K));
    out.classes.push_back({sel.class_name, bank.references[c], sel.texts, sel.indices, sel.scores,
                           std::vector<double>(weights.data(), weights.data() + weights.size()),
                           score_source_name(prompt_bank.classes[c].score_source)});
  }
  return out;
}

UnitRows<double> assemble_class_embeddings(const Selection& selection, const EmbeddingStore& text_store) {
  RowMatrix<double> m(static_cast<Eigen::Index>(selection.classes.size()), text_store.dim());
  for (std::size_t c = 0; c < selection.classes.size(); ++c) {
    const auto& cls = selection.classes[c];
    if (cls.weights.size() != cls.texts.size())
      throw DataError("selected prompts: weight count mismatch for class '" + cls.class_name + "'");
    const auto rows = load_unit_rows(text_store, cls.texts);
    const Vector<double> w = Eigen::Map<const Vector<double>>(cls.weights.data(), static_cast<Eigen::Index>(cls.weights.size()));
    m.row(static_cast<Eigen::Index>(c)) = class_embedding(rows, w, cls.class_name).values().transpose();
  }
  return UnitRows<double>::checked(std::move(m));
}

// --- classify ------------------------------------------------------------------------

PredictionSet classify_images(std::vector<std::string> ids, const EmbeddingStore& image_store,
                              const UnitRows<double>& class_embeddings, const std::vector<std::string>& class_names,
                              const RunOptions& options) {
  if (class_embeddings.rows() < 1) throw ConfigError("no classes to classify against");
  if (static_cast<std::size_t>(class_embeddings.rows()) != class_names.size())
    throw ConfigError("class name count does not match class embeddings");
  if (class_embeddings.dim() != static_cast<Eigen::Index>(image_store.dim()))
    throw ConfigError("class embedding dimension " + std::to_string(class_embeddings.dim()) +
                      " does not match image embedding dimension " + std::to_string(image_store.dim()));
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw DataError("duplicate image id");

  PredictionSet out;
  out.ids = std::move(ids);
  out.class_names = class_names;
  const auto n_patches = static_cast<std::size_t>(options.plan.total_patches());

  std::vector<Embedding<double>> hybrids;
  hybrids.reserve(out.ids.size());
  for (const auto& id : out.ids) {
    const std::string global_key[] = {id};
    const auto global = load_unit_rows(image_store, global_key).row(0);

    std::vector<std::string> keys;
    for (std::size_t k = 0; k < n_patches; ++k) keys.push_back(patch_key(id, k));
    if (options.global_in_attention) keys.push_back(id);

    Vector<double> e_patch = Vector<double>::Zero(global.dim());
    Vector<double> weights;
    // alpha == 1 makes the patch term vanish; skip the lookups.
    if (!keys.empty() && options.alpha < 1.0) {
      const auto rows = load_unit_rows(image_store, keys);
      weights = options.uniform_patch_weights ? uniform_attention(rows).weights
                                              : patch_attention(rows, class_embeddings).weights;
      e_patch = aggregate_patches(rows, weights);
    }
    out.attention.push_back(std::move(weights));
    hybrids.push_back(hybrid_embedding(global, e_patch, options.alpha, id).h);
  }

  const auto H = UnitRows<double>::from(hybrids);
  out.similarity = out.ids.empty() ? RowMatrix<double>(0, class_embeddings.rows())
                                   : similarity_matrix(H, class_embeddings);
  out.classified = classify(out.similarity, options.tau);
  return out;
}

std::string predictions_csv(const PredictionSet& p) {
  std::string out = "image_id,predicted_class";
  for (const auto& c : p.class_names) out += "," + csv_escape("probability_" + c);
  out += ",tie_broken\n";
  char buf[32];
  for (std::size_t n = 0; n < p.ids.size(); ++n) {
    const auto& choice = p.classified.labels[n];
    out += csv_escape(p.ids[n]) + "," + csv_escape(p.class_names[static_cast<std::size_t>(choice.label)]);
    for (Eigen::Index c = 0; c < p.classified.probabilities.cols(); ++c) {
      std::snprintf(buf, sizeof buf, ",%.6f", p.classified.probabilities(static_cast<Eigen::Index>(n), c));
      out += buf;
    }
    out += choice.tie_broken ? ",true\n" : ",false\n";
  }
  return out;
}

nlohmann::json attention_json(const PredictionSet& p) {
  nlohmann::json out = nlohmann::json::object();
  for (std::size_t n = 0; n < p.ids.size(); ++n) {
    const auto& w = p.attention[n];
    out[p.ids[n]] = std::vector<double>(w.data(), w.data() + w.size());
  }
  return out;
}

PredictionsFile parse_predictions_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("predictions: empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "image_id" || header[1] != "predicted_class" || header.back() != "tie_broken")
    throw DataError("predictions: unexpected header");
  PredictionsFile out;
  const std::string prefix = "probability_";
  for (std::size_t i = 2; i + 1 < header.size(); ++i) {
    if (header[i].rfind(prefix, 0) != 0) throw DataError("predictions: bad column '" + header[i] + "'");
    out.class_names.push_back(header[i].substr(prefix.size()));
  }
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw DataError("predictions: wrong field count at line " + std::to_string(lineno));
    PredictionRow row{f[0], f[1], {}, f.back() == "true"};
    for (std::size_t i = 2; i + 1 < f.size(); ++i) {
      try {
        row.probabilities.push_back(std::stod(f[i]));
      } catch (const std::exception&) {
        throw DataError("predictions: bad probability at line " + std::to_string(lineno));
      }
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

PredictionsFile read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_predictions_csv(ss.str());
}

MetricsReport evaluate_predictions(const PredictionsFile& predictions, const Manifest& truth, F1Average average) {
  const auto truth_labels = truth.label_indices(predictions.class_names);
  std::vector<IdLabel> t, p;
  for (std::size_t i = 0; i < truth.rows.size(); ++i) t.push_back({truth.rows[i].path, truth_labels[i]});
  std::map<std::string, int> index;
  for (std::size_t c = 0; c < predictions.class_names.size(); ++c) index[predictions.class_names[c]] = static_cast<int>(c);
  for (const auto& row : predictions.rows) {
    auto it = index.find(row.predicted_class);
    if (it == index.end()) throw DataError("predictions: unknown class '" + row.predicted_class + "'");
    p.push_back({row.image_id, it->second});
  }
  return compute_metrics(p, t, predictions.class_names, average);
}

// --- whole pipeline ------------------------------------------------------------------

RunResult run_pipeline(std::span<const ImageRef> images, std::span<const int> labels,
                       std::span<const ImageRef> val_images, std::span<const int> val_labels, const Lexicon& lexicon,
                       const Encoder& encoder, const PipelineConfig& config) {
  config.validate();
  const auto options = resolve_options(config);
  const auto info = encoder.info();
  if (info.dim < 1) throw ConfigError("encoder reports dim < 1");
  if (!labels.empty() && labels.size() != images.size()) throw ConfigError("labels must match images");
  if (val_labels.size() != val_images.size()) throw ConfigError("validation labels must match validation images");

  RunResult r{{}, {}, {}, EmbeddingStore(static_cast<std::uint32_t>(info.dim)),
              EmbeddingStore(static_cast<std::uint32_t>(info.dim)), nlohmann::json::array()};
  embed_images(images, options.plan, encoder, true, r.image_store, &r.provenance);

  std::vector<std::string> val_ids;
  std::vector<int> val_y;
  if (!val_images.empty()) {
    embed_images(val_images, options.plan, encoder, false, r.image_store);
    for (std::size_t i = 0; i < val_images.size(); ++i) {
      val_ids.push_back(val_images[i].id);
      val_y.push_back(val_labels[i]);
    }
  } else if (config.val_fraction > 0.0 && !labels.empty()) {
    Manifest m;
    for (std::size_t i = 0; i < images.size(); ++i) m.rows.push_back({images[i].id, std::to_string(labels[i])});
    for (const auto& row : validation_subset(m, config.val_fraction, config.seed).rows) {
      val_ids.push_back(row.path);
      val_y.push_back(std::stoi(row.label));
    }
  }

  const auto bank = build_prompt_bank(lexicon, encoder, options, r.text_store);
  const auto val_global = load_unit_rows(r.image_store, val_ids);
  r.selection = select_prompts(bank, r.text_store, val_global, val_y, options);
  r.selection.config_hash = config.hash();
  const auto classes = assemble_class_embeddings(r.selection, r.text_store);

  std::vector<std::string> ids;
  for (const auto& img : images) ids.push_back(img.id);
  r.predictions = classify_images(std::move(ids), r.image_store, classes, bank.class_names, options);

  if (!labels.empty()) {
    std::vector<IdLabel> truth, predicted;
    for (std::size_t i = 0; i < images.size(); ++i) truth.push_back({images[i].id, labels[i]});
    for (std::size_t n = 0; n < r.predictions.ids.size(); ++n)
      predicted.push_back({r.predictions.ids[n], static_cast<int>(r.predictions.classified.labels[n].label)});
    r.metrics = compute_metrics(predicted, truth, bank.class_names, config.f1_average);
  }
  return r;
}

// --- ablation ------------------------------------------------------------------------

std::vector<AblationRow> run_ablation(std::span<const ImageRef> images, std::span<const int> labels,
                                      std::span<const ImageRef> val_images, std::span<const int> val_labels,
                                      const Lexicon& lexicon, const Encoder& encoder, const PipelineConfig& config,
                                      std::vector<AblationMode> modes) {
  if (modes.empty()) modes.push_back(AblationMode::Full);
  if (labels.size() != images.size()) throw ConfigError("ablation needs a label for every image");
  std::vector<AblationRow> rows;
  for (auto mode : modes) {
    auto result = run_pipeline(images, labels, val_images, val_labels, lexicon, encoder, apply_ablation(config, mode));
    rows.push_back({mode, std::move(result.metrics)});
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  // multiresolution, hybrid, patch weighting, prompt generation & selection
  auto flags = [](AblationMode m) -> std::array<bool, 4> {
    switch (m) {
      case AblationMode::Full: return {true, true, true, true};
      case AblationMode::BasicPrompts: return {true, true, true, false};
      case AblationMode::SingleScale: return {false, true, true, true};
      case AblationMode::GlobalOnly: return {true, false, true, true};
      case AblationMode::PatchOnly: return {true, false, true, true};
      case AblationMode::AverageWeighting: return {true, true, false, true};
    }
    return {};
  };
  std::optional<double> full;
  for (const auto& r : rows)
    if (r.mode == AblationMode::Full) full = r.metrics.accuracy;

  std::string out =
      "configuration,multiresolution_patches,hybrid_embedding,patch_weighting,prompt_generation_selection,accuracy,delta,"
      "f1\n";
  char buf[64];
  for (const auto& r : rows) {
    out += to_string(r.mode);
    for (bool f : flags(r.mode)) out += f ? ",yes" : ",no";
    std::snprintf(buf, sizeof buf, ",%.2f", 100.0 * r.metrics.accuracy);
    out += buf;
    if (full) {
      std::snprintf(buf, sizeof buf, ",%.2f", 100.0 * (r.metrics.accuracy - *full));
      out += buf;
    } else {
      out += ",";
    }
    std::snprintf(buf, sizeof buf, ",%.2f\n", 100.0 * r.metrics.f1());
    out += buf;
  }
  return out;
}

}  // namespace mrphe
