#include "mrphe/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include "mrphe/errors.hpp"
#include "mrphe/pipeline.hpp"
#include "mrphe/planted.hpp"

namespace fs = std::filesystem;

namespace mrphe {

namespace {

// Registers config flags on a subcommand. Every flag maps onto the config key of the same
// name, so `--val-fraction` overrides "val_fraction" from --config.
class ConfigFlags {
 public:
  explicit ConfigFlags(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "JSON config file")->check(CLI::ExistingFile);
  }

  template <class T>
  ConfigFlags& value(const std::string& flag, const std::string& help) {
    auto v = std::make_shared<T>();
    auto* opt = app_->add_option(flag, *v, help);
    if constexpr (requires { typename T::value_type; } && !std::is_same_v<T, std::string>) opt->delimiter(',');
    appliers_.push_back([opt, v, key = key_of(flag)](nlohmann::json& j) {
      if (opt->count()) j[key] = *v;
    });
    return *this;
  }

  ConfigFlags& flag(const std::string& flag, const std::string& help) {
    auto* opt = app_->add_flag(flag, help);
    appliers_.push_back([opt, key = key_of(flag)](nlohmann::json& j) {
      if (opt->count()) j[key] = true;
    });
    return *this;
  }

  PipelineConfig resolve() const {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path_.empty()) j = PipelineConfig::from_file(config_path_).to_json();
    for (const auto& apply : appliers_) apply(j);
    auto config = PipelineConfig::from_json(j);
    config.validate();
    return config;
  }

 private:
  static std::string key_of(std::string flag) {
    flag.erase(0, flag.find_first_not_of('-'));
    for (auto& ch : flag)
      if (ch == '-') ch = '_';
    return flag;
  }

  CLI::App* app_;
  std::string config_path_;
  std::vector<std::function<void(nlohmann::json&)>> appliers_;
};

void add_model_flags(ConfigFlags& f) {
  f.value<double>("--alpha", "hybrid weight in [0, 1]")
      .value<double>("--tau", "softmax temperature (> 0)")
      .value<double>("--beta", "text weight sharpness (>= 0)")
      .value<int>("--k", "prompts kept per class")
      .value<std::vector<double>>("--scales", "patch scales, comma-separated")
      .value<std::vector<int>>("--patches-per-scale", "patches per scale, comma-separated")
      .value<double>("--crop-fraction-min", "smallest crop side fraction")
      .value<double>("--crop-fraction-max", "largest crop side fraction")
      .value<int>("--min-crop-px", "smallest crop side in pixels")
      .value<std::uint64_t>("--seed", "random seed")
      .value<std::string>("--backend", "mock|table|store|remote")
      .value<std::string>("--remote-url", "encoder service URL (falls back to MRPHE_REMOTE_URL)")
      .value<std::string>("--table", "JSON fixture table for the table backend")
      .value<std::string>("--store", "EMB1 file for the store backend")
      .value<int>("--mock-dim", "mock encoder dimension")
      .value<std::string>("--lexicon", "lexicon JSON")
      .value<std::string>("--manifest", "image manifest CSV (path,label)")
      .value<std::string>("--val-manifest", "validation manifest CSV")
      .value<double>("--val-fraction", "fraction of the manifest used for prompt scoring")
      .value<std::string>("--ablation", "full|basic_prompts|single_scale|global_only|patch_only|average_weighting")
      .flag("--global-in-attention", "let the original image take part in patch attention")
      .value<std::string>("--f1-average", "macro|weighted")
      .value<std::string>("--text-weighting", "softmax|average")
      .value<std::string>("--reference-template", "reference prompt template")
      .flag("--dump-attention", "write attention.json")
      .flag("--provenance", "write patches.json")
      .value<std::string>("--out", "output directory");
}

// --- artifact I/O ----------------------------------------------------------------

void write_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << text;
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_atomic(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

const std::string& require(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string(key) + ": required by this command");
  return value;
}

std::vector<ImageRef> load_images(const Manifest& m) {
  std::vector<ImageRef> out;
  out.reserve(m.rows.size());
  for (const auto& row : m.rows) {
    const auto path = m.resolve(row);
    out.push_back({row.path, load_image(path), path.string()});
  }
  return out;
}

// Validation rows: the validation manifest when given, else a deterministic subset of the
// main manifest, else none.
Manifest validation_rows(const PipelineConfig& c, const Manifest& main) {
  if (!c.val_manifest.empty()) return read_manifest(c.val_manifest);
  if (c.val_fraction > 0.0) return validation_subset(main, c.val_fraction, c.seed);
  return {};
}

nlohmann::json stamped(nlohmann::json j, const PipelineConfig& c) {
  j["config_hash"] = c.hash();
  return j;
}

fs::path out_dir(const PipelineConfig& c) { return fs::path(c.out); }

// --- commands -----------------------------------------------------------------------

void cmd_run(const PipelineConfig& c) {
  const auto lexicon = read_lexicon(require(c.lexicon, "lexicon"));
  const auto manifest = read_manifest(require(c.manifest, "manifest"));
  const auto names = lexicon.class_names();
  const auto images = load_images(manifest);
  const auto labels = manifest.label_indices(names);

  std::vector<ImageRef> val_images;
  std::vector<int> val_labels;
  if (!c.val_manifest.empty()) {
    const auto vm = read_manifest(c.val_manifest);
    val_images = load_images(vm);
    val_labels = vm.label_indices(names);
  }
  const auto encoder = make_encoder(c);
  const auto r = run_pipeline(images, labels, val_images, val_labels, lexicon, *encoder, c);

  const auto dir = out_dir(c);
  write_atomic(dir / "predictions.csv", predictions_csv(r.predictions));
  write_json(dir / "selected_prompts.json", r.selection.to_json());
  write_json(dir / "config.json", stamped(c.to_json(), c));
  write_json(dir / "report.json",
             stamped({{"metrics", r.metrics.to_json()}, {"config", c.to_json()}, {"n_images", images.size()}}, c));
  if (c.dump_attention) write_json(dir / "attention.json", stamped({{"attention", attention_json(r.predictions)}}, c));
  if (c.provenance) write_json(dir / "patches.json", stamped({{"images", r.provenance}}, c));

  std::printf("accuracy %.4f  %s-F1 %.4f  (%zu images)\n", r.metrics.accuracy, to_string(c.f1_average).c_str(),
              r.metrics.f1(), images.size());
}

void cmd_embed(const PipelineConfig& c) {
  const auto options = resolve_options(c);
  const auto manifest = read_manifest(require(c.manifest, "manifest"));
  const auto encoder = make_encoder(c);
  EmbeddingStore store(static_cast<std::uint32_t>(encoder->info().dim));
  nlohmann::json provenance = nlohmann::json::array();
  embed_images(load_images(manifest), options.plan, *encoder, true, store, &provenance);
  if (!c.val_manifest.empty()) embed_images(load_images(read_manifest(c.val_manifest)), options.plan, *encoder, false, store);

  const auto dir = out_dir(c);
  store_write(dir / "image_embeddings.emb", store);
  write_json(dir / "image_embeddings.json",
             stamped({{"model", encoder->info().model_name}, {"dim", store.dim()}, {"records", store.size()}}, c));
  if (c.provenance) write_json(dir / "patches.json", stamped({{"images", provenance}}, c));
}

void cmd_prompts_build(const PipelineConfig& c) {
  const auto options = resolve_options(c);
  const auto lexicon = read_lexicon(require(c.lexicon, "lexicon"));
  const auto encoder = make_encoder(c);
  EmbeddingStore store(static_cast<std::uint32_t>(encoder->info().dim));
  const auto bank = build_prompt_bank(lexicon, *encoder, options, store);

  const auto dir = out_dir(c);
  store_write(dir / "prompt_embeddings.emb", store);
  write_json(dir / "prompt_bank.json", stamped(bank.to_json(), c));
}

void cmd_prompts_select(const PipelineConfig& c) {
  const auto options = resolve_options(c);
  const auto dir = out_dir(c);
  const auto bank = PromptBankSpec::from_json(read_json(dir / "prompt_bank.json"));
  const auto text_store = store_read(dir / "prompt_embeddings.emb");
  const auto image_store = store_read(dir / "image_embeddings.emb");

  Manifest val;
  if (!c.val_manifest.empty() || c.val_fraction > 0.0)
    val = validation_rows(c, c.manifest.empty() ? Manifest{} : read_manifest(c.manifest));
  std::vector<std::string> ids;
  for (const auto& row : val.rows) ids.push_back(row.path);
  const auto labels = val.label_indices(bank.class_names);

  auto selection = select_prompts(bank, text_store, load_unit_rows(image_store, ids), labels, options);
  selection.config_hash = c.hash();
  write_json(dir / "selected_prompts.json", selection.to_json());
}

void cmd_classify(const PipelineConfig& c) {
  const auto options = resolve_options(c);
  const auto dir = out_dir(c);
  const auto selection = Selection::from_json(read_json(dir / "selected_prompts.json"));
  const auto text_store = store_read(dir / "prompt_embeddings.emb");
  const auto image_store = store_read(dir / "image_embeddings.emb");
  const auto manifest = read_manifest(require(c.manifest, "manifest"));

  std::vector<std::string> ids;
  for (const auto& row : manifest.rows) ids.push_back(row.path);
  const auto classes = assemble_class_embeddings(selection, text_store);
  const auto predictions = classify_images(std::move(ids), image_store, classes, selection.class_names(), options);

  write_atomic(dir / "predictions.csv", predictions_csv(predictions));
  if (c.dump_attention) write_json(dir / "attention.json", stamped({{"attention", attention_json(predictions)}}, c));
}

void cmd_evaluate(const PipelineConfig& c, const std::string& predictions_path) {
  const auto dir = out_dir(c);
  const auto path = predictions_path.empty() ? dir / "predictions.csv" : fs::path(predictions_path);
  const auto predictions = read_predictions_csv(path);
  const auto manifest = read_manifest(require(c.manifest, "manifest"));
  const auto report = evaluate_predictions(predictions, manifest, c.f1_average);
  write_json(dir / "report.json", stamped({{"metrics", report.to_json()}, {"config", c.to_json()}}, c));
  std::printf("accuracy %.4f  %s-F1 %.4f\n", report.accuracy, to_string(c.f1_average).c_str(), report.f1());
}

void cmd_ablation(const PipelineConfig& c) {
  const auto modes = parse_ablation_list(c.ablation);
  const auto lexicon = read_lexicon(require(c.lexicon, "lexicon"));
  const auto manifest = read_manifest(require(c.manifest, "manifest"));
  const auto names = lexicon.class_names();
  const auto images = load_images(manifest);
  const auto labels = manifest.label_indices(names);
  std::vector<ImageRef> val_images;
  std::vector<int> val_labels;
  if (!c.val_manifest.empty()) {
    const auto vm = read_manifest(c.val_manifest);
    val_images = load_images(vm);
    val_labels = vm.label_indices(names);
  }
  const auto encoder = make_encoder(c);
  const auto rows = run_ablation(images, labels, val_images, val_labels, lexicon, *encoder, c, modes);

  const auto dir = out_dir(c);
  const auto table = ablation_csv(rows);
  write_atomic(dir / "ablation.csv", table);
  nlohmann::json reports = nlohmann::json::object();
  for (const auto& r : rows) reports[to_string(r.mode)] = r.metrics.to_json();
  write_json(dir / "ablation.json", stamped({{"modes", reports}, {"config", c.to_json()}}, c));
  std::fputs(table.c_str(), stdout);
}

struct PlantedFlags {
  PlantedSpec spec;
  std::string out = "planted";
};

int exit_code(ExitCode e) { return static_cast<int>(e); }

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Multi-resolution prompt-guided hybrid embedding classifier"};
  app.require_subcommand(1);

  struct Command {
    CLI::App* app;
    std::unique_ptr<ConfigFlags> flags;
    std::function<void(const PipelineConfig&)> run;
  };
  std::vector<Command> commands;
  std::string predictions_path;

  auto add = [&](const char* name, const char* help, std::function<void(const PipelineConfig&)> run) -> CLI::App* {
    auto* sub = app.add_subcommand(name, help);
    auto flags = std::make_unique<ConfigFlags>(sub);
    add_model_flags(*flags);
    commands.push_back({sub, std::move(flags), std::move(run)});
    return sub;
  };
  add("run", "full pipeline: patches, embeddings, prompts, classification, metrics", cmd_run);
  add("embed", "embed images and patches into image_embeddings.emb", cmd_embed);
  add("prompts-build", "generate and embed the prompt bank", cmd_prompts_build);
  add("prompts-select", "score prompts, keep the top K and assign text weights", cmd_prompts_select);
  add("classify", "hybrid embeddings, similarity and predictions.csv", cmd_classify);
  auto* evaluate = add("evaluate", "metrics for a predictions file against a manifest",
                       [&](const PipelineConfig& c) { cmd_evaluate(c, predictions_path); });
  evaluate->add_option("--predictions", predictions_path, "predictions CSV (default <out>/predictions.csv)");
  add("ablation", "one run per ablation mode, written to ablation.csv", cmd_ablation);

  PlantedFlags planted;
  auto* planted_cmd = app.add_subcommand("planted", "write a synthetic fixture with known class directions");
  planted_cmd->add_option("--classes", planted.spec.classes, "number of classes");
  planted_cmd->add_option("--dim", planted.spec.dim, "embedding dimension");
  planted_cmd->add_option("--sigma", planted.spec.noise_sigma, "noise standard deviation");
  planted_cmd->add_option("--images-per-class", planted.spec.images_per_class, "evaluation images per class");
  planted_cmd->add_option("--val-per-class", planted.spec.val_per_class, "validation images per class");
  planted_cmd->add_option("--patches", planted.spec.patches_per_image, "patch vectors per image");
  planted_cmd->add_option("--raster-size", planted.spec.raster_size, "side of the placeholder PNGs");
  planted_cmd->add_option("--seed", planted.spec.seed, "random seed");
  planted_cmd->add_option("--out", planted.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ExitCode::Config);
  }

  try {
    if (planted_cmd->parsed()) {
      write_planted(planted.out, generate_planted(planted.spec));
      return 0;
    }
    for (auto& cmd : commands)
      if (cmd.app->parsed()) cmd.run(cmd.flags->resolve());
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_code(ExitCode::Config);
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << '\n';
    return exit_code(ExitCode::Transport);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return exit_code(ExitCode::Data);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return exit_code(ExitCode::Data);
  } catch (const ContractError& e) {
    std::cerr << "contract violation: " << e.what() << '\n';
    return exit_code(ExitCode::Data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(ExitCode::Data);
  }
}

}  // namespace mrphe
