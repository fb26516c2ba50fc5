#include <doctest.h>

#include "mrphe/errors.hpp"
#include "mrphe/pipeline.hpp"
#include "mrphe/planted.hpp"

using namespace mrphe;

namespace {

PlantedData small_planted(double sigma, int per_class = 25) {
  PlantedSpec spec;
  spec.noise_sigma = sigma;
  spec.images_per_class = per_class;
  spec.val_per_class = 5;
  return generate_planted(spec);
}

RunResult run(const PlantedData& d, const PipelineConfig& c) {
  TableEncoder enc(d.table, "planted");
  return run_pipeline(d.images, d.labels, d.val_images, d.val_labels, d.lexicon, enc, c);
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("noiseless planted data is classified perfectly in every mode") {
    const auto d = small_planted(0.0, 10);
    for (const char* mode : {"full", "basic_prompts", "single_scale", "global_only", "patch_only", "average_weighting"}) {
      PipelineConfig c;
      c.ablation = mode;
      CAPTURE(mode);
      CHECK(run(d, c).metrics.accuracy == 1.0);
    }
    const auto* v = d.table.find(d.images[3].id);
    for (int k = 0; k < d.spec.dim; ++k) CHECK((*v)[k] == doctest::Approx(d.class_directions(0, k)).epsilon(1e-6));
  }

  TEST_CASE("planted fixtures are deterministic") {
    const auto a = small_planted(0.1, 5);
    const auto b = small_planted(0.1, 5);
    CHECK(serialize_store(a.table) == serialize_store(b.table));
    CHECK(a.images[4].pixels == b.images[4].pixels);
    PlantedSpec other = a.spec;
    other.seed = 8;
    CHECK(serialize_store(generate_planted(other).table) != serialize_store(a.table));
    PlantedSpec bad;
    bad.classes = 10;
    bad.dim = 4;
    CHECK_THROWS_AS(generate_planted(bad), ConfigError);
  }

  TEST_CASE("full mode is not beaten by any ablation by more than half a point") {
    const auto d = small_planted(0.1);
    TableEncoder enc(d.table, "planted");
    const auto rows = run_ablation(d.images, d.labels, d.val_images, d.val_labels, d.lexicon, enc, PipelineConfig{},
                                   parse_ablation_list("full,basic_prompts,single_scale,global_only,patch_only,average_weighting"));
    REQUIRE(rows.size() == 6);
    for (const auto& r : rows) {
      CAPTURE(to_string(r.mode));
      CHECK(rows[0].metrics.accuracy + 0.005 >= r.metrics.accuracy);
      CHECK(r.metrics.n_samples == 100);
    }
    const auto only_full = run_ablation(d.images, d.labels, d.val_images, d.val_labels, d.lexicon, enc, PipelineConfig{}, {});
    REQUIRE(only_full.size() == 1);
    CHECK(only_full[0].mode == AblationMode::Full);
  }

  TEST_CASE("global image in attention adds one weight") {
    const auto d = small_planted(0.1, 2);
    PipelineConfig c;
    CHECK(run(d, c).predictions.attention[0].size() == 15);
    c.global_in_attention = true;
    CHECK(run(d, c).predictions.attention[0].size() == 16);
  }

  TEST_CASE("without patches the hybrid is the global embedding") {
    const auto d = small_planted(0.1, 2);
    PipelineConfig c;
    c.scales = {1.0};
    c.patches_per_scale = {0};
    auto no_patches = run(d, c);
    c.alpha = 1.0;
    auto global = run(d, c);
    CHECK(no_patches.predictions.similarity.isApprox(global.predictions.similarity, 1e-15));
    c.alpha = 0.0;
    CHECK_THROWS_AS(run(d, c), NumericError);
  }

  TEST_CASE("mock backend runs end to end on real rasters") {
    const auto d = small_planted(0.1, 3);
    MockEncoder enc(32, 0);
    PipelineConfig c;
    c.val_fraction = 0.5;
    const auto r = run_pipeline(d.images, d.labels, {}, {}, d.lexicon, enc, c);
    CHECK(r.metrics.n_samples == 12);
    for (const auto& cls : r.selection.classes) CHECK(cls.texts.size() <= 30);
    CHECK(r.image_store.size() == 12 * 16);
  }

  TEST_CASE("prediction files round-trip") {
    const auto d = small_planted(0.1, 3);
    const auto r = run(d, PipelineConfig{});
    const auto text = predictions_csv(r.predictions);
    const auto parsed = parse_predictions_csv(text);
    CHECK(parsed.class_names == d.lexicon.class_names());
    REQUIRE(parsed.rows.size() == 12);
    CHECK(parsed.rows[0].image_id == r.predictions.ids[0]);
    CHECK(std::abs(parsed.rows[0].probabilities[0] - r.predictions.classified.probabilities(0, 0)) <= 5e-7);
    const auto report = evaluate_predictions(parsed, d.manifest(), F1Average::Macro);
    CHECK(report.accuracy == r.metrics.accuracy);
    CHECK_THROWS_AS(parse_predictions_csv("id,label\n"), DataError);
  }

  TEST_CASE("selection artifacts round-trip") {
    const auto d = small_planted(0.1, 3);
    const auto r = run(d, PipelineConfig{});
    const auto back = Selection::from_json(r.selection.to_json());
    CHECK(back.to_json() == r.selection.to_json());
    const auto a = assemble_class_embeddings(r.selection, r.text_store);
    const auto b = assemble_class_embeddings(back, r.text_store);
    CHECK(a.matrix() == b.matrix());
  }
}
