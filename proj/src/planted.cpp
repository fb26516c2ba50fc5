#include "mrphe/planted.hpp"

#include <cstdio>
#include <fstream>

#include "mrphe/encoder.hpp"
#include "mrphe/errors.hpp"
#include "mrphe/rng.hpp"

namespace mrphe {

void PlantedSpec::validate() const {
  if (classes < 1) throw ConfigError("planted classes must be >= 1");
  if (dim < classes) throw ConfigError("planted dim (" + std::to_string(dim) + ") must be >= classes (" +
                                       std::to_string(classes) + ")");
  if (noise_sigma < 0.0) throw ConfigError("planted noise_sigma must be >= 0");
  if (images_per_class < 0 || val_per_class < 0 || patches_per_image < 0)
    throw ConfigError("planted counts must be >= 0");
  if (raster_size < 1) throw ConfigError("planted raster_size must be >= 1");
}

std::string planted_class_name(int c) { return "CLASS_" + std::to_string(c); }
std::string planted_marker(int c) { return planted_class_name(c) + " marker"; }
std::string planted_decoy(int c) {
  return "unrelated descriptor number " + std::to_string(c) + " with no diagnostic content.";
}

namespace {

std::vector<float> to_floats(const Eigen::VectorXd& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
  return out;
}

Eigen::VectorXd noisy(const Eigen::VectorXd& direction, double sigma, RandomStream& stream) {
  Eigen::VectorXd v = direction;
  if (sigma > 0.0)
    for (Eigen::Index d = 0; d < v.size(); ++d) v[d] += sigma * stream.gaussian();
  return v / v.norm();
}

Raster planted_raster(int size, std::uint64_t seed, const std::string& id) {
  auto stream = RandomStream::keyed(seed, "raster/" + id);
  Raster r(size, size);
  for (auto& p : r.pixels) p = static_cast<std::uint8_t>(stream.next_u32());
  return r;
}

std::string image_id(const char* dir, int c, int i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s/c%d_%04d.png", dir, c, i);
  return buf;
}

}  // namespace

PlantedData generate_planted(const PlantedSpec& spec) {
  spec.validate();
  const int C = spec.classes, D = spec.dim;
  const int basis_cols = std::min(D, 2 * C);

  // Gaussian matrix -> thin Q of its QR factorization.
  auto basis_stream = RandomStream::keyed(spec.seed, "planted/basis");
  Eigen::MatrixXd g(D, basis_cols);
  for (int j = 0; j < basis_cols; ++j)
    for (int i = 0; i < D; ++i) g(i, j) = basis_stream.gaussian();
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() * Eigen::MatrixXd::Identity(D, basis_cols);

  PlantedData out;
  out.spec = spec;
  out.class_directions = q.leftCols(C).transpose();
  const bool decoys = D >= 2 * C;
  if (decoys) out.decoy_directions = q.middleCols(C, C).transpose();

  out.lexicon.templates.templates = {"a histopathology image of {}.", "an H&E stained section showing {}.",
                                     "{} tissue."};
  out.table = EmbeddingStore(static_cast<std::uint32_t>(D));
  for (int c = 0; c < C; ++c) {
    ClassLexicon cls{planted_class_name(c), {planted_marker(c)},
                     {planted_class_name(c) + " cells carry the planted signature."}};
    if (decoys) cls.clinical_statements.push_back(planted_decoy(c));
    out.lexicon.classes.push_back(cls);

    const auto dir = to_floats(out.class_directions.row(c).transpose());
    out.table.upsert(planted_marker(c), dir);
    out.table.upsert(reference_prompt(planted_class_name(c)), dir);
    for (const auto& text : generate_prompts(cls, out.lexicon.templates)) {
      if (decoys && text == planted_decoy(c))
        out.table.upsert(text, to_floats(out.decoy_directions.row(c).transpose()));
      else
        out.table.upsert(text, dir);
    }
  }

  auto add_images = [&](const char* dir, int per_class, std::vector<ImageRef>& images, std::vector<int>& labels) {
    for (int c = 0; c < C; ++c) {
      const Eigen::VectorXd direction = out.class_directions.row(c).transpose();
      for (int i = 0; i < per_class; ++i) {
        const auto id = image_id(dir, c, i);
        auto stream = RandomStream::keyed(spec.seed, "planted/image/" + id);
        out.table.insert(id, to_floats(noisy(direction, spec.noise_sigma, stream)));
        for (int p = 0; p < spec.patches_per_image; ++p)
          out.table.insert(patch_key(id, static_cast<std::size_t>(p)), to_floats(noisy(direction, spec.noise_sigma, stream)));
        images.push_back({id, planted_raster(spec.raster_size, spec.seed, id), id});
        labels.push_back(c);
      }
    }
  };
  add_images("images", spec.images_per_class, out.images, out.labels);
  add_images("val", spec.val_per_class, out.val_images, out.val_labels);
  return out;
}

Manifest PlantedData::manifest() const {
  Manifest m;
  for (std::size_t i = 0; i < images.size(); ++i) m.rows.push_back({images[i].id, planted_class_name(labels[i])});
  return m;
}

Manifest PlantedData::val_manifest() const {
  Manifest m;
  for (std::size_t i = 0; i < val_images.size(); ++i)
    m.rows.push_back({val_images[i].id, planted_class_name(val_labels[i])});
  return m;
}

void write_planted(const std::filesystem::path& dir, const PlantedData& data) {
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "val");
  for (const auto* set : {&data.images, &data.val_images})
    for (const auto& img : *set) save_png(dir / img.id, img.pixels);
  write_manifest(dir / "manifest.csv", data.manifest());
  write_manifest(dir / "val_manifest.csv", data.val_manifest());
  {
    std::ofstream lex(dir / "lexicon.json");
    lex << lexicon_to_json(data.lexicon).dump(2) << '\n';
  }
  write_table_json(dir / "table.json", data.table, "planted-seed-" + std::to_string(data.spec.seed));
  store_write(dir / "table.emb", data.table);
}

}  // namespace mrphe
