#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mrphe/embedding.hpp"
#include "mrphe/image.hpp"
#include "mrphe/manifest.hpp"
#include "mrphe/prompting.hpp"
#include "mrphe/store.hpp"

namespace mrphe {

// Synthetic fixture with known ground truth: class text directions are the first C rows of a
// seeded random orthonormal basis, and every image or patch vector is
// normalize(direction_of_its_class + noise_sigma * N(0, I)).
struct PlantedSpec {
  int classes = 4;
  int dim = 64;
  double noise_sigma = 0.1;
  int images_per_class = 100;
  int val_per_class = 10;
  int patches_per_image = 15;
  int raster_size = 16;
  std::uint64_t seed = 7;

  void validate() const;
};

struct PlantedData {
  PlantedSpec spec;
  RowMatrix<double> class_directions;  // C x D, orthonormal rows
  RowMatrix<double> decoy_directions;  // C x D, orthogonal to every class direction; empty if D < 2C
  Lexicon lexicon;
  EmbeddingStore table;                // fixture encoder: prompt texts, image ids and patch keys
  std::vector<ImageRef> images;
  std::vector<int> labels;
  std::vector<ImageRef> val_images;
  std::vector<int> val_labels;

  Manifest manifest() const;
  Manifest val_manifest() const;
};

std::string planted_class_name(int c);
// The synonym whose fixture vector is exactly the class direction, e.g. "CLASS_0 marker".
std::string planted_marker(int c);
// A clinical statement mapped to the class's decoy (orthogonal) direction.
std::string planted_decoy(int c);

PlantedData generate_planted(const PlantedSpec& spec);

// Writes images/, val/, manifest.csv, val_manifest.csv, lexicon.json, table.json and table.emb.
void write_planted(const std::filesystem::path& dir, const PlantedData& data);

}  // namespace mrphe
