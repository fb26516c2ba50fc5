#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrphe/image.hpp"
#include "mrphe/rng.hpp"

namespace mrphe {

// Multiresolution cropping schedule. Defaults reproduce 5 crops at each of 25/50/75 % scale.
struct PatchPlan {
  std::vector<double> scales{0.25, 0.50, 0.75};
  std::vector<int> patches_per_scale{5, 5, 5};
  double crop_fraction_min = 0.5;
  double crop_fraction_max = 0.9;
  int min_crop_px = 32;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;
  int total_patches() const;
};

struct CropRect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;
  bool operator==(const CropRect&) const = default;
};

struct Patch {
  Raster pixels;
  double scale = 1.0;
  CropRect rect;            // in scaled-image coordinates
  int scaled_width = 0;
  int scaled_height = 0;
  std::uint64_t rng_position = 0;  // stream position before this crop was drawn
};

struct PatchSet {
  std::string image_id;
  Raster original;
  std::vector<Patch> patches;  // scale index ascending, then crop index ascending
};

// Bilinear resize with half-pixel centres; output sides are round(side * scale), at least 1.
Raster resize_image(const Raster& image, double scale);

struct Crop {
  Raster pixels;
  CropRect rect;
};

Crop random_crop(const Raster& image, const PatchPlan& plan, RandomStream& stream);

// Pure function of (pixels, id, plan). The crop stream is keyed by (plan.seed, image.id).
PatchSet extract_patches(const ImageRef& image, const PatchPlan& plan);

// Audit sidecar: scale, crop rectangle and stream position per patch.
nlohmann::json patch_provenance(const PatchSet& set, const PatchPlan& plan);

}  // namespace mrphe
