#include "mrphe/patching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mrphe/errors.hpp"

namespace mrphe {

void PatchPlan::validate() const {
  if (scales.size() != patches_per_scale.size())
    throw ConfigError("patches_per_scale: length " + std::to_string(patches_per_scale.size()) +
                      " does not match scales length " + std::to_string(scales.size()));
  for (double s : scales)
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("scales: " + std::to_string(s) + " outside (0, 1]");
  for (int n : patches_per_scale)
    if (n < 0) throw ConfigError("patches_per_scale: negative count " + std::to_string(n));
  if (!(crop_fraction_min > 0.0 && crop_fraction_min <= 1.0))
    throw ConfigError("crop_fraction_min: must lie in (0, 1]");
  if (!(crop_fraction_max > 0.0 && crop_fraction_max <= 1.0))
    throw ConfigError("crop_fraction_max: must lie in (0, 1]");
  if (crop_fraction_min > crop_fraction_max)
    throw ConfigError("crop_fraction_min: must not exceed crop_fraction_max");
  if (min_crop_px < 1) throw ConfigError("min_crop_px: must be >= 1");
}

int PatchPlan::total_patches() const {
  return std::accumulate(patches_per_scale.begin(), patches_per_scale.end(), 0);
}

namespace {

int scaled_side(int side, double scale) {
  // std::lround rounds half away from zero.
  return std::max(1, static_cast<int>(std::lround(side * scale)));
}

}  // namespace

Raster resize_image(const Raster& image, double scale) {
  if (image.empty() || image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3)
    throw DataError("resize_image: empty or malformed raster");
  if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("resize_image: scale outside (0, 1]");

  const int out_w = scaled_side(image.width, scale);
  const int out_h = scaled_side(image.height, scale);
  if (out_w == image.width && out_h == image.height) return image;

  const double fx = static_cast<double>(image.width) / out_w;
  const double fy = static_cast<double>(image.height) / out_h;

  // Precomputed horizontal taps.
  std::vector<int> x_lo(out_w), x_hi(out_w);
  std::vector<double> x_t(out_w);
  for (int x = 0; x < out_w; ++x) {
    double sx = std::clamp((x + 0.5) * fx - 0.5, 0.0, static_cast<double>(image.width - 1));
    x_lo[x] = static_cast<int>(std::floor(sx));
    x_hi[x] = std::min(x_lo[x] + 1, image.width - 1);
    x_t[x] = sx - x_lo[x];
  }

  Raster out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const double sy = std::clamp((y + 0.5) * fy - 0.5, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double ty = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double top = image.at(x_lo[x], y0, c) * (1.0 - x_t[x]) + image.at(x_hi[x], y0, c) * x_t[x];
        const double bot = image.at(x_lo[x], y1, c) * (1.0 - x_t[x]) + image.at(x_hi[x], y1, c) * x_t[x];
        const double v = top * (1.0 - ty) + bot * ty;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

namespace {

int crop_side(int full, double fraction, int min_px) {
  int side = static_cast<int>(std::lround(fraction * full));
  if (side < min_px) side = std::min(min_px, full);
  return std::clamp(side, 1, full);
}

}  // namespace

Crop random_crop(const Raster& image, const PatchPlan& plan, RandomStream& stream) {
  if (image.empty()) throw DataError("random_crop: empty raster");
  // Draw order is fixed: width fraction, height fraction, x corner, y corner.
  const double fw = stream.uniform(plan.crop_fraction_min, plan.crop_fraction_max);
  const double fh = stream.uniform(plan.crop_fraction_min, plan.crop_fraction_max);
  const int w = crop_side(image.width, fw, plan.min_crop_px);
  const int h = crop_side(image.height, fh, plan.min_crop_px);
  const int x0 = static_cast<int>(stream.below(static_cast<std::uint32_t>(image.width - w + 1)));
  const int y0 = static_cast<int>(stream.below(static_cast<std::uint32_t>(image.height - h + 1)));
  return {image.crop(x0, y0, w, h), {x0, y0, w, h}};
}

PatchSet extract_patches(const ImageRef& image, const PatchPlan& plan) {
  plan.validate();
  if (image.id.empty()) throw DataError("extract_patches: empty image id");
  if (image.pixels.empty()) throw DataError("extract_patches: empty raster for " + image.id);

  PatchSet set{image.id, image.pixels, {}};
  set.patches.reserve(static_cast<std::size_t>(plan.total_patches()));
  auto stream = RandomStream::keyed(plan.seed, image.id);
  for (std::size_t k = 0; k < plan.scales.size(); ++k) {
    if (plan.patches_per_scale[k] == 0) continue;
    const Raster scaled = resize_image(image.pixels, plan.scales[k]);
    for (int i = 0; i < plan.patches_per_scale[k]; ++i) {
      const auto position = stream.position();
      auto crop = random_crop(scaled, plan, stream);
      set.patches.push_back({std::move(crop.pixels), plan.scales[k], crop.rect, scaled.width, scaled.height, position});
    }
  }
  return set;
}

nlohmann::json patch_provenance(const PatchSet& set, const PatchPlan& plan) {
  nlohmann::json patches = nlohmann::json::array();
  for (std::size_t i = 0; i < set.patches.size(); ++i) {
    const auto& p = set.patches[i];
    patches.push_back({{"index", i},
                       {"scale", p.scale},
                       {"crop_rect", {p.rect.x0, p.rect.y0, p.rect.w, p.rect.h}},
                       {"scaled_size", {p.scaled_width, p.scaled_height}},
                       {"rng_position", p.rng_position}});
  }
  return {{"image_id", set.image_id},
          {"original_size", {set.original.width, set.original.height}},
          {"rng", kRngAlgorithm},
          {"seed", plan.seed},
          {"stream_id", fnv1a64(set.image_id)},
          {"patches", std::move(patches)}};
}

}  // namespace mrphe
