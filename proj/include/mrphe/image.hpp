#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mrphe {

// 8-bit RGB raster, row-major, channels interleaved.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Raster() = default;
  Raster(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  bool empty() const { return width < 1 || height < 1; }

  std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  // Rectangular sub-image copy; the rectangle must lie inside the raster.
  Raster crop(int x0, int y0, int w, int h) const;

  bool operator==(const Raster&) const = default;
};

struct ImageRef {
  std::string id;
  Raster pixels;
  std::optional<std::string> source_path;
};

// Decodes PNG, JPEG or TIFF into RGB. Throws DataError on unreadable input.
Raster load_image(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const Raster& raster);
// PNG-encoded bytes, used by the remote encoder upload.
std::vector<std::uint8_t> encode_png(const Raster& raster);

}  // namespace mrphe
