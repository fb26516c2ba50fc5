#include "mrphe/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "mrphe/errors.hpp"

namespace mrphe {

Raster Raster::crop(int x0, int y0, int w, int h) const {
  Raster out(w, h);
  for (int y = 0; y < h; ++y) {
    const auto* src = &pixels[(static_cast<std::size_t>(y0 + y) * width + x0) * 3];
    std::copy(src, src + static_cast<std::size_t>(w) * 3, &out.pixels[static_cast<std::size_t>(y) * w * 3]);
  }
  return out;
}

namespace {

cv::Mat to_bgr(const Raster& r) {
  cv::Mat rgb(r.height, r.width, CV_8UC3, const_cast<std::uint8_t*>(r.pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

}  // namespace

Raster load_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DataError("cannot decode image: " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  Raster out(rgb.cols, rgb.rows);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* row = rgb.ptr<std::uint8_t>(y);
    std::copy(row, row + static_cast<std::size_t>(rgb.cols) * 3, &out.pixels[static_cast<std::size_t>(y) * rgb.cols * 3]);
  }
  return out;
}

void save_png(const std::filesystem::path& path, const Raster& raster) {
  if (raster.empty()) throw DataError("cannot write empty raster: " + path.string());
  if (!cv::imwrite(path.string(), to_bgr(raster))) throw DataError("cannot write image: " + path.string());
}

std::vector<std::uint8_t> encode_png(const Raster& raster) {
  if (raster.empty()) throw DataError("cannot encode empty raster");
  std::vector<std::uint8_t> buf;
  cv::imencode(".png", to_bgr(raster), buf);
  return buf;
}

}  // namespace mrphe
