#include <doctest.h>

#include <opencv2/imgproc.hpp>

#include "mrphe/errors.hpp"
#include "mrphe/patching.hpp"

using namespace mrphe;

namespace {

Raster noise_raster(int w, int h, std::uint64_t seed) {
  RandomStream s(seed, 99);
  Raster r(w, h);
  for (auto& p : r.pixels) p = static_cast<std::uint8_t>(s.next_u32());
  return r;
}

Raster smooth_raster(int w, int h) {
  Raster r(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      r.at(x, y, 0) = static_cast<std::uint8_t>((x * 7 + y * 3) % 256);
      r.at(x, y, 1) = static_cast<std::uint8_t>((x * x + y) % 256);
      r.at(x, y, 2) = static_cast<std::uint8_t>((255 - y * 2) & 0xff);
    }
  return r;
}

cv::Mat as_mat(const Raster& r) {
  return cv::Mat(r.height, r.width, CV_8UC3, const_cast<std::uint8_t*>(r.pixels.data())).clone();
}

}  // namespace

TEST_SUITE("patching") {
  TEST_CASE("resize output sides round half away from zero") {
    const auto big = smooth_raster(2472, 2370);
    const auto small = resize_image(big, 0.25);
    CHECK(small.width == 618);
    CHECK(small.height == 593);

    cv::Mat ref;
    cv::resize(as_mat(big), ref, cv::Size(618, 593), 0, 0, cv::INTER_LINEAR);
    CHECK(ref.cols == small.width);
    CHECK(ref.rows == small.height);
  }

  TEST_CASE("resize identity and clamp") {
    const auto img = noise_raster(13, 9, 1);
    CHECK(resize_image(img, 1.0) == img);
    const auto tiny = resize_image(noise_raster(3, 3, 2), 0.25);
    CHECK(tiny.width == 1);
    CHECK(tiny.height == 1);
    CHECK_THROWS_AS(resize_image(img, 0.0), ConfigError);
    CHECK_THROWS_AS(resize_image(img, 1.5), ConfigError);
    CHECK_THROWS_AS(resize_image(Raster{}, 0.5), DataError);
  }

  TEST_CASE("bilinear resize agrees with OpenCV INTER_LINEAR within one level") {
    for (auto [w, h, scale] : {std::tuple{64, 48, 0.5}, {101, 77, 0.75}, {40, 40, 0.25}, {57, 91, 0.33}}) {
      const auto img = smooth_raster(w, h);
      const auto ours = resize_image(img, scale);
      cv::Mat ref;
      cv::resize(as_mat(img), ref, cv::Size(ours.width, ours.height), 0, 0, cv::INTER_LINEAR);
      int worst = 0;
      for (int y = 0; y < ours.height; ++y)
        for (int x = 0; x < ours.width; ++x)
          for (int c = 0; c < 3; ++c)
            worst = std::max(worst, std::abs(int(ours.at(x, y, c)) - int(ref.at<cv::Vec3b>(y, x)[c])));
      CAPTURE(w);
      CAPTURE(scale);
      CHECK(worst <= 1);
    }
  }

  TEST_CASE("random crop sides stay inside the fraction bounds") {
    const auto img = noise_raster(50, 40, 3);
    PatchPlan plan;
    plan.min_crop_px = 1;
    RandomStream s(11, 12);
    int min_w = 1000, max_w = 0, min_h = 1000, max_h = 0;
    for (int i = 0; i < 100000; ++i) {
      const auto c = random_crop(img, plan, s);
      min_w = std::min(min_w, c.rect.w);
      max_w = std::max(max_w, c.rect.w);
      min_h = std::min(min_h, c.rect.h);
      max_h = std::max(max_h, c.rect.h);
      REQUIRE(c.rect.x0 + c.rect.w <= 50);
      REQUIRE(c.rect.y0 + c.rect.h <= 40);
    }
    CHECK(min_w >= 25);
    CHECK(max_w <= 45);
    CHECK(min_h >= 20);
    CHECK(max_h <= 36);
  }

  TEST_CASE("degenerate crop ranges") {
    const auto img = noise_raster(30, 20, 4);
    PatchPlan full;
    full.crop_fraction_min = full.crop_fraction_max = 1.0;
    RandomStream s(0, 0);
    const auto c = random_crop(img, full, s);
    CHECK(c.rect == CropRect{0, 0, 30, 20});
    CHECK(c.pixels == img);

    const auto small = noise_raster(10, 10, 5);
    PatchPlan plan;  // min_crop_px = 32 exceeds the image
    const auto d = random_crop(small, plan, s);
    CHECK(d.rect == CropRect{0, 0, 10, 10});
  }

  TEST_CASE("default plan yields fifteen patches") {
    const ImageRef img{"slide_a.png", noise_raster(200, 160, 6), {}};
    const PatchPlan plan;
    const auto set = extract_patches(img, plan);
    CHECK(set.patches.size() == 15);
    CHECK(set.original == img.pixels);
    CHECK(set.patches[0].scale == 0.25);
    CHECK(set.patches[14].scale == 0.75);
    CHECK(set.patches[5].scaled_width == 100);
  }

  TEST_CASE("empty plan keeps only the original") {
    const ImageRef img{"x", noise_raster(20, 20, 7), {}};
    PatchPlan plan;
    plan.scales = {1.0};
    plan.patches_per_scale = {0};
    CHECK(extract_patches(img, plan).patches.empty());
  }

  TEST_CASE("patch extraction is deterministic per seed and id") {
    const ImageRef a{"id-1", noise_raster(120, 90, 8), {}};
    const PatchPlan plan;
    const auto p1 = extract_patches(a, plan);
    const auto p2 = extract_patches(a, plan);
    REQUIRE(p1.patches.size() == p2.patches.size());
    for (std::size_t i = 0; i < p1.patches.size(); ++i) {
      CHECK(p1.patches[i].pixels == p2.patches[i].pixels);
      CHECK(p1.patches[i].rect == p2.patches[i].rect);
    }
    const ImageRef b{"id-2", a.pixels, {}};
    const auto p3 = extract_patches(b, plan);
    bool differs = false;
    for (std::size_t i = 0; i < p1.patches.size(); ++i) differs |= !(p1.patches[i].rect == p3.patches[i].rect);
    CHECK(differs);

    const auto prov = patch_provenance(p1, plan);
    CHECK(prov["patches"].size() == 15);
    CHECK(prov["rng"] == std::string(kRngAlgorithm));
  }

  TEST_CASE("plan validation") {
    PatchPlan p;
    p.patches_per_scale = {5, 5};
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.scales[0] = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.crop_fraction_min = 0.95;
    CHECK_THROWS_AS(p.validate(), ConfigError);
  }
}
