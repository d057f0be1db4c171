#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace imgseek;

namespace {

// Literal dense-gradient descriptor of one patch: central differences with
// edge replication, 8 hard orientation bins, 4x4 cells, SIFT normalisation.
Vector gradientOracle(const Image& img, int x0, int y0, int patch) {
  auto gray = [&](int x, int y) {
    x = std::clamp(x, 0, img.width() - 1);
    y = std::clamp(y, 0, img.height() - 1);
    const Rgb& p = img.at(x, y);
    return 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
  };
  Vector d = Vector::Zero(128);
  for (int y = y0; y < y0 + patch; ++y) {
    for (int x = x0; x < x0 + patch; ++x) {
      const double gx = (gray(x + 1, y) - gray(x - 1, y)) / 2.0;
      const double gy = (gray(x, y + 1) - gray(x, y - 1)) / 2.0;
      double theta = std::atan2(gy, gx);
      if (theta < 0) theta += 2 * std::numbers::pi;
      int b = static_cast<int>(std::floor(theta / (std::numbers::pi / 4)));
      if (b > 7) b = 7;
      const int cy = std::min(3, (y - y0) * 4 / patch);
      const int cx = std::min(3, (x - x0) * 4 / patch);
      d[(cy * 4 + cx) * 8 + b] += std::sqrt(gx * gx + gy * gy);
    }
  }
  if (d.norm() > 0) {
    d /= d.norm();
    for (auto& v : d) v = std::min(v, 0.2);
    d /= d.norm();
  }
  return d;
}

Image ramp(int w, int h, bool horizontal) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto v = static_cast<std::uint8_t>(3 * (horizontal ? x : y));
      img.at(x, y) = {v, v, v};
    }
  return img;
}

}  // namespace

TEST_SUITE("extractor") {
  TEST_CASE("dense grid geometry") {
    const auto set = extractDenseGradient(testing::noiseImage(64, 48, 1), 8, 16);
    CHECK(set.descriptors.rows() == 7 * 5);
    CHECK(set.descriptors.cols() == 128);
    REQUIRE(set.keypoints.size() == 35);
    CHECK(set.keypoints[0].x == 8.0);
    CHECK(set.keypoints[0].y == 8.0);
    CHECK(set.keypoints[1].x == 16.0);
    CHECK(set.keypoints[7].y == 16.0);
    CHECK(set.keypoints[0].scale == 16.0);
  }

  TEST_CASE("dense gradient matches the literal oracle") {
    const Image img = testing::noiseImage(40, 36, 9);
    const auto set = extractDenseGradient(img, 6, 16);
    std::size_t i = 0;
    for (int y = 0; y + 16 <= 36; y += 6)
      for (int x = 0; x + 16 <= 40; x += 6, ++i) {
        const Vector oracle = gradientOracle(img, x, y, 16);
        CHECK((set.descriptors.row(static_cast<Eigen::Index>(i)).transpose() - oracle).cwiseAbs().maxCoeff() < 1e-12);
      }
    CHECK(i == static_cast<std::size_t>(set.descriptors.rows()));
  }

  TEST_CASE("ramps land in the expected orientation bin") {
    for (bool horizontal : {true, false}) {
      const auto set = extractDenseGradient(ramp(48, 48, horizontal), 8, 16);
      // Patch at origin (16,16) never touches the image border.
      const Eigen::Index interior = 2 * 5 + 2;
      const int bin = horizontal ? 0 : 2;
      for (int cell = 0; cell < 16; ++cell)
        for (int b = 0; b < 8; ++b)
          CHECK(set.descriptors(interior, cell * 8 + b) == doctest::Approx(b == bin ? 0.25 : 0.0));
    }
  }

  TEST_CASE("image not larger than the patch is rejected") {
    CHECK_THROWS_AS(extractDenseGradient(Image(16, 40), 8, 16), Error);
    try {
      extractLabPatches(Image(40, 16), 8, 16);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ImageTooSmall);
    }
    CHECK_NOTHROW(extractDenseGradient(Image(17, 17), 8, 16));
  }

  TEST_CASE("RootSIFT rows are unit L2 and reject negatives") {
    const auto sift = extractDenseGradient(testing::noiseImage(48, 48, 4), 8, 16);
    const auto root = toRootSift(sift);
    for (Eigen::Index i = 0; i < root.descriptors.rows(); ++i) {
      CHECK(root.descriptors.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
      const double mass = sift.descriptors.row(i).sum();
      CHECK(root.descriptors(i, 5) == doctest::Approx(std::sqrt(sift.descriptors(i, 5) / mass)));
    }
    LocalFeatureSet neg = sift;
    neg.descriptors(0, 0) = -0.1;
    try {
      toRootSift(neg);
      FAIL("expected NegativeComponent");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NegativeComponent);
    }
  }

  TEST_CASE("Lab conversion reference points") {
    const auto white = srgbToLab({255, 255, 255});
    CHECK(white[0] == doctest::Approx(100.0).epsilon(1e-4));
    CHECK(std::abs(white[1]) < 1e-2);
    CHECK(std::abs(white[2]) < 1e-2);
    const auto black = srgbToLab({0, 0, 0});
    CHECK(std::abs(black[0]) < 1e-9);
    // sRGB red, widely tabulated as L=53.24 a=80.09 b=67.20.
    const auto red = srgbToLab({255, 0, 0});
    CHECK(red[0] == doctest::Approx(53.24).epsilon(1e-3));
    CHECK(red[1] == doctest::Approx(80.09).epsilon(1e-3));
    CHECK(red[2] == doctest::Approx(67.20).epsilon(1e-3));
  }

  TEST_CASE("Lab patches of a solid image repeat the colour per cell") {
    const Image img(32, 32, Rgb{30, 160, 90});
    const auto set = extractLabPatches(img, 8, 16);
    const auto lab = srgbToLab({30, 160, 90});
    CHECK(set.descriptors.cols() == 48);
    for (Eigen::Index i = 0; i < set.descriptors.rows(); ++i)
      for (int cell = 0; cell < 16; ++cell)
        for (int c = 0; c < 3; ++c) CHECK(set.descriptors(i, cell * 3 + c) == doctest::Approx(lab[c]));
  }

  TEST_CASE("registry selects by name and rejects unknowns") {
    const auto ex = extractorRegistry().select("rootsift", {{"patchSize", 24}});
    CHECK(ex->params().feature == "rootsift");
    CHECK(ex->params().patchSize == 24);
    CHECK(ex->dimension() == 128);
    CHECK(makeExtractor({"lab", 8, 16})->dimension() == 48);
    try {
      extractorRegistry().select("surf");
      FAIL("expected UnknownComponent");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownComponent);
    }
    try {
      extractorRegistry().select("lab", {{"octaves", 3}});
      FAIL("expected InvalidParameter");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidParameter);
    }
    CHECK_THROWS_AS(makeExtractor({"dense-sift", 8, 15})->extract(Image(40, 40)), Error);
  }
}
