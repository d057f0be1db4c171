#include "imgseek/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace imgseek {

DescriptorVector LocalFeatureSet::descriptor(std::size_t i) const {
  return {featureId, descriptors.row(static_cast<Eigen::Index>(i)).transpose(), false};
}

namespace {

void checkGeometry(const Image& image, int gridStep, int patchSize) {
  if (patchSize < 8 || patchSize % 2 != 0)
    throw Error(ErrorCode::InvalidParameter, "patchSize must be even and >= 8");
  if (gridStep < 1) throw Error(ErrorCode::InvalidParameter, "gridStep must be >= 1");
  if (image.width() <= patchSize || image.height() <= patchSize)
    throw Error(ErrorCode::ImageTooSmall, "image " + std::to_string(image.width()) + "x" +
                                              std::to_string(image.height()) + " not larger than patch " +
                                              std::to_string(patchSize));
}

// Top-left corners of every patch lying fully inside the image, row-major.
std::vector<std::pair<int, int>> gridOrigins(const Image& image, int gridStep, int patchSize) {
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y + patchSize <= image.height(); y += gridStep)
    for (int x = 0; x + patchSize <= image.width(); x += gridStep) out.emplace_back(x, y);
  return out;
}

// Cell index of offset `off` inside a patch split into 4 equal cells.
inline int cellOf(int off, int patchSize) { return std::min(3, off * 4 / patchSize); }

}  // namespace

LocalFeatureSet extractDenseGradient(const Image& image, int gridStep, int patchSize) {
  checkGeometry(image, gridStep, patchSize);
  const Eigen::MatrixXd gray = luminance(image);
  const int w = image.width();
  const int h = image.height();

  Eigen::MatrixXd mag(h, w);
  Eigen::MatrixXi bin(h, w);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double gx = 0.5 * (gray(r, std::min(c + 1, w - 1)) - gray(r, std::max(c - 1, 0)));
      const double gy = 0.5 * (gray(std::min(r + 1, h - 1), c) - gray(std::max(r - 1, 0), c));
      mag(r, c) = std::hypot(gx, gy);
      double angle = std::atan2(gy, gx);
      if (angle < 0) angle += kTwoPi;
      bin(r, c) = std::min(7, static_cast<int>(angle / (kTwoPi / 8.0)));
    }

  const auto origins = gridOrigins(image, gridStep, patchSize);
  LocalFeatureSet out;
  out.featureId = "dense-sift";
  out.descriptors = RowMatrix::Zero(static_cast<Eigen::Index>(origins.size()), kDenseGradientDim);
  out.keypoints.reserve(origins.size());
  for (std::size_t i = 0; i < origins.size(); ++i) {
    const auto [x0, y0] = origins[i];
    out.keypoints.push_back({x0 + patchSize / 2.0, y0 + patchSize / 2.0, static_cast<double>(patchSize)});
    auto row = out.descriptors.row(static_cast<Eigen::Index>(i));
    for (int dy = 0; dy < patchSize; ++dy)
      for (int dx = 0; dx < patchSize; ++dx) {
        const int cell = cellOf(dy, patchSize) * 4 + cellOf(dx, patchSize);
        row(cell * 8 + bin(y0 + dy, x0 + dx)) += mag(y0 + dy, x0 + dx);
      }
    double norm = row.norm();
    if (norm > 0) {
      row /= norm;
      row = row.cwiseMin(0.2);
      norm = row.norm();
      if (norm > 0) row /= norm;
    }
  }
  return out;
}

LocalFeatureSet toRootSift(const LocalFeatureSet& features) {
  LocalFeatureSet out = features;
  out.featureId = "rootsift";
  for (Eigen::Index i = 0; i < out.descriptors.rows(); ++i) {
    auto row = out.descriptors.row(i);
    if ((row.array() < 0).any())
      throw Error(ErrorCode::NegativeComponent, "RootSIFT requires non-negative descriptor components");
    const double mass = row.sum();
    if (mass > 0) row = (row / mass).cwiseSqrt();
  }
  return out;
}

Eigen::Vector3d srgbToLab(const Rgb& px) {
  auto linear = [](std::uint8_t v) {
    const double c = v / 255.0;
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
  };
  const double r = linear(px.r), g = linear(px.g), b = linear(px.b);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  // D65 reference white, Y normalised to 1.
  constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
  auto f = [](double t) {
    constexpr double eps = 216.0 / 24389.0;
    constexpr double kappa = 24389.0 / 27.0;
    return t > eps ? std::cbrt(t) : (kappa * t + 16.0) / 116.0;
  };
  const double fx = f(x / xn), fy = f(y / yn), fz = f(z / zn);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

LocalFeatureSet extractLabPatches(const Image& image, int gridStep, int patchSize) {
  checkGeometry(image, gridStep, patchSize);
  const int w = image.width();
  const int h = image.height();
  std::vector<Eigen::Vector3d> lab(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) lab[static_cast<std::size_t>(r) * w + c] = srgbToLab(image.at(c, r));

  const auto origins = gridOrigins(image, gridStep, patchSize);
  LocalFeatureSet out;
  out.featureId = "lab";
  out.descriptors = RowMatrix::Zero(static_cast<Eigen::Index>(origins.size()), kLabPatchDim);
  for (std::size_t i = 0; i < origins.size(); ++i) {
    const auto [x0, y0] = origins[i];
    out.keypoints.push_back({x0 + patchSize / 2.0, y0 + patchSize / 2.0, static_cast<double>(patchSize)});
    std::array<Eigen::Vector3d, 16> sums;
    std::array<int, 16> counts{};
    sums.fill(Eigen::Vector3d::Zero());
    for (int dy = 0; dy < patchSize; ++dy)
      for (int dx = 0; dx < patchSize; ++dx) {
        const int cell = cellOf(dy, patchSize) * 4 + cellOf(dx, patchSize);
        sums[cell] += lab[static_cast<std::size_t>(y0 + dy) * w + x0 + dx];
        ++counts[cell];
      }
    auto row = out.descriptors.row(static_cast<Eigen::Index>(i));
    for (int cell = 0; cell < 16; ++cell) row.segment<3>(cell * 3) = sums[cell] / counts[cell];
  }
  return out;
}

int extractorDimension(const std::string& feature) {
  if (feature == "dense-sift" || feature == "rootsift") return kDenseGradientDim;
  if (feature == "lab") return kLabPatchDim;
  throw Error(ErrorCode::UnknownComponent, "Extractor '" + feature + "' is not registered");
}

namespace {

class GridExtractor final : public Extractor {
 public:
  explicit GridExtractor(ExtractorParams p) : params_(std::move(p)) {
    if (params_.patchSize < 8 || params_.patchSize % 2 != 0)
      throw Error(ErrorCode::InvalidParameter, "patchSize must be even and >= 8");
    if (params_.gridStep < 1) throw Error(ErrorCode::InvalidParameter, "gridStep must be >= 1");
  }

  LocalFeatureSet extract(const Image& image) const override {
    if (params_.feature == "lab") return extractLabPatches(image, params_.gridStep, params_.patchSize);
    auto features = extractDenseGradient(image, params_.gridStep, params_.patchSize);
    if (params_.feature == "rootsift") return toRootSift(features);
    return features;
  }

  int dimension() const override { return extractorDimension(params_.feature); }
  const ExtractorParams& params() const override { return params_; }

 private:
  ExtractorParams params_;
};

}  // namespace

std::shared_ptr<const Extractor> makeExtractor(const ExtractorParams& params) {
  Params p{{"gridStep", params.gridStep}, {"patchSize", params.patchSize}};
  return extractorRegistry().select(params.feature, p);
}

const Registry<Extractor>& extractorRegistry() {
  static const Registry<Extractor> registry = [] {
    Registry<Extractor> r("Extractor");
    for (const char* name : {"dense-sift", "rootsift", "lab"}) {
      r.add(name, {"gridStep", "patchSize"}, [name](const Params& p) {
        ExtractorParams ep;
        ep.feature = name;
        ep.gridStep = paramOr(p, "gridStep", 8);
        ep.patchSize = paramOr(p, "patchSize", 16);
        return std::make_shared<const GridExtractor>(ep);
      });
    }
    return r;
  }();
  return registry;
}

}  // namespace imgseek
