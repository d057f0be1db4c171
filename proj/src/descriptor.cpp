#include "imgseek/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace imgseek {

std::string_view toString(Normalization n) {
  switch (n) {
    case Normalization::None: return "none";
    case Normalization::L1: return "l1";
    case Normalization::L2: return "l2";
  }
  return "none";
}

Normalization normalizationFromString(std::string_view s) {
  if (s == "none") return Normalization::None;
  if (s == "l1") return Normalization::L1;
  if (s == "l2") return Normalization::L2;
  throw Error(ErrorCode::InvalidParameter, "unknown normalization '" + std::string(s) + "'");
}

namespace {

void checkFeatureDim(const LocalFeatureSet& features, const Codebook& codebook) {
  if (features.size() > 0 && features.dimension() != codebook.dimension())
    throw Error(ErrorCode::DimensionMismatch, "feature dimension " + std::to_string(features.dimension()) +
                                                  " != codebook dimension " + std::to_string(codebook.dimension()));
}

std::vector<Eigen::Index> assignAll(const LocalFeatureSet& features, const Codebook& codebook) {
  checkFeatureDim(features, codebook);
  std::vector<Eigen::Index> out(features.size());
  for (std::size_t i = 0; i < features.size(); ++i)
    out[i] = assign(features.descriptors.row(static_cast<Eigen::Index>(i)).transpose(), codebook);
  return out;
}

int cellIndex(double coord, int extent, int cells) {
  const int c = static_cast<int>(std::floor(coord * cells / extent));
  return std::clamp(c, 0, cells - 1);
}

}  // namespace

Vector countAssignments(const LocalFeatureSet& features, const Codebook& codebook) {
  Vector hist = Vector::Zero(codebook.k());
  for (auto idx : assignAll(features, codebook)) hist[idx] += 1.0;
  return hist;
}

DescriptorVector describeBoVW(const LocalFeatureSet& features, const Codebook& codebook,
                              Normalization normalization) {
  DescriptorVector out;
  out.featureId = "bovw";
  out.values = normalized(countAssignments(features, codebook), normalization);
  out.fromEmptyFeatures = features.size() == 0;
  return out;
}

BinaryDescriptorVector describeBinaryBoVW(const LocalFeatureSet& features, const Codebook& codebook) {
  BinaryDescriptorVector out("binary-bovw", static_cast<std::size_t>(codebook.k()));
  for (auto idx : assignAll(features, codebook)) out.set(static_cast<std::size_t>(idx));
  return out;
}

DescriptorVector describeGridBoVW(ImageGeometry geometry, const LocalFeatureSet& features,
                                  const Codebook& codebook, int gridCells) {
  if (gridCells < 1) throw Error(ErrorCode::InvalidParameter, "gridCells must be >= 1");
  const Eigen::Index k = codebook.k();
  Vector out = Vector::Zero(k * gridCells * gridCells);
  const auto labels = assignAll(features, codebook);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int cx = cellIndex(features.keypoints[i].x, geometry.width, gridCells);
    const int cy = cellIndex(features.keypoints[i].y, geometry.height, gridCells);
    out[(cy * gridCells + cx) * k + labels[i]] += 1.0;
  }
  for (int cell = 0; cell < gridCells * gridCells; ++cell) {
    auto seg = out.segment(cell * k, k);
    const double mass = seg.sum();
    if (mass > 0) seg /= mass;
  }
  return {"grid-bovw", out, features.size() == 0};
}

double spmLevelWeight(int level, int levels) {
  if (level == 0) return 1.0 / std::ldexp(1.0, levels);
  return 1.0 / std::ldexp(1.0, levels - level + 1);
}

DescriptorVector describeSpmBoVW(ImageGeometry geometry, const LocalFeatureSet& features,
                                 const Codebook& codebook, int levels) {
  if (levels < 1) throw Error(ErrorCode::InvalidParameter, "pyramidLevels must be >= 1");
  const Eigen::Index k = codebook.k();
  Eigen::Index total = 0;
  for (int l = 0; l < levels; ++l) total += k * (Eigen::Index{1} << (2 * l));
  Vector out = Vector::Zero(total);
  const auto labels = assignAll(features, codebook);
  const double n = static_cast<double>(labels.size());
  Eigen::Index offset = 0;
  for (int l = 0; l < levels; ++l) {
    const int cells = 1 << l;
    const double w = spmLevelWeight(l, levels);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int cx = cellIndex(features.keypoints[i].x, geometry.width, cells);
      const int cy = cellIndex(features.keypoints[i].y, geometry.height, cells);
      out[offset + (cy * cells + cx) * k + labels[i]] += w / n;
    }
    offset += k * cells * cells;
  }
  return {"spm-bovw", out, labels.empty()};
}

DescriptorVector describeVlad(const LocalFeatureSet& features, const Codebook& codebook) {
  const Eigen::Index k = codebook.k();
  const Eigen::Index d = codebook.dimension();
  Vector out = Vector::Zero(k * d);
  const auto labels = assignAll(features, codebook);
  for (std::size_t i = 0; i < labels.size(); ++i)
    out.segment(labels[i] * d, d) +=
        features.descriptors.row(static_cast<Eigen::Index>(i)).transpose() - codebook.centroids.row(labels[i]).transpose();
  return {"vlad", normalized(out, Normalization::L2), labels.empty()};
}

Eigen::Vector3d rgbToHsv(const Rgb& px) {
  const double r = px.r / 255.0, g = px.g / 255.0, b = px.b / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  double h = 0.0;
  if (delta > 0) {
    if (mx == r)
      h = 60.0 * std::fmod((g - b) / delta, 6.0);
    else if (mx == g)
      h = 60.0 * ((b - r) / delta + 2.0);
    else
      h = 60.0 * ((r - g) / delta + 4.0);
    if (h < 0) h += 360.0;
  }
  const double s = mx > 0 ? delta / mx : 0.0;
  return {h, s, mx};
}

DescriptorVector describeHsvHistogram(const Image& image, int binsH, int binsS, int binsV) {
  if (binsH < 1 || binsS < 1 || binsV < 1) throw Error(ErrorCode::InvalidParameter, "HSV bins must be >= 1");
  Vector hist = Vector::Zero(binsH * binsS * binsV);
  for (const Rgb& px : image.pixels()) {
    const Eigen::Vector3d hsv = rgbToHsv(px);
    const int h = std::min(binsH - 1, static_cast<int>(hsv[0] / 360.0 * binsH));
    const int s = std::min(binsS - 1, static_cast<int>(hsv[1] * binsS));
    const int v = std::min(binsV - 1, static_cast<int>(hsv[2] * binsV));
    hist[(h * binsS + s) * binsV + v] += 1.0;
  }
  return {"hsv-hist", normalized(hist, Normalization::L1), false};
}

DescriptorVector describeHogMiniature(const Image& image, int miniSize, int cells, int bins) {
  if (miniSize < 2 || cells < 1 || bins < 1 || cells > miniSize)
    throw Error(ErrorCode::InvalidParameter, "invalid HoG miniature geometry");
  const Eigen::MatrixXd mini = resizeBilinear(luminance(image), miniSize, miniSize);
  Vector out = Vector::Zero(cells * cells * bins);
  for (int r = 0; r < miniSize; ++r)
    for (int c = 0; c < miniSize; ++c) {
      const double gx = 0.5 * (mini(r, std::min(c + 1, miniSize - 1)) - mini(r, std::max(c - 1, 0)));
      const double gy = 0.5 * (mini(std::min(r + 1, miniSize - 1), c) - mini(std::max(r - 1, 0), c));
      const double mag = std::hypot(gx, gy);
      if (mag == 0) continue;
      double angle = std::atan2(gy, gx);
      if (angle < 0) angle += std::numbers::pi;
      if (angle >= std::numbers::pi) angle -= std::numbers::pi;
      const int b = std::min(bins - 1, static_cast<int>(angle / std::numbers::pi * bins));
      const int cell = (r * cells / miniSize) * cells + (c * cells / miniSize);
      out[cell * bins + b] += mag;
    }
  for (int cell = 0; cell < cells * cells; ++cell) {
    auto seg = out.segment(cell * bins, bins);
    const double norm = seg.norm();
    if (norm > 0) seg /= norm;
  }
  return {"hog-mini", out, false};
}

namespace {

constexpr int kGaborMaxSide = 64;

struct GaborKernel {
  int radius = 0;
  Eigen::MatrixXcd taps;
};

GaborKernel makeGabor(double wavelength, double theta) {
  const double sigma = 0.56 * wavelength;
  GaborKernel k;
  k.radius = static_cast<int>(std::ceil(3.0 * sigma));
  const int size = 2 * k.radius + 1;
  Eigen::MatrixXd env(size, size);
  Eigen::MatrixXd phase(size, size);
  for (int y = -k.radius; y <= k.radius; ++y)
    for (int x = -k.radius; x <= k.radius; ++x) {
      env(y + k.radius, x + k.radius) = std::exp(-(x * x + y * y) / (2 * sigma * sigma));
      phase(y + k.radius, x + k.radius) =
          2.0 * std::numbers::pi * (x * std::cos(theta) + y * std::sin(theta)) / wavelength;
    }
  const double envSum = env.sum();
  // Remove the DC term of the even part so flat regions respond with zero.
  const double dc = (env.array() * phase.array().cos()).sum() / envSum;
  k.taps.resize(size, size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c)
      k.taps(r, c) = std::complex<double>(env(r, c) * (std::cos(phase(r, c)) - dc), env(r, c) * std::sin(phase(r, c))) /
                     envSum;
  return k;
}

}  // namespace

DescriptorVector describeGabor(const Image& image, int scales, int orientations) {
  if (scales < 1 || orientations < 1) throw Error(ErrorCode::InvalidParameter, "gabor scales/orientations must be >= 1");
  Eigen::MatrixXd plane = luminance(image) / 255.0;
  const int longest = std::max(image.width(), image.height());
  if (longest > kGaborMaxSide) {
    const double f = static_cast<double>(kGaborMaxSide) / longest;
    plane = resizeBilinear(plane, std::max(1, static_cast<int>(std::lround(image.width() * f))),
                           std::max(1, static_cast<int>(std::lround(image.height() * f))));
  }
  const int h = static_cast<int>(plane.rows());
  const int w = static_cast<int>(plane.cols());
  Vector out(2 * scales * orientations);
  for (int s = 0; s < scales; ++s) {
    const double wavelength = 4.0 * std::pow(std::numbers::sqrt2, s);
    for (int o = 0; o < orientations; ++o) {
      const GaborKernel k = makeGabor(wavelength, o * std::numbers::pi / orientations);
      double sum = 0.0, sumSq = 0.0;
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          std::complex<double> acc = 0.0;
          for (int dy = -k.radius; dy <= k.radius; ++dy) {
            const int rr = std::clamp(r + dy, 0, h - 1);
            for (int dx = -k.radius; dx <= k.radius; ++dx) {
              const int cc = std::clamp(c + dx, 0, w - 1);
              acc += k.taps(dy + k.radius, dx + k.radius) * plane(rr, cc);
            }
          }
          const double mag = std::abs(acc);
          sum += mag;
          sumSq += mag * mag;
        }
      const double n = static_cast<double>(h) * w;
      const double mean = sum / n;
      const double var = std::max(0.0, sumSq / n - mean * mean);
      out[(s * orientations + o) * 2] = mean;
      out[(s * orientations + o) * 2 + 1] = std::sqrt(var);
    }
  }
  return {"gabor", out, false};
}

DescriptorVector describeColorLayout(const Image& image) {
  constexpr int kBlocks = 8;
  std::array<Eigen::Matrix<double, kBlocks, kBlocks>, 3> planes;  // Y, Cb, Cr
  for (int by = 0; by < kBlocks; ++by) {
    const int y0 = by * image.height() / kBlocks;
    const int y1 = std::max(y0 + 1, (by + 1) * image.height() / kBlocks);
    for (int bx = 0; bx < kBlocks; ++bx) {
      const int x0 = bx * image.width() / kBlocks;
      const int x1 = std::max(x0 + 1, (bx + 1) * image.width() / kBlocks);
      Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          const Rgb& p = image.at(x, y);
          rgb += Eigen::Vector3d(p.r, p.g, p.b);
        }
      rgb /= static_cast<double>((y1 - y0) * (x1 - x0));
      planes[0](by, bx) = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
      planes[1](by, bx) = -0.168736 * rgb[0] - 0.331264 * rgb[1] + 0.5 * rgb[2] + 128.0;
      planes[2](by, bx) = 0.5 * rgb[0] - 0.418688 * rgb[1] - 0.081312 * rgb[2] + 128.0;
    }
  }
  Eigen::Matrix<double, kBlocks, kBlocks> basis;  // basis(u, x)
  for (int u = 0; u < kBlocks; ++u)
    for (int x = 0; x < kBlocks; ++x)
      basis(u, x) = (u == 0 ? std::sqrt(1.0 / kBlocks) : std::sqrt(2.0 / kBlocks)) *
                    std::cos((2 * x + 1) * u * std::numbers::pi / (2 * kBlocks));
  // Zigzag order, (row, col) = (vertical, horizontal) frequency.
  static constexpr std::array<std::pair<int, int>, 6> kZigzag{{{0, 0}, {0, 1}, {1, 0}, {2, 0}, {1, 1}, {0, 2}}};
  static constexpr std::array<int, 3> kKeep{6, 3, 3};
  Vector out(12);
  int pos = 0;
  for (int ch = 0; ch < 3; ++ch) {
    const Eigen::Matrix<double, kBlocks, kBlocks> coeffs = basis * planes[ch] * basis.transpose();
    for (int i = 0; i < kKeep[ch]; ++i) out[pos++] = coeffs(kZigzag[i].first, kZigzag[i].second);
  }
  return {"color-layout", out, false};
}

bool isVocabularyBased(const std::string& representation) {
  return representation == "bovw" || representation == "binary-bovw" || representation == "grid-bovw" ||
         representation == "spm-bovw" || representation == "vlad";
}

int descriptorDimension(const DescriptorParams& p, int k, int d) {
  const auto& r = p.representation;
  if (r == "bovw" || r == "binary-bovw") return k;
  if (r == "grid-bovw") return k * p.gridCells * p.gridCells;
  if (r == "spm-bovw") {
    int cells = 0;
    for (int l = 0; l < p.pyramidLevels; ++l) cells += 1 << (2 * l);
    return k * cells;
  }
  if (r == "vlad") return k * d;
  if (r == "hsv-hist") return p.hsvBins[0] * p.hsvBins[1] * p.hsvBins[2];
  if (r == "hog-mini") return p.hogCells * p.hogCells * p.hogBins;
  if (r == "gabor") return 2 * p.gaborScales * p.gaborOrientations;
  if (r == "color-layout") return 12;
  throw Error(ErrorCode::UnknownComponent, "Descriptor '" + r + "' is not registered");
}

namespace {

class VocabularyDescriptor final : public Descriptor {
 public:
  VocabularyDescriptor(DescriptorParams p, std::shared_ptr<const Codebook> codebook)
      : params_(std::move(p)), codebook_(std::move(codebook)) {
    if (!codebook_) throw Error(ErrorCode::MissingVocabulary, params_.representation + " requires a vocabulary");
    if (params_.gridCells < 1) throw Error(ErrorCode::InvalidParameter, "gridCells must be >= 1");
    if (params_.pyramidLevels < 1) throw Error(ErrorCode::InvalidParameter, "pyramidLevels must be >= 1");
  }

  bool needsLocalFeatures() const override { return true; }

  DescriptorVector describe(const Image& image, const LocalFeatureSet* features) const override {
    if (!features) throw Error(ErrorCode::InvalidParameter, params_.representation + " needs local features");
    const ImageGeometry geom{image.width(), image.height()};
    const auto& r = params_.representation;
    if (r == "bovw") return describeBoVW(*features, *codebook_, params_.normalization);
    if (r == "binary-bovw") {
      const auto bits = describeBinaryBoVW(*features, *codebook_);
      return {"binary-bovw", bits.toDense(), features->size() == 0};
    }
    if (r == "grid-bovw") return describeGridBoVW(geom, *features, *codebook_, params_.gridCells);
    if (r == "spm-bovw") return describeSpmBoVW(geom, *features, *codebook_, params_.pyramidLevels);
    return describeVlad(*features, *codebook_);
  }

  int dimension() const override {
    return descriptorDimension(params_, static_cast<int>(codebook_->k()), static_cast<int>(codebook_->dimension()));
  }
  const DescriptorParams& params() const override { return params_; }

 private:
  DescriptorParams params_;
  std::shared_ptr<const Codebook> codebook_;
};

class GlobalDescriptor final : public Descriptor {
 public:
  explicit GlobalDescriptor(DescriptorParams p) : params_(std::move(p)) {}

  bool needsLocalFeatures() const override { return false; }

  DescriptorVector describe(const Image& image, const LocalFeatureSet*) const override {
    const auto& r = params_.representation;
    if (r == "hsv-hist") return describeHsvHistogram(image, params_.hsvBins[0], params_.hsvBins[1], params_.hsvBins[2]);
    if (r == "hog-mini") return describeHogMiniature(image, params_.hogMiniSize, params_.hogCells, params_.hogBins);
    if (r == "gabor") return describeGabor(image, params_.gaborScales, params_.gaborOrientations);
    return describeColorLayout(image);
  }

  int dimension() const override { return descriptorDimension(params_, 0, 0); }
  const DescriptorParams& params() const override { return params_; }

 private:
  DescriptorParams params_;
};

DescriptorParams paramsFromJson(const std::string& name, const Params& p) {
  DescriptorParams d;
  d.representation = name;
  if (p.contains("vocab")) d.vocabRef = p.at("vocab").get<std::string>();
  d.gridCells = paramOr(p, "gridCells", d.gridCells);
  d.pyramidLevels = paramOr(p, "pyramidLevels", d.pyramidLevels);
  if (p.contains("normalization")) d.normalization = normalizationFromString(p.at("normalization").get<std::string>());
  if (p.contains("hsvBins")) d.hsvBins = p.at("hsvBins").get<std::array<int, 3>>();
  d.hogMiniSize = paramOr(p, "hogMiniSize", d.hogMiniSize);
  d.hogCells = paramOr(p, "hogCells", d.hogCells);
  d.hogBins = paramOr(p, "hogBins", d.hogBins);
  d.gaborScales = paramOr(p, "gaborScales", d.gaborScales);
  d.gaborOrientations = paramOr(p, "gaborOrientations", d.gaborOrientations);
  return d;
}

}  // namespace

std::shared_ptr<const Descriptor> makeDescriptor(const DescriptorParams& params,
                                                 std::shared_ptr<const Codebook> codebook) {
  if (isVocabularyBased(params.representation))
    return std::make_shared<const VocabularyDescriptor>(params, std::move(codebook));
  descriptorDimension(params, 0, 0);  // rejects unknown names
  return std::make_shared<const GlobalDescriptor>(params);
}

const Registry<Descriptor>& descriptorRegistry() {
  static const Registry<Descriptor> registry = [] {
    Registry<Descriptor> r("Descriptor");
    for (const char* name : {"bovw", "binary-bovw", "grid-bovw", "spm-bovw", "vlad"}) {
      r.add(name, {"vocab", "gridCells", "pyramidLevels", "normalization"}, [name](const Params& p) {
        auto d = paramsFromJson(name, p);
        if (!d.vocabRef) throw Error(ErrorCode::MissingVocabulary, std::string(name) + " requires a 'vocab' parameter");
        auto cb = std::make_shared<const Codebook>(loadCodebook(*d.vocabRef));
        return makeDescriptor(d, cb);
      });
    }
    r.add("hsv-hist", {"hsvBins"}, [](const Params& p) { return makeDescriptor(paramsFromJson("hsv-hist", p), nullptr); });
    r.add("hog-mini", {"hogMiniSize", "hogCells", "hogBins"},
          [](const Params& p) { return makeDescriptor(paramsFromJson("hog-mini", p), nullptr); });
    r.add("gabor", {"gaborScales", "gaborOrientations"},
          [](const Params& p) { return makeDescriptor(paramsFromJson("gabor", p), nullptr); });
    r.add("color-layout", {}, [](const Params& p) { return makeDescriptor(paramsFromJson("color-layout", p), nullptr); });
    return r;
  }();
  return registry;
}

}  // namespace imgseek
