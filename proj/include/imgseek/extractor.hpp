#pragma once

#include "imgseek/core.hpp"
#include "imgseek/image.hpp"
#include "imgseek/registry.hpp"

#include <memory>
#include <string>
#include <vector>

namespace imgseek {

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double scale = 0.0;

  bool operator==(const Keypoint&) const = default;
};

/// Local descriptors sampled from one image; row i of `descriptors` belongs to
/// keypoints[i].
struct LocalFeatureSet {
  std::string featureId;
  std::vector<Keypoint> keypoints;
  RowMatrix descriptors;

  std::size_t size() const { return keypoints.size(); }
  Eigen::Index dimension() const { return descriptors.cols(); }
  DescriptorVector descriptor(std::size_t i) const;

  bool operator==(const LocalFeatureSet&) const = default;
};

struct ExtractorParams {
  std::string feature = "dense-sift";  // dense-sift | rootsift | lab
  int gridStep = 8;
  int patchSize = 16;

  bool operator==(const ExtractorParams&) const = default;
};

inline constexpr int kDenseGradientDim = 128;
inline constexpr int kLabPatchDim = 48;

/// Dense SIFT-style descriptor: 4x4 spatial cells x 8 orientation bins of the
/// luminance gradient, L2-normalised, clipped at 0.2 and renormalised.
LocalFeatureSet extractDenseGradient(const Image& image, int gridStep, int patchSize);

/// L1-normalise then take the element-wise square root of each descriptor.
LocalFeatureSet toRootSift(const LocalFeatureSet& features);

/// Mean CIE Lab (D65) over 4x4 subregions per patch; 48-d, cell-major
/// [L, a, b] triples.
LocalFeatureSet extractLabPatches(const Image& image, int gridStep, int patchSize);

/// sRGB (0..255) to CIE Lab under the D65 white point.
Eigen::Vector3d srgbToLab(const Rgb& px);

/// The Extractor component.
class Extractor {
 public:
  virtual ~Extractor() = default;
  virtual LocalFeatureSet extract(const Image& image) const = 0;
  virtual int dimension() const = 0;
  virtual const ExtractorParams& params() const = 0;
};

std::shared_ptr<const Extractor> makeExtractor(const ExtractorParams& params);
const Registry<Extractor>& extractorRegistry();

int extractorDimension(const std::string& feature);

}  // namespace imgseek
