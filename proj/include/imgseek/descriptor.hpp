#pragma once

#include "imgseek/core.hpp"
#include "imgseek/extractor.hpp"
#include "imgseek/image.hpp"
#include "imgseek/registry.hpp"
#include "imgseek/vocabulary.hpp"

#include <array>
#include <memory>
#include <optional>
#include <string>

namespace imgseek {

enum class Normalization { None, L1, L2 };

std::string_view toString(Normalization n);
Normalization normalizationFromString(std::string_view s);

/// Scales v to unit L1 or L2 norm; the zero vector stays zero.
template <typename Derived>
Vector normalized(const Eigen::MatrixBase<Derived>& v, Normalization n) {
  Vector out = v;
  double norm = 0.0;
  if (n == Normalization::L1)
    norm = out.template lpNorm<1>();
  else if (n == Normalization::L2)
    norm = out.norm();
  if (norm > 0) out /= norm;
  return out;
}

struct ImageGeometry {
  int width = 0;
  int height = 0;
};

Vector countAssignments(const LocalFeatureSet& features, const Codebook& codebook);

DescriptorVector describeBoVW(const LocalFeatureSet& features, const Codebook& codebook,
                              Normalization normalization = Normalization::L2);

BinaryDescriptorVector describeBinaryBoVW(const LocalFeatureSet& features, const Codebook& codebook);

/// G x G equal cells, per-cell L1-normalised histograms concatenated row-major.
DescriptorVector describeGridBoVW(ImageGeometry geometry, const LocalFeatureSet& features,
                                  const Codebook& codebook, int gridCells);

/// Pyramid-match weight of `level` in a pyramid of `levels` levels:
/// 1/2^P at level 0, 1/2^(P-l+1) above it.
double spmLevelWeight(int level, int levels);

/// Levels 0..P-1 of 2^l x 2^l cell histograms. Every level is divided by the
/// total feature count and scaled by its pyramid weight.
DescriptorVector describeSpmBoVW(ImageGeometry geometry, const LocalFeatureSet& features,
                                 const Codebook& codebook, int levels);

/// Per-centroid residual sums (length k*d), globally L2-normalised.
DescriptorVector describeVlad(const LocalFeatureSet& features, const Codebook& codebook);

DescriptorVector describeHsvHistogram(const Image& image, int binsH = 8, int binsS = 4, int binsV = 4);

/// Bilinear miniature, unsigned orientation histograms per cell, each cell
/// L2-normalised.
DescriptorVector describeHogMiniature(const Image& image, int miniSize = 32, int cells = 4, int bins = 9);

/// Mean and standard deviation of the response magnitude of a DC-free complex
/// Gabor bank, ordered (scale, orientation, {mean, std}).
DescriptorVector describeGabor(const Image& image, int scales = 4, int orientations = 6);

/// 8x8 YCbCr averages, orthonormal 2-D DCT, zigzag: 6 Y + 3 Cb + 3 Cr.
DescriptorVector describeColorLayout(const Image& image);

/// Colour conversion used by describeHsvHistogram. h in [0, 360), s and v in [0, 1].
Eigen::Vector3d rgbToHsv(const Rgb& px);

struct DescriptorParams {
  std::string representation = "bovw";
  std::optional<std::string> vocabRef;
  int gridCells = 2;
  int pyramidLevels = 2;
  Normalization normalization = Normalization::L2;
  std::array<int, 3> hsvBins{8, 4, 4};
  int hogMiniSize = 32;
  int hogCells = 4;
  int hogBins = 9;
  int gaborScales = 4;
  int gaborOrientations = 6;

  bool operator==(const DescriptorParams&) const = default;
};

bool isVocabularyBased(const std::string& representation);

/// The Descriptor component.
class Descriptor {
 public:
  virtual ~Descriptor() = default;
  virtual bool needsLocalFeatures() const = 0;
  /// `features` must be non-null when needsLocalFeatures().
  virtual DescriptorVector describe(const Image& image, const LocalFeatureSet* features) const = 0;
  virtual int dimension() const = 0;
  virtual const DescriptorParams& params() const = 0;
};

std::shared_ptr<const Descriptor> makeDescriptor(const DescriptorParams& params,
                                                 std::shared_ptr<const Codebook> codebook);
/// Registry parameters mirror DescriptorParams field names; "vocab" names a
/// codebook file for vocabulary-based representations.
const Registry<Descriptor>& descriptorRegistry();

/// Output length of a representation given vocabulary size k and local
/// feature dimension d.
int descriptorDimension(const DescriptorParams& params, int k, int d);

}  // namespace imgseek
