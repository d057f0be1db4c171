#pragma once

#include "imgseek/core.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace imgseek {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// 8-bit RGB raster, row-major.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  Rgb& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  const Rgb& at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const Rgb> pixels() const { return pixels_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Rgb> pixels_;
};

/// Grayscale luminance Y = 0.299 R + 0.587 G + 0.114 B, values in [0, 255].
/// Stored as rows x cols (height x width).
Eigen::MatrixXd luminance(const Image& img);

/// Bilinear resampling to width x height using pixel-centre alignment.
Eigen::MatrixXd resizeBilinear(const Eigen::MatrixXd& plane, int width, int height);

/// Decodes PNG or JPEG (detected by signature). Throws DecodeError.
Image decodeImage(std::span<const std::uint8_t> bytes);
Image loadImage(const std::filesystem::path& path);

std::vector<std::uint8_t> encodePng(const Image& img);
void savePng(const Image& img, const std::filesystem::path& path);

std::vector<std::uint8_t> base64Decode(std::string_view text);
std::string base64Encode(std::span<const std::uint8_t> bytes);

}  // namespace imgseek
