#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace resplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Row-major raster, row 0 is the top of the image.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h) {}
  Image(int w, int h, const T& fill)
      : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  T& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
  bool contains(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  size_t size() const { return data.size(); }
  bool same_dims(const Image& o) const { return width == o.width && height == o.height; }
};

using ImageRGB = Image<Vec3>;
using ImageF = Image<double>;
using ImageU8 = Image<uint8_t>;

// PFM: "PF" header, width height, scale line "-1.0" (little-endian),
// rows stored bottom-to-top, 3 x f32 per pixel.
ImageRGB read_pfm(const std::string& path);
void write_pfm(const std::string& path, const ImageRGB& img);

// PNG. Grayscale images are treated as masks (0/255); RGB reads return
// linearized values (inverse gamma 2.2), writes tone-map with gamma 2.2.
ImageU8 read_png_mask(const std::string& path);
void write_png_mask(const std::string& path, const ImageU8& mask);
ImageRGB read_png_linear(const std::string& path);
void write_png_tonemapped(const std::string& path, const ImageRGB& img);

double psnr(const ImageRGB& a, const ImageRGB& b);

}  // namespace resplat
