#include "resplat/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace resplat {

ImageRGB read_pfm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open PFM: " + path);
  std::string magic;
  f >> magic;
  if (magic != "PF") throw std::runtime_error("bad PFM magic in " + path);
  int w, h;
  double scale;
  f >> w >> h >> scale;
  if (w <= 0 || h <= 0) throw std::runtime_error("bad PFM dims in " + path);
  if (scale >= 0) throw std::runtime_error("big-endian PFM unsupported: " + path);
  f.get();  // single whitespace after scale
  ImageRGB img(w, h);
  std::vector<float> row(static_cast<size_t>(w) * 3);
  for (int y = h - 1; y >= 0; --y) {  // bottom-to-top
    f.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
    if (!f) throw std::runtime_error("truncated PFM: " + path);
    for (int x = 0; x < w; ++x)
      img.at(x, y) = Vec3(row[3 * x], row[3 * x + 1], row[3 * x + 2]);
  }
  return img;
}

void write_pfm(const std::string& path, const ImageRGB& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write PFM: " + path);
  f << "PF\n" << img.width << " " << img.height << "\n-1.0\n";
  std::vector<float> row(static_cast<size_t>(img.width) * 3);
  for (int y = img.height - 1; y >= 0; --y) {
    for (int x = 0; x < img.width; ++x) {
      const Vec3& p = img.at(x, y);
      row[3 * x] = static_cast<float>(p.x());
      row[3 * x + 1] = static_cast<float>(p.y());
      row[3 * x + 2] = static_cast<float>(p.z());
    }
    f.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
  }
}

namespace {

struct PngReader {
  FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    if (fp) fclose(fp);
  }
};

struct PngWriter {
  FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, &info);
    if (fp) fclose(fp);
  }
};

// Reads any PNG as 8-bit RGB rows.
void read_png_rgb8(const std::string& path, int& w, int& h, std::vector<uint8_t>& rgb) {
  PngReader r;
  r.fp = fopen(path.c_str(), "rb");
  if (!r.fp) throw std::runtime_error("cannot open PNG: " + path);
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  r.info = png_create_info_struct(r.png);
  if (setjmp(png_jmpbuf(r.png))) throw std::runtime_error("PNG decode error: " + path);
  png_init_io(r.png, r.fp);
  png_read_info(r.png, r.info);
  png_set_expand(r.png);
  png_set_strip_16(r.png);
  png_set_strip_alpha(r.png);
  png_set_gray_to_rgb(r.png);
  png_read_update_info(r.png, r.info);
  w = static_cast<int>(png_get_image_width(r.png, r.info));
  h = static_cast<int>(png_get_image_height(r.png, r.info));
  rgb.resize(static_cast<size_t>(w) * h * 3);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = rgb.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
}

void write_png_bytes(const std::string& path, int w, int h, int channels,
                     const std::vector<uint8_t>& bytes) {
  PngWriter wr;
  wr.fp = fopen(path.c_str(), "wb");
  if (!wr.fp) throw std::runtime_error("cannot write PNG: " + path);
  wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  wr.info = png_create_info_struct(wr.png);
  if (setjmp(png_jmpbuf(wr.png))) throw std::runtime_error("PNG encode error: " + path);
  png_init_io(wr.png, wr.fp);
  int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(wr.png, wr.info, w, h, 8, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(wr.png, wr.info);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = const_cast<png_bytep>(bytes.data() + static_cast<size_t>(y) * w * channels);
  png_write_image(wr.png, rows.data());
  png_write_end(wr.png, nullptr);
}

}  // namespace

ImageU8 read_png_mask(const std::string& path) {
  int w, h;
  std::vector<uint8_t> rgb;
  read_png_rgb8(path, w, h, rgb);
  ImageU8 mask(w, h);
  for (size_t i = 0; i < mask.size(); ++i)
    mask.data[i] = rgb[3 * i] >= 128 ? 255 : 0;
  return mask;
}

void write_png_mask(const std::string& path, const ImageU8& mask) {
  std::vector<uint8_t> bytes(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) bytes[i] = mask.data[i] ? 255 : 0;
  write_png_bytes(path, mask.width, mask.height, 1, bytes);
}

ImageRGB read_png_linear(const std::string& path) {
  int w, h;
  std::vector<uint8_t> rgb;
  read_png_rgb8(path, w, h, rgb);
  ImageRGB img(w, h);
  for (size_t i = 0; i < img.size(); ++i) {
    for (int c = 0; c < 3; ++c)
      img.data[i][c] = std::pow(rgb[3 * i + c] / 255.0, 2.2);
  }
  return img;
}

void write_png_tonemapped(const std::string& path, const ImageRGB& img) {
  std::vector<uint8_t> bytes(img.size() * 3);
  for (size_t i = 0; i < img.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      double v = std::clamp(img.data[i][c], 0.0, 1.0);
      bytes[3 * i + c] = static_cast<uint8_t>(std::lround(std::pow(v, 1.0 / 2.2) * 255.0));
    }
  }
  write_png_bytes(path, img.width, img.height, 3, bytes);
}

double psnr(const ImageRGB& a, const ImageRGB& b) {
  if (!a.same_dims(b)) throw std::runtime_error("psnr: dimension mismatch");
  double mse = 0;
  for (size_t i = 0; i < a.size(); ++i) mse += (a.data[i] - b.data[i]).squaredNorm();
  mse /= static_cast<double>(a.size()) * 3.0;
  if (mse <= 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace resplat
