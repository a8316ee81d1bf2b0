#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sodyolo {

// 8-bit interleaved RGB raster.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel

  Image() = default;
  Image(std::size_t w, std::size_t h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(w * h * 3, fill) {}

  bool empty() const { return width == 0 || height == 0; }
  std::uint8_t* at(std::size_t x, std::size_t y) { return pixels.data() + (y * width + x) * 3; }
  const std::uint8_t* at(std::size_t x, std::size_t y) const {
    return pixels.data() + (y * width + x) * 3;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

std::string encode_ppm(const Image& img);
Image decode_ppm(const std::string& bytes);

std::string encode_png(const Image& img);
Image decode_png(const std::string& bytes);

// Format chosen by extension: .ppm or .png.
Image load_image(const std::string& path);
void save_image(const Image& img, const std::string& path);

// Bilinear resample with pixel-center alignment.
Image resize_bilinear(const Image& img, std::size_t width, std::size_t height);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace sodyolo
