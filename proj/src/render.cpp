#include "sodyolo/render.hpp"

#include <algorithm>
#include <cmath>

namespace sodyolo {

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 10> kPalette{{
    {255, 56, 56}, {72, 249, 10}, {0, 148, 255}, {255, 178, 29}, {207, 210, 49},
    {146, 204, 23}, {61, 219, 134}, {26, 147, 52}, {255, 112, 31}, {203, 56, 255}}};

// 3x5 digit glyphs, one row per 3-bit mask (MSB = leftmost column).
constexpr std::array<std::array<std::uint8_t, 5>, 10> kDigits{{
    {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
    {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7}}};

void plot(Image& img, long x, long y, const std::array<std::uint8_t, 3>& c) {
  if (x < 0 || y < 0 || x >= static_cast<long>(img.width) || y >= static_cast<long>(img.height)) return;
  auto* p = img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
  std::copy(c.begin(), c.end(), p);
}

void outline(Image& img, const Box& b, const std::array<std::uint8_t, 3>& c) {
  const long x1 = std::lround(b.x1), y1 = std::lround(b.y1);
  const long x2 = std::max(x1, std::lround(b.x2) - 1), y2 = std::max(y1, std::lround(b.y2) - 1);
  for (long x = x1; x <= x2; ++x) {
    plot(img, x, y1, c);
    plot(img, x, y2, c);
  }
  for (long y = y1; y <= y2; ++y) {
    plot(img, x1, y, c);
    plot(img, x2, y, c);
  }
}

void label(Image& img, long x, long y, int value, const std::array<std::uint8_t, 3>& c) {
  const int digits[2] = {value / 10, value % 10};
  for (int d = 0; d < 2; ++d)
    for (int row = 0; row < 5; ++row)
      for (int col = 0; col < 3; ++col)
        if (kDigits[digits[d]][row] & (4 >> col)) plot(img, x + d * 4 + col, y + row, c);
}

}  // namespace

std::array<std::uint8_t, 3> class_color(int class_id) {
  const auto n = static_cast<int>(kPalette.size());
  return kPalette[static_cast<std::size_t>(((class_id % n) + n) % n)];
}

Image render_detections(const Image& image, const std::vector<Detection>& dets,
                        const std::vector<GroundTruth>& gts, const RenderOptions& opts) {
  Image out = image;
  if (opts.draw_ground_truth) {
    for (const auto& g : gts) outline(out, g.box, {255, 255, 255});
  }
  for (const auto& d : dets) {
    const auto c = class_color(d.class_id);
    outline(out, d.box, c);
    if (opts.score_labels) {
      const int pct = std::clamp(static_cast<int>(std::floor(d.score * 100.0)), 0, 99);
      const long y = std::lround(d.box.y1) - 6;
      label(out, std::lround(d.box.x1), y < 0 ? std::lround(d.box.y1) + 1 : y, pct, c);
    }
  }
  return out;
}

}  // namespace sodyolo
