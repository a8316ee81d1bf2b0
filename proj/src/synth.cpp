#include "sodyolo/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "sodyolo/rng.hpp"

namespace sodyolo {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, kVisDroneClasses> kClassColors{{
    {230, 40, 40}, {40, 200, 40}, {40, 80, 230}, {230, 210, 30}, {220, 40, 220},
    {30, 210, 210}, {240, 130, 20}, {140, 40, 200}, {255, 255, 255}, {20, 20, 20}}};

struct Band {
  std::size_t lo = 0, hi = 0;
  bool empty() const { return lo > hi; }
};

double tiny_threshold(const SynthConfig& cfg) {
  return 0.001 * static_cast<double>(cfg.image_size) * static_cast<double>(cfg.image_size);
}

Band tiny_band(const SynthConfig& cfg) {
  const double t = tiny_threshold(cfg);
  // Largest integer strictly below t.
  const auto hi = static_cast<std::size_t>(std::ceil(t)) - 1;
  return {std::max<std::size_t>(cfg.tiny_min_area, 1), hi};
}

Band large_band(const SynthConfig& cfg) {
  const auto lo = static_cast<std::size_t>(std::ceil(tiny_threshold(cfg)));
  return {std::max(lo, cfg.large_min_area), cfg.large_max_area};
}

// Integer (w, h) with lo <= w * h <= hi, aspect roughly within [1/2, 2].
std::pair<std::size_t, std::size_t> sample_size(Rng& rng, Band band, std::size_t side) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    const auto a = static_cast<double>(rng.uniform_int(static_cast<std::int64_t>(band.lo),
                                                       static_cast<std::int64_t>(band.hi)));
    const double f = 0.7 + 0.6 * rng.uniform01();
    const auto w = static_cast<std::size_t>(std::max(1.0, std::round(std::sqrt(a) * f)));
    const auto h = static_cast<std::size_t>(std::max(1.0, std::round(a / static_cast<double>(w))));
    if (w <= side && h <= side && w * h >= band.lo && w * h <= band.hi) return {w, h};
  }
  for (;;) {
    const auto w = static_cast<std::size_t>(rng.uniform_int(
        static_cast<std::int64_t>(std::max<std::size_t>(1, (band.lo + side - 1) / side)),
        static_cast<std::int64_t>(std::min(side, band.hi))));
    const std::size_t hlo = std::max<std::size_t>(1, (band.lo + w - 1) / w);
    const std::size_t hhi = std::min(side, band.hi / w);
    if (hlo <= hhi) {
      return {w, static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(hlo),
                                                          static_cast<std::int64_t>(hhi)))};
    }
  }
}

// Sum of two uniforms: triangular, peaked at the image center.
std::size_t central_coordinate(Rng& rng, std::size_t max_pos) {
  const auto m = static_cast<std::int64_t>(max_pos);
  return static_cast<std::size_t>((rng.uniform_int(0, m) + rng.uniform_int(0, m)) / 2);
}

Box to_box(const SynthObject& o) {
  return {static_cast<double>(o.left), static_cast<double>(o.top),
          static_cast<double>(o.left + o.width), static_cast<double>(o.top + o.height)};
}

bool inside_shape(int cls, std::size_t i, std::size_t j, std::size_t w, std::size_t h) {
  const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(w) - 0.5;
  const double v = (static_cast<double>(j) + 0.5) / static_cast<double>(h) - 0.5;
  const std::size_t t = std::max<std::size_t>(1, std::min(w, h) / 4);
  switch (cls) {
    case 0:
      return true;
    case 1:
      return u * u + v * v <= 0.25;
    case 2:
      return i < t || j < t || i + t >= w || j + t >= h;
    case 3:
      return std::abs(u) < 0.2 || std::abs(v) < 0.2;
    case 4:
      return 2.0 * std::abs(u) <= v + 0.5;
    case 5:
      return std::abs(u) + std::abs(v) <= 0.5;
    case 6:
      return (j / t) % 2 == 0;
    case 7:
      return (i / t) % 2 == 0;
    case 8:
      return ((i / t) + (j / t)) % 2 == 0;
    default: {
      const double r = u * u + v * v;
      return r <= 0.25 && r >= 0.06;
    }
  }
}

void put(Image& img, std::size_t x, std::size_t y, std::uint8_t r, std::uint8_t g,
         std::uint8_t b) {
  auto* p = img.at(x, y);
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

std::uint8_t clamp_byte(std::int64_t v) {
  return static_cast<std::uint8_t>(std::clamp<std::int64_t>(v, 0, 255));
}

}  // namespace

void SynthConfig::validate() const {
  if (image_size < 8) throw std::invalid_argument("synth: image_size must be at least 8");
  if (num_classes < 2 || num_classes > kVisDroneClasses) {
    throw std::invalid_argument("synth: num_classes must lie in 2..10");
  }
  if (objects_min > objects_max) throw std::invalid_argument("synth: objects_min > objects_max");
  if (!(tiny_fraction_target >= 0.0 && tiny_fraction_target <= 1.0)) {
    throw std::invalid_argument("synth: tiny_fraction_target must lie in [0, 1]");
  }
  if (!(clutter_level >= 0.0 && clutter_level <= 1.0)) {
    throw std::invalid_argument("synth: clutter_level must lie in [0, 1]");
  }
  if (!(max_overlap >= 0.0 && max_overlap <= 1.0)) {
    throw std::invalid_argument("synth: max_overlap must lie in [0, 1]");
  }
  if (image_format != "ppm" && image_format != "png") {
    throw std::invalid_argument("synth: image_format must be ppm or png");
  }
  const std::size_t side_area = image_size * image_size;
  if (tiny_fraction_target > 0.0 && tiny_band(*this).empty()) {
    throw std::invalid_argument("synth: tiny size band [" + std::to_string(tiny_min_area) +
                                ", 0.001 * image area) is empty");
  }
  if (tiny_fraction_target < 1.0) {
    const Band b = large_band(*this);
    if (b.empty() || b.lo > side_area) {
      throw std::invalid_argument("synth: large size band [" + std::to_string(b.lo) + ", " +
                                  std::to_string(b.hi) + "] is empty or exceeds the image");
    }
  }
}

std::vector<SynthObject> synth_layout(const SynthConfig& cfg, std::size_t index) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, index));
  const auto count = static_cast<std::size_t>(rng.uniform_int(
      static_cast<std::int64_t>(cfg.objects_min), static_cast<std::int64_t>(cfg.objects_max)));
  Band large = large_band(cfg);
  large.hi = std::min(large.hi, cfg.image_size * cfg.image_size);
  std::vector<SynthObject> objects;
  for (std::size_t k = 0; k < count; ++k) {
    const bool tiny = rng.bernoulli(cfg.tiny_fraction_target);
    const auto [w, h] = sample_size(rng, tiny ? tiny_band(cfg) : large, cfg.image_size);
    SynthObject o;
    o.width = w;
    o.height = h;
    o.class_id = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.num_classes) - 1));
    for (int attempt = 0; attempt < 50; ++attempt) {
      o.left = central_coordinate(rng, cfg.image_size - w);
      o.top = central_coordinate(rng, cfg.image_size - h);
      const Box b = to_box(o);
      const bool clear = std::none_of(objects.begin(), objects.end(), [&](const SynthObject& p) {
        return iou(b, to_box(p)) > cfg.max_overlap;
      });
      if (clear) break;
    }
    objects.push_back(o);
  }
  return objects;
}

Image synth_render(const SynthConfig& cfg, std::size_t index,
                   const std::vector<SynthObject>& objects) {
  Rng rng(derive_seed(derive_seed(cfg.seed, index), 0x7e57u));
  const std::size_t s = cfg.image_size;
  Image img(s, s);
  std::array<std::int64_t, 3> base{};
  for (auto& b : base) b = rng.uniform_int(70, 170);
  const std::size_t block = std::max<std::size_t>(4, s / 8);
  for (std::size_t y = 0; y < s; ++y) {
    for (std::size_t x = 0; x < s; ++x) {
      const std::int64_t tile = ((x / block) + (y / block)) % 2 == 0 ? 8 : -8;
      const std::int64_t noise = rng.uniform_int(-10, 10);
      put(img, x, y, clamp_byte(base[0] + tile + noise), clamp_byte(base[1] + tile + noise),
          clamp_byte(base[2] + tile + noise));
    }
  }
  const auto clutter = static_cast<std::size_t>(std::lround(cfg.clutter_level * 8.0));
  for (std::size_t k = 0; k < clutter; ++k) {
    const auto w = static_cast<std::size_t>(rng.uniform_int(2, std::max<std::int64_t>(2, s / 10)));
    const auto h = static_cast<std::size_t>(rng.uniform_int(2, std::max<std::int64_t>(2, s / 10)));
    const auto x0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(s - w)));
    const auto y0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(s - h)));
    const auto gray = clamp_byte(rng.uniform_int(40, 200));
    for (std::size_t y = y0; y < y0 + h; ++y)
      for (std::size_t x = x0; x < x0 + w; ++x) put(img, x, y, gray, gray, gray);
  }
  for (const auto& o : objects) {
    const auto& c = kClassColors[static_cast<std::size_t>(o.class_id)];
    bool any = false;
    for (std::size_t j = 0; j < o.height; ++j) {
      for (std::size_t i = 0; i < o.width; ++i) {
        if (!inside_shape(o.class_id, i, j, o.width, o.height)) continue;
        put(img, o.left + i, o.top + j, c[0], c[1], c[2]);
        any = true;
      }
    }
    if (!any) put(img, o.left + o.width / 2, o.top + o.height / 2, c[0], c[1], c[2]);
  }
  return img;
}

DatasetIndex synth_generate(const SynthConfig& cfg, const std::string& root) {
  cfg.validate();
  fs::create_directories(fs::path(root) / "images");
  fs::create_directories(fs::path(root) / "annotations");
  DatasetIndex index;
  index.root = root;
  index.class_names.assign(visdrone_class_names().begin(), visdrone_class_names().end());
  for (std::size_t i = 0; i < cfg.num_images; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "img_%05zu", i);
    DatasetEntry e{std::string("images/") + stem + "." + cfg.image_format,
                   std::string("annotations/") + stem + ".txt"};
    const auto objects = synth_layout(cfg, i);
    std::vector<GroundTruth> gts;
    for (const auto& o : objects) gts.push_back({to_box(o), o.class_id, false});
    write_file((fs::path(root) / e.annotation).string(), format_visdrone(gts));
    save_image(synth_render(cfg, i, objects), (fs::path(root) / e.image).string());
    index.entries.push_back(e);
  }
  write_index(index);
  return index;
}

}  // namespace sodyolo
