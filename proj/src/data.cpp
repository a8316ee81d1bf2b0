#include "sodyolo/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "sodyolo/errors.hpp"

namespace sodyolo {

namespace fs = std::filesystem;

const std::array<std::string, kVisDroneClasses>& visdrone_class_names() {
  static const std::array<std::string, kVisDroneClasses> names{
      "pedestrian", "people", "bicycle", "car", "van",
      "truck", "tricycle", "awning-tricycle", "bus", "motor"};
  return names;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

long long parse_field(const std::string& field, std::size_t lineno, std::size_t col) {
  const std::string f = trim(field);
  long long v = 0;
  const auto* end = f.data() + f.size();
  const auto res = std::from_chars(f.data(), end, v);
  if (f.empty() || res.ec != std::errc() || res.ptr != end) {
    throw ParseError(lineno, "field " + std::to_string(col + 1) + " is not an integer: '" + f + "'");
  }
  return v;
}

}  // namespace

VisDroneParse parse_visdrone(const std::string& text) {
  VisDroneParse out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    // Some tool exports end every line with a trailing comma.
    if (!line.empty() && line.back() == ',') fields.push_back("");
    while (fields.size() > 8 && trim(fields.back()).empty()) fields.pop_back();
    if (fields.size() < 8) {
      throw ParseError(lineno, "expected 8 comma-separated fields, got " +
                                   std::to_string(fields.size()));
    }
    std::array<long long, 8> v{};
    for (std::size_t i = 0; i < 8; ++i) v[i] = parse_field(fields[i], lineno, i);
    const long long category = v[5];
    if (category < 0 || category > 11) {
      throw ParseError(lineno, "category " + std::to_string(category) + " outside 0..11");
    }
    if (category == 11) continue;
    if (v[2] <= 0 || v[3] <= 0) {
      ++out.skipped_nonpositive;
      continue;
    }
    GroundTruth g;
    g.box = {static_cast<double>(v[0]), static_cast<double>(v[1]),
             static_cast<double>(v[0] + v[2]), static_cast<double>(v[1] + v[3])};
    if (category == 0) {
      g.class_id = -1;
      g.ignore = true;
    } else {
      g.class_id = static_cast<int>(category - 1);
    }
    out.objects.push_back(g);
  }
  return out;
}

std::string format_visdrone(const std::vector<GroundTruth>& gts) {
  std::string out;
  for (const auto& g : gts) {
    const auto left = std::lround(g.box.x1), top = std::lround(g.box.y1);
    const auto w = std::lround(g.box.x2) - left, h = std::lround(g.box.y2) - top;
    const bool ignored = g.ignore || g.class_id < 0;
    const long category = ignored ? 0 : g.class_id + 1;
    out += std::to_string(left) + "," + std::to_string(top) + "," + std::to_string(w) + "," +
           std::to_string(h) + "," + (ignored ? "0" : "1") + "," + std::to_string(category) +
           ",0,0\n";
  }
  return out;
}

Box LetterboxTransform::apply(const Box& b) const {
  return {b.x1 * scale + pad_x, b.y1 * scale + pad_y, b.x2 * scale + pad_x, b.y2 * scale + pad_y};
}

Box LetterboxTransform::invert(const Box& b) const {
  return {(b.x1 - pad_x) / scale, (b.y1 - pad_y) / scale, (b.x2 - pad_x) / scale,
          (b.y2 - pad_y) / scale};
}

Letterboxed letterbox(const Image& img, std::size_t target) {
  if (img.empty()) throw std::invalid_argument("letterbox: empty image");
  if (target == 0 || target % 32 != 0) {
    throw std::invalid_argument("letterbox: target " + std::to_string(target) +
                                " is not a positive multiple of 32");
  }
  const double scale = std::min(static_cast<double>(target) / static_cast<double>(img.width),
                                static_cast<double>(target) / static_cast<double>(img.height));
  const auto new_w = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(img.width * scale)), 1, target);
  const auto new_h = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(img.height * scale)), 1, target);
  const std::size_t pad_x = (target - new_w) / 2, pad_y = (target - new_h) / 2;

  Letterboxed out;
  out.transform = {scale, static_cast<double>(pad_x), static_cast<double>(pad_y)};
  out.image = Image(target, target, kLetterboxPad);
  const Image resized =
      (new_w == img.width && new_h == img.height) ? img : resize_bilinear(img, new_w, new_h);
  for (std::size_t y = 0; y < new_h; ++y) {
    std::copy_n(resized.at(0, y), new_w * 3, out.image.at(pad_x, pad_y + y));
  }
  return out;
}

std::string DatasetIndex::image_path(std::size_t i) const {
  return (fs::path(root) / entries.at(i).image).string();
}

std::string DatasetIndex::annotation_path(std::size_t i) const {
  return (fs::path(root) / entries.at(i).annotation).string();
}

DatasetIndex load_dataset(const std::string& root) {
  DatasetIndex index;
  index.root = root;
  index.class_names.assign(visdrone_class_names().begin(), visdrone_class_names().end());
  const std::string path = (fs::path(root) / kIndexFile).string();
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    DatasetEntry e;
    if (!(ls >> e.image >> e.annotation)) {
      throw ParseError(lineno, path + ": expected '<image> <annotation>'");
    }
    index.entries.push_back(e);
  }
  return index;
}

void write_index(const DatasetIndex& index) {
  std::string out;
  for (const auto& e : index.entries) out += e.image + " " + e.annotation + "\n";
  write_file((fs::path(index.root) / kIndexFile).string(), out);
}

Sample load_sample(const DatasetIndex& index, std::size_t i, std::size_t input_size) {
  Sample s;
  s.id = fs::path(index.entries.at(i).image).stem().string();
  const Image raw = load_image(index.image_path(i));
  const VisDroneParse ann = [&] {
    try {
      return parse_visdrone(read_file(index.annotation_path(i)));
    } catch (const ParseError& e) {
      throw std::runtime_error(index.annotation_path(i) + ": " + e.what());
    }
  }();
  Letterboxed lb = letterbox(raw, input_size);
  s.image = std::move(lb.image);
  s.transform = lb.transform;
  const double limit = static_cast<double>(input_size);
  for (const auto& g : ann.objects) {
    GroundTruth t = g;
    t.box = lb.transform.apply(g.box);
    t.box = {std::clamp(t.box.x1, 0.0, limit), std::clamp(t.box.y1, 0.0, limit),
             std::clamp(t.box.x2, 0.0, limit), std::clamp(t.box.y2, 0.0, limit)};
    if (t.box.valid()) s.gts.push_back(t);
  }
  return s;
}

Tensor images_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw std::invalid_argument("images_to_tensor: empty batch");
  const std::size_t w = images[0]->width, h = images[0]->height;
  std::vector<double> v(images.size() * 3 * h * w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = *images[n];
    if (img.width != w || img.height != h) {
      throw std::invalid_argument("images_to_tensor: mixed image sizes in one batch");
    }
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          v[((n * 3 + c) * h + y) * w + x] = img.at(x, y)[c] / 255.0;
  }
  return Tensor({images.size(), 3, h, w}, std::move(v));
}

void accumulate_area_stats(AreaStats& stats, const std::vector<GroundTruth>& gts,
                           double image_area) {
  for (const auto& g : gts) {
    if (g.ignore || g.class_id < 0) continue;
    ++stats.total;
    if (g.box.area() < 0.001 * image_area) ++stats.tiny;
    if (g.class_id < static_cast<int>(kVisDroneClasses)) {
      ++stats.per_class[static_cast<std::size_t>(g.class_id)];
    }
  }
  stats.tiny_fraction =
      stats.total == 0 ? 0.0 : static_cast<double>(stats.tiny) / static_cast<double>(stats.total);
}

AreaStats area_stats(const DatasetIndex& index) {
  AreaStats stats;
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    const Image img = load_image(index.image_path(i));
    const auto ann = parse_visdrone(read_file(index.annotation_path(i)));
    accumulate_area_stats(stats, ann.objects,
                          static_cast<double>(img.width) * static_cast<double>(img.height));
  }
  return stats;
}

}  // namespace sodyolo
