#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sodyolo/box.hpp"
#include "sodyolo/image.hpp"
#include "sodyolo/tensor.hpp"

namespace sodyolo {

inline constexpr std::size_t kVisDroneClasses = 10;
const std::array<std::string, kVisDroneClasses>& visdrone_class_names();

// "left,top,width,height,score,category,truncation,occlusion" per line.
// Category 1..10 maps to class 0..9, category 0 becomes an ignored region with
// class_id -1, category 11 is dropped. Malformed lines raise ParseError.
struct VisDroneParse {
  std::vector<GroundTruth> objects;
  std::size_t skipped_nonpositive = 0;
};

VisDroneParse parse_visdrone(const std::string& text);
std::string format_visdrone(const std::vector<GroundTruth>& gts);

struct LetterboxTransform {
  double scale = 1.0;
  double pad_x = 0.0;
  double pad_y = 0.0;

  Box apply(const Box& b) const;
  Box invert(const Box& b) const;
};

inline constexpr std::uint8_t kLetterboxPad = 114;

struct Letterboxed {
  Image image;
  LetterboxTransform transform;
};

// Aspect-preserving fit into target x target with centered gray padding.
Letterboxed letterbox(const Image& img, std::size_t target);

struct DatasetEntry {
  std::string image;       // relative to the dataset root
  std::string annotation;  // relative to the dataset root
};

struct DatasetIndex {
  std::string root;
  std::vector<DatasetEntry> entries;
  std::vector<std::string> class_names;

  std::string image_path(std::size_t i) const;
  std::string annotation_path(std::size_t i) const;
};

inline constexpr const char* kIndexFile = "index.txt";

// Reads <root>/index.txt: one "<image> <annotation>" pair per line.
DatasetIndex load_dataset(const std::string& root);
void write_index(const DatasetIndex& index);

struct Sample {
  std::string id;
  Image image;                   // letterboxed to the network input
  std::vector<GroundTruth> gts;  // in letterboxed pixels
  LetterboxTransform transform;  // original -> letterboxed
};

Sample load_sample(const DatasetIndex& index, std::size_t i, std::size_t input_size);

// (N, 3, H, W) with channels scaled to [0, 1].
Tensor images_to_tensor(const std::vector<const Image*>& images);

struct SynthConfig {
  std::size_t image_size = 64;
  std::size_t num_images = 8;
  std::size_t objects_min = 1;
  std::size_t objects_max = 4;
  std::size_t num_classes = 10;
  double tiny_fraction_target = 0.75;
  // Tiny band: integer areas in [tiny_min_area, 0.001 * image area).
  std::size_t tiny_min_area = 1;
  // Large band: integer areas in [max(large_min_area, 0.001 * image area), large_max_area].
  std::size_t large_min_area = 0;
  std::size_t large_max_area = 400;
  double clutter_level = 0.3;
  // Placement retries to keep pairwise IoU at or below this.
  double max_overlap = 0.3;
  std::string image_format = "ppm";
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthObject {
  std::size_t left = 0, top = 0, width = 0, height = 0;
  int class_id = 0;
};

// The object layout for image `index`; depends only on cfg and index.
std::vector<SynthObject> synth_layout(const SynthConfig& cfg, std::size_t index);
Image synth_render(const SynthConfig& cfg, std::size_t index,
                   const std::vector<SynthObject>& objects);

// Writes images/, annotations/ and index.txt under root.
DatasetIndex synth_generate(const SynthConfig& cfg, const std::string& root);

struct AreaStats {
  std::size_t total = 0;
  std::size_t tiny = 0;
  double tiny_fraction = 0.0;
  std::array<std::size_t, kVisDroneClasses> per_class{};
};

// Non-ignored boxes with w * h < 0.001 * image area count as tiny.
AreaStats area_stats(const DatasetIndex& index);
void accumulate_area_stats(AreaStats& stats, const std::vector<GroundTruth>& gts,
                           double image_area);

}  // namespace sodyolo
