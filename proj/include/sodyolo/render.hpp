#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sodyolo/box.hpp"
#include "sodyolo/image.hpp"

namespace sodyolo {

struct RenderOptions {
  bool score_labels = true;
  bool draw_ground_truth = true;
};

// Fixed palette; class ids wrap around it.
std::array<std::uint8_t, 3> class_color(int class_id);

// Class-colored one-pixel outlines for detections (with a two-digit score
// label above each when enabled) and white outlines for ground truth.
Image render_detections(const Image& image, const std::vector<Detection>& dets,
                        const std::vector<GroundTruth>& gts = {}, const RenderOptions& opts = {});

}  // namespace sodyolo
