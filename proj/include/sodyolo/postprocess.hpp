#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sodyolo/box.hpp"

namespace sodyolo {

enum class SuppressionMode { kHard, kSoftLinear };

std::string to_string(SuppressionMode mode);
// Accepts "hard" and "soft-linear"; anything else is std::invalid_argument.
SuppressionMode parse_suppression_mode(const std::string& text);

struct SuppressionConfig {
  double nt = 0.5;             // overlap threshold N_t
  double score_floor = 0.001;  // boxes must end strictly above this
  SuppressionMode mode = SuppressionMode::kSoftLinear;
  bool class_agnostic = false;

  void validate() const;
};

// Greedy NMS: overlapping same-class boxes with IoU >= nt get score 0.
std::vector<Detection> hard_nms(const std::vector<Detection>& dets, const SuppressionConfig& cfg);

// Linear Soft-NMS: overlapping same-class boxes with IoU >= nt get their
// score multiplied by (1 - IoU); boxes are re-ranked by current score each round.
std::vector<Detection> soft_nms(const std::vector<Detection>& dets, const SuppressionConfig& cfg);

// Dispatches on cfg.mode.
std::vector<Detection> suppress(const std::vector<Detection>& dets, const SuppressionConfig& cfg);

namespace detail {

// Shared greedy loop: each round selects the highest-scoring unprocessed box
// (lowest input index on ties) and multiplies the score of every unprocessed
// competitor with IoU >= nt by decay(iou). Output keeps score > score_floor,
// sorted by score descending, ties by input index.
std::vector<Detection> greedy_rescore(const std::vector<Detection>& dets,
                                      const SuppressionConfig& cfg,
                                      const std::function<double(double)>& decay);

}  // namespace detail

}  // namespace sodyolo
