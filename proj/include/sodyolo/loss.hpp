#pragma once

#include <cstddef>
#include <vector>

#include "sodyolo/box.hpp"
#include "sodyolo/model.hpp"
#include "sodyolo/tensor.hpp"

namespace sodyolo {

struct LossWeights {
  double objectness = 1.0;
  double classification = 0.5;
  double box = 5.0;
};

struct LossComponents {
  double objectness = 0.0;
  double classification = 0.0;
  double box = 0.0;
  double total = 0.0;
  std::size_t positives = 0;
};

struct LossResult {
  Tensor total;  // scalar, differentiable w.r.t. the raw head levels
  LossComponents components;
};

struct CellAssignment {
  std::size_t level = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t gt_index = 0;
};

// Largest stride s in {4, 8, 16, 32} with max(w, h) / s >= 2; 4 if none.
std::size_t assign_stride(double width, double height);

// One cell per non-ignored ground truth: the cell containing its center at
// the assigned level (center on a boundary goes to the lower index). A cell
// already claimed keeps its first ground truth.
std::vector<CellAssignment> assign_targets(const std::vector<GroundTruth>& gts,
                                           const ModelConfig& cfg);

// BCE objectness over all cells, BCE classes and (1 - IoU) at positive
// cells; each term summed and divided by the batch size.
LossResult detection_loss(const RawHeadOutput& raw,
                          const std::vector<std::vector<GroundTruth>>& gts,
                          const ModelConfig& cfg, const LossWeights& weights = {});

}  // namespace sodyolo
