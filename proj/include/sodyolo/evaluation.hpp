#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sodyolo/box.hpp"

namespace sodyolo {

enum class MatchFlag { kTruePositive, kFalsePositive, kIgnored };

struct MatchResult {
  // Detection indices in processing order: score descending, ties by index.
  std::vector<std::size_t> order;
  // Indexed like the input detections.
  std::vector<MatchFlag> flags;
  std::vector<int> matched_gt;  // -1 unless a true positive
  std::size_t num_gt = 0;       // non-ignored ground truths

  std::size_t true_positives() const;
  std::size_t false_positives() const;
};

// Greedy one-to-one matching on a single image and class subset. Each
// detection claims the highest-IoU unmatched non-ignored ground truth with
// IoU >= iou_thresh; failing that, a detection whose best overlap is an
// ignored region at IoU >= iou_thresh is flagged ignored; otherwise it is a
// false positive. Ground truths with ignore set or class_id < 0 are ignored
// regions.
MatchResult match(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                  double iou_thresh);

// precision = TP / (TP + FP), recall = TP / num_gt; 0/0 is 1.0 for both.
std::pair<double, double> precision_recall(const MatchResult& m);

struct ImageRecord {
  std::string image_id;
  std::vector<Detection> dets;
  std::vector<GroundTruth> gts;
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct ClassSweep {
  std::vector<PrPoint> points;  // one per non-ignored detection, score descending
  std::size_t num_gt = 0;
};

// Cumulative precision/recall for one class over the whole dataset. Ignored
// regions (any class_id < 0 or ignore set with a matching class) apply.
ClassSweep pr_sweep(const std::vector<ImageRecord>& images, int class_id, double iou_thresh);

// Mean of the enveloped precision at recall 0.00, 0.01, ..., 1.00 (zero where
// no point reaches the recall).
double interpolate_101(const std::vector<PrPoint>& points);
// Area under the precision envelope, integrated exactly over recall.
double envelope_area(const std::vector<PrPoint>& points);

// 101-point AP. With no ground truth of the class the result is 1.0 when
// there are no false positives and 0.0 otherwise.
double average_precision(const std::vector<ImageRecord>& images, int class_id,
                         double iou_thresh);

// The ten thresholds 0.50, 0.55, ..., 0.95, each generated as i / 100.
std::vector<double> coco_thresholds();

// Mean that returns x exactly when every element equals x.
double stable_mean(const std::vector<double>& values);

// Classes 0..num_classes-1 that have at least one non-ignored ground truth.
std::vector<int> classes_with_gt(const std::vector<ImageRecord>& images,
                                 std::size_t num_classes);

// Mean AP over classes with ground truth; UndefinedMetricError if none.
double map_at(const std::vector<ImageRecord>& images, std::size_t num_classes,
              double iou_thresh);
double map50(const std::vector<ImageRecord>& images, std::size_t num_classes);
double map5095(const std::vector<ImageRecord>& images, std::size_t num_classes,
               const std::vector<double>& thresholds = coco_thresholds());

struct EvalOptions {
  std::vector<double> thresholds = coco_thresholds();
  // Score at which the single precision/recall pair is measured (IoU 0.5).
  double operating_score = 0.25;
  std::string suppression = "none";
};

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<double> thresholds;
  // ap[c][t]; empty optional for classes without ground truth.
  std::vector<std::vector<std::optional<double>>> ap;
  double map50 = 0.0;
  double map5095 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double operating_score = 0.0;
  std::size_t num_images = 0;
  std::size_t num_detections = 0;  // at or above operating_score
  std::size_t num_gt = 0;
  std::string suppression;

  // One "key=value" line per metric: map50, map5095, ap50.<class>, ...
  std::string to_text() const;
  std::string to_json() const;
};

// thresholds must contain 0.5 (it supplies map50).
EvalReport evaluate_records(const std::vector<ImageRecord>& images,
                            const std::vector<std::string>& class_names,
                            const EvalOptions& opts = {});

// Detection dump: one JSON object per line with image_id, class_id, score,
// x1, y1, x2, y2.
struct DetectionRecord {
  std::string image_id;
  Detection det;
};

std::string format_detections(const std::vector<DetectionRecord>& records);
std::vector<DetectionRecord> parse_detections(const std::string& text);

}  // namespace sodyolo
