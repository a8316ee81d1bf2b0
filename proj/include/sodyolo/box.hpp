#pragma once

#include <string>

namespace sodyolo {

// Axis-aligned box in image pixels, corners (x1, y1) top-left, (x2, y2)
// bottom-right.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  bool valid() const { return x1 < x2 && y1 < y2; }

  static Box from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

std::string to_string(const Box& b);

struct Detection {
  Box box;
  int class_id = 0;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// class_id < 0 marks a class-agnostic ignored region.
struct GroundTruth {
  Box box;
  int class_id = 0;
  bool ignore = false;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

// Intersection over union. Throws std::invalid_argument on a degenerate box.
double iou(const Box& a, const Box& b);

}  // namespace sodyolo
