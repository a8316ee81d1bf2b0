#include "sodyolo/box.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace sodyolo {

std::string to_string(const Box& b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "(%g,%g,%g,%g)", b.x1, b.y1, b.x2, b.y2);
  return buf;
}

double iou(const Box& a, const Box& b) {
  if (!a.valid() || !b.valid()) {
    throw std::invalid_argument("iou: degenerate box " + to_string(a.valid() ? b : a));
  }
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

}  // namespace sodyolo
