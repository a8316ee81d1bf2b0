#include "sodyolo/postprocess.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace sodyolo {

std::string to_string(SuppressionMode mode) {
  switch (mode) {
    case SuppressionMode::kHard:
      return "hard";
    case SuppressionMode::kSoftLinear:
      return "soft-linear";
  }
  return "unknown";
}

SuppressionMode parse_suppression_mode(const std::string& text) {
  if (text == "hard") return SuppressionMode::kHard;
  if (text == "soft-linear" || text == "soft") return SuppressionMode::kSoftLinear;
  throw std::invalid_argument("unknown suppression mode '" + text +
                              "' (expected hard or soft-linear)");
}

void SuppressionConfig::validate() const {
  if (!(nt > 0.0 && nt < 1.0)) {
    throw std::invalid_argument("suppression: nt must lie in (0, 1), got " + std::to_string(nt));
  }
  if (!(score_floor >= 0.0 && score_floor < 1.0)) {
    throw std::invalid_argument("suppression: score_floor must lie in [0, 1), got " +
                                std::to_string(score_floor));
  }
}

namespace detail {

std::vector<Detection> greedy_rescore(const std::vector<Detection>& dets,
                                      const SuppressionConfig& cfg,
                                      const std::function<double(double)>& decay) {
  cfg.validate();
  const std::size_t n = dets.size();
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) score[i] = dets[i].score;
  std::vector<bool> done(n, false);

  for (std::size_t round = 0; round < n; ++round) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) continue;
      if (best == n || score[i] > score[best]) best = i;
    }
    done[best] = true;
    const Detection& a = dets[best];
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) continue;
      if (!cfg.class_agnostic && dets[i].class_id != a.class_id) continue;
      const double o = iou(a.box, dets[i].box);
      if (o >= cfg.nt) score[i] *= decay(o);
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return score[x] > score[y]; });
  std::vector<Detection> out;
  for (auto i : order) {
    if (!(score[i] > cfg.score_floor)) continue;
    Detection d = dets[i];
    d.score = score[i];
    out.push_back(d);
  }
  return out;
}

}  // namespace detail

std::vector<Detection> hard_nms(const std::vector<Detection>& dets, const SuppressionConfig& cfg) {
  return detail::greedy_rescore(dets, cfg, [](double) { return 0.0; });
}

std::vector<Detection> soft_nms(const std::vector<Detection>& dets, const SuppressionConfig& cfg) {
  return detail::greedy_rescore(dets, cfg, [](double o) { return 1.0 - o; });
}

std::vector<Detection> suppress(const std::vector<Detection>& dets, const SuppressionConfig& cfg) {
  switch (cfg.mode) {
    case SuppressionMode::kHard:
      return hard_nms(dets, cfg);
    case SuppressionMode::kSoftLinear:
      return soft_nms(dets, cfg);
  }
  throw std::invalid_argument("suppress: unknown mode");
}

}  // namespace sodyolo
