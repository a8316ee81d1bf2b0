#include "sodyolo/loss.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <tuple>

namespace sodyolo {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Numerically stable BCE with logits.
double bce(double z, double target) {
  return std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
}

std::size_t level_of(std::size_t stride) {
  for (std::size_t i = 0; i < kNumLevels; ++i)
    if (kHeadStrides[i] == stride) return i;
  throw std::logic_error("no level for stride");
}

std::size_t cell_index(double center, std::size_t stride, std::size_t cells) {
  const double u = center / static_cast<double>(stride);
  double idx = std::floor(u);
  if (idx == u && idx > 0.0) idx -= 1.0;
  return static_cast<std::size_t>(std::clamp(idx, 0.0, static_cast<double>(cells - 1)));
}

struct IouGrad {
  double iou = 0.0;
  double dx1 = 0.0, dy1 = 0.0, dx2 = 0.0, dy2 = 0.0;
};

IouGrad iou_with_grad(const Box& p, const Box& g) {
  IouGrad r;
  const double ix1 = std::max(p.x1, g.x1), ix2 = std::min(p.x2, g.x2);
  const double iy1 = std::max(p.y1, g.y1), iy2 = std::min(p.y2, g.y2);
  const double iw = ix2 - ix1, ih = iy2 - iy1;
  if (iw <= 0.0 || ih <= 0.0) return r;
  const double inter = iw * ih;
  const double pw = p.width(), ph = p.height();
  const double uni = pw * ph + g.area() - inter;
  r.iou = inter / uni;
  const double di_x1 = p.x1 > g.x1 ? -ih : 0.0;
  const double di_x2 = p.x2 < g.x2 ? ih : 0.0;
  const double di_y1 = p.y1 > g.y1 ? -iw : 0.0;
  const double di_y2 = p.y2 < g.y2 ? iw : 0.0;
  auto d = [&](double di, double dap) { return (di * (uni + inter) - inter * dap) / (uni * uni); };
  r.dx1 = d(di_x1, -ph);
  r.dx2 = d(di_x2, ph);
  r.dy1 = d(di_y1, -pw);
  r.dy2 = d(di_y2, pw);
  return r;
}

}  // namespace

std::size_t assign_stride(double width, double height) {
  const double m = std::max(width, height);
  for (auto it = kHeadStrides.rbegin(); it != kHeadStrides.rend(); ++it) {
    if (m / static_cast<double>(*it) >= 2.0) return *it;
  }
  return kHeadStrides.front();
}

std::vector<CellAssignment> assign_targets(const std::vector<GroundTruth>& gts,
                                           const ModelConfig& cfg) {
  std::vector<CellAssignment> out;
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> taken;
  for (std::size_t k = 0; k < gts.size(); ++k) {
    const auto& gt = gts[k];
    if (gt.ignore || gt.class_id < 0) continue;
    if (!(gt.box.width() > 0.0) || !(gt.box.height() > 0.0)) {
      throw std::invalid_argument("loss: ground truth " + std::to_string(k) +
                                  " has non-positive size " + to_string(gt.box));
    }
    if (gt.class_id >= static_cast<int>(cfg.num_classes)) {
      throw std::invalid_argument("loss: ground truth class " + std::to_string(gt.class_id) +
                                  " outside model classes " + std::to_string(cfg.num_classes));
    }
    const std::size_t stride = assign_stride(gt.box.width(), gt.box.height());
    const std::size_t cells = cfg.input_size / stride;
    CellAssignment a;
    a.level = level_of(stride);
    a.row = cell_index(gt.box.cy(), stride, cells);
    a.col = cell_index(gt.box.cx(), stride, cells);
    a.gt_index = k;
    if (taken.insert({a.level, a.row, a.col}).second) out.push_back(a);
  }
  return out;
}

LossResult detection_loss(const RawHeadOutput& raw,
                          const std::vector<std::vector<GroundTruth>>& gts,
                          const ModelConfig& cfg, const LossWeights& weights) {
  const std::size_t batch = raw.levels[0].dim(0);
  if (gts.size() != batch) {
    throw std::invalid_argument("loss: " + std::to_string(gts.size()) +
                                " ground-truth lists for a batch of " + std::to_string(batch));
  }
  const std::size_t k = cfg.num_classes;
  const std::size_t ch = kBoxChannels + k;
  for (std::size_t lvl = 0; lvl < kNumLevels; ++lvl) {
    const std::size_t cells = cfg.input_size / kHeadStrides[lvl];
    const Shape want{batch, ch, cells, cells};
    if (raw.levels[lvl].shape() != want) {
      throw std::invalid_argument("loss: level " + std::to_string(lvl) + " has shape " +
                                  shape_str(raw.levels[lvl].shape()) + ", expected " +
                                  shape_str(want));
    }
  }

  std::array<std::vector<double>, kNumLevels> grads;
  for (std::size_t lvl = 0; lvl < kNumLevels; ++lvl) grads[lvl].assign(raw.levels[lvl].numel(), 0.0);

  LossComponents parts;
  const double inv_batch = 1.0 / static_cast<double>(batch);

  for (std::size_t n = 0; n < batch; ++n) {
    const auto assigned = assign_targets(gts[n], cfg);
    parts.positives += assigned.size();
    std::array<std::vector<int>, kNumLevels> target;  // gt index per cell or -1
    for (std::size_t lvl = 0; lvl < kNumLevels; ++lvl) {
      const std::size_t hw = raw.levels[lvl].dim(2) * raw.levels[lvl].dim(3);
      target[lvl].assign(hw, -1);
    }
    for (const auto& a : assigned) {
      const std::size_t w = raw.levels[a.level].dim(3);
      target[a.level][a.row * w + a.col] = static_cast<int>(a.gt_index);
    }

    for (std::size_t lvl = 0; lvl < kNumLevels; ++lvl) {
      const std::size_t h = raw.levels[lvl].dim(2), w = raw.levels[lvl].dim(3), hw = h * w;
      const double* base = raw.levels[lvl].data().data() + n * ch * hw;
      double* gbase = grads[lvl].data() + n * ch * hw;
      const std::size_t stride = kHeadStrides[lvl];
      for (std::size_t cell = 0; cell < hw; ++cell) {
        const int gi = target[lvl][cell];
        const double t_obj = gi >= 0 ? 1.0 : 0.0;
        const double z = base[4 * hw + cell];
        parts.objectness += bce(z, t_obj);
        gbase[4 * hw + cell] += weights.objectness * (sigmoid(z) - t_obj);
        if (gi < 0) continue;

        const GroundTruth& gt = gts[n][static_cast<std::size_t>(gi)];
        for (std::size_t c = 0; c < k; ++c) {
          const double t = static_cast<int>(c) == gt.class_id ? 1.0 : 0.0;
          const double zc = base[(kBoxChannels + c) * hw + cell];
          parts.classification += bce(zc, t);
          gbase[(kBoxChannels + c) * hw + cell] += weights.classification * (sigmoid(zc) - t);
        }

        const std::size_t row = cell / w, col = cell % w;
        const double tx = base[cell], ty = base[hw + cell];
        const double tw = base[2 * hw + cell], th = base[3 * hw + cell];
        const Box pred = decode_box({tx, ty, tw, th}, stride, row, col);
        const IouGrad ig = iou_with_grad(pred, gt.box);
        parts.box += 1.0 - ig.iou;
        // d(1 - IoU) through corners -> center/size -> logits.
        const double g_cx = -(ig.dx1 + ig.dx2);
        const double g_cy = -(ig.dy1 + ig.dy2);
        const double g_w = -(ig.dx2 - ig.dx1) * 0.5;
        const double g_h = -(ig.dy2 - ig.dy1) * 0.5;
        const double s = static_cast<double>(stride);
        const double sx = sigmoid(tx), sy = sigmoid(ty);
        const double dw = tw < kSizeLogitClamp ? pred.width() : 0.0;
        const double dh = th < kSizeLogitClamp ? pred.height() : 0.0;
        gbase[cell] += weights.box * g_cx * s * sx * (1.0 - sx);
        gbase[hw + cell] += weights.box * g_cy * s * sy * (1.0 - sy);
        gbase[2 * hw + cell] += weights.box * g_w * dw;
        gbase[3 * hw + cell] += weights.box * g_h * dh;
      }
    }
  }

  parts.objectness *= inv_batch;
  parts.classification *= inv_batch;
  parts.box *= inv_batch;
  parts.total = weights.objectness * parts.objectness +
                weights.classification * parts.classification + weights.box * parts.box;
  for (auto& g : grads)
    for (auto& v : g) v *= inv_batch;

  std::vector<Tensor> inputs(raw.levels.begin(), raw.levels.end());
  Tensor total = make_result(Shape{}, {parts.total}, inputs,
                             [grads = std::move(grads)](detail::Node& self) {
                               const double up = self.grad[0];
                               for (std::size_t lvl = 0; lvl < kNumLevels; ++lvl) {
                                 auto& in = *self.inputs[lvl];
                                 if (!in.requires_grad) continue;
                                 auto g = in.grad_buffer();
                                 for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * grads[lvl][i];
                               }
                             });
  return {total, parts};
}

}  // namespace sodyolo
