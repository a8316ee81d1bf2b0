#include "sodyolo/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sodyolo/config.hpp"
#include "sodyolo/errors.hpp"

namespace sodyolo {

namespace {

bool is_ignored(const GroundTruth& g) { return g.ignore || g.class_id < 0; }

std::vector<std::size_t> score_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

std::string threshold_key(double t) {
  return std::to_string(static_cast<int>(std::lround(t * 100.0)));
}

}  // namespace

std::size_t MatchResult::true_positives() const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), MatchFlag::kTruePositive));
}

std::size_t MatchResult::false_positives() const {
  return static_cast<std::size_t>(
      std::count(flags.begin(), flags.end(), MatchFlag::kFalsePositive));
}

MatchResult match(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                  double iou_thresh) {
  if (!(iou_thresh > 0.0 && iou_thresh < 1.0)) {
    throw std::invalid_argument("match: iou threshold must lie in (0, 1), got " +
                                format_double(iou_thresh));
  }
  MatchResult m;
  m.order = score_order(dets);
  m.flags.assign(dets.size(), MatchFlag::kFalsePositive);
  m.matched_gt.assign(dets.size(), -1);
  for (const auto& g : gts)
    if (!is_ignored(g)) ++m.num_gt;

  std::vector<bool> taken(gts.size(), false);
  for (auto d : m.order) {
    int best = -1;
    double best_iou = iou_thresh;
    int best_ignored = -1;
    double best_ignored_iou = iou_thresh;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double o = iou(dets[d].box, gts[g].box);
      if (is_ignored(gts[g])) {
        if (o >= best_ignored_iou && (best_ignored < 0 || o > best_ignored_iou)) {
          best_ignored = static_cast<int>(g);
          best_ignored_iou = o;
        }
      } else if (!taken[g] && o >= best_iou && (best < 0 || o > best_iou)) {
        best = static_cast<int>(g);
        best_iou = o;
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      m.flags[d] = MatchFlag::kTruePositive;
      m.matched_gt[d] = best;
    } else if (best_ignored >= 0) {
      m.flags[d] = MatchFlag::kIgnored;
    }
  }
  return m;
}

std::pair<double, double> precision_recall(const MatchResult& m) {
  const double tp = static_cast<double>(m.true_positives());
  const double fp = static_cast<double>(m.false_positives());
  const double precision = tp + fp == 0.0 ? 1.0 : tp / (tp + fp);
  const double recall = m.num_gt == 0 ? 1.0 : tp / static_cast<double>(m.num_gt);
  return {precision, recall};
}

ClassSweep pr_sweep(const std::vector<ImageRecord>& images, int class_id, double iou_thresh) {
  struct Scored {
    double score;
    std::size_t image;
    std::size_t index;
    bool tp;
  };
  std::vector<Scored> all;
  ClassSweep sweep;
  for (std::size_t im = 0; im < images.size(); ++im) {
    std::vector<Detection> dets;
    for (const auto& d : images[im].dets)
      if (d.class_id == class_id) dets.push_back(d);
    std::vector<GroundTruth> gts;
    for (const auto& g : images[im].gts)
      if (g.class_id == class_id || g.class_id < 0) gts.push_back(g);
    const MatchResult m = match(dets, gts, iou_thresh);
    sweep.num_gt += m.num_gt;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (m.flags[i] == MatchFlag::kIgnored) continue;
      all.push_back({dets[i].score, im, i, m.flags[i] == MatchFlag::kTruePositive});
    }
  }
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image != b.image) return a.image < b.image;
    return a.index < b.index;
  });
  double tp = 0.0, fp = 0.0;
  for (const auto& s : all) {
    (s.tp ? tp : fp) += 1.0;
    const double recall = sweep.num_gt == 0 ? 1.0 : tp / static_cast<double>(sweep.num_gt);
    sweep.points.push_back({recall, tp / (tp + fp)});
  }
  return sweep;
}

double interpolate_101(const std::vector<PrPoint>& points) {
  std::vector<double> env(points.size());
  double running = 0.0;
  for (std::size_t i = points.size(); i-- > 0;) {
    running = std::max(running, points[i].precision);
    env[i] = running;
  }
  double sum = 0.0;
  std::size_t j = 0;
  for (int i = 0; i <= 100; ++i) {
    const double r = i / 100.0;
    while (j < points.size() && points[j].recall < r) ++j;
    if (j < points.size()) sum += env[j];
  }
  return sum / 101.0;
}

double envelope_area(const std::vector<PrPoint>& points) {
  double area = 0.0;
  double prev_recall = 0.0;
  double running = 0.0;
  std::vector<double> env(points.size());
  for (std::size_t i = points.size(); i-- > 0;) {
    running = std::max(running, points[i].precision);
    env[i] = running;
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    area += (points[i].recall - prev_recall) * env[i];
    prev_recall = points[i].recall;
  }
  return area;
}

double average_precision(const std::vector<ImageRecord>& images, int class_id,
                         double iou_thresh) {
  const ClassSweep sweep = pr_sweep(images, class_id, iou_thresh);
  if (sweep.num_gt == 0) {
    return sweep.points.empty() ? 1.0 : 0.0;
  }
  return interpolate_101(sweep.points);
}

std::vector<double> coco_thresholds() {
  std::vector<double> t;
  for (int i = 50; i <= 95; i += 5) t.push_back(i / 100.0);
  return t;
}

double stable_mean(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean of an empty list");
  const double first = values.front();
  double offset = 0.0;
  for (double v : values) offset += v - first;
  return first + offset / static_cast<double>(values.size());
}

std::vector<int> classes_with_gt(const std::vector<ImageRecord>& images,
                                 std::size_t num_classes) {
  std::vector<bool> present(num_classes, false);
  for (const auto& im : images)
    for (const auto& g : im.gts)
      if (!is_ignored(g) && g.class_id < static_cast<int>(num_classes))
        present[static_cast<std::size_t>(g.class_id)] = true;
  std::vector<int> out;
  for (std::size_t c = 0; c < num_classes; ++c)
    if (present[c]) out.push_back(static_cast<int>(c));
  return out;
}

double map_at(const std::vector<ImageRecord>& images, std::size_t num_classes,
              double iou_thresh) {
  const auto classes = classes_with_gt(images, num_classes);
  if (classes.empty()) throw UndefinedMetricError("mAP undefined: no class has ground truth");
  std::vector<double> aps;
  for (int c : classes) aps.push_back(average_precision(images, c, iou_thresh));
  return stable_mean(aps);
}

double map50(const std::vector<ImageRecord>& images, std::size_t num_classes) {
  return map_at(images, num_classes, 0.5);
}

double map5095(const std::vector<ImageRecord>& images, std::size_t num_classes,
               const std::vector<double>& thresholds) {
  std::vector<double> maps;
  for (double t : thresholds) maps.push_back(map_at(images, num_classes, t));
  return stable_mean(maps);
}

EvalReport evaluate_records(const std::vector<ImageRecord>& images,
                            const std::vector<std::string>& class_names,
                            const EvalOptions& opts) {
  const std::size_t k = class_names.size();
  const auto t50 = std::find(opts.thresholds.begin(), opts.thresholds.end(), 0.5);
  if (t50 == opts.thresholds.end()) {
    throw std::invalid_argument("evaluation thresholds must include 0.5");
  }
  const auto classes = classes_with_gt(images, k);
  if (classes.empty()) throw UndefinedMetricError("mAP undefined: no class has ground truth");

  EvalReport r;
  r.class_names = class_names;
  r.thresholds = opts.thresholds;
  r.operating_score = opts.operating_score;
  r.suppression = opts.suppression;
  r.num_images = images.size();
  r.ap.assign(k, std::vector<std::optional<double>>(opts.thresholds.size()));
  for (int c : classes)
    for (std::size_t t = 0; t < opts.thresholds.size(); ++t)
      r.ap[static_cast<std::size_t>(c)][t] = average_precision(images, c, opts.thresholds[t]);

  const auto i50 = static_cast<std::size_t>(t50 - opts.thresholds.begin());
  std::vector<double> per_threshold;
  for (std::size_t t = 0; t < opts.thresholds.size(); ++t) {
    std::vector<double> aps;
    for (int c : classes) aps.push_back(*r.ap[static_cast<std::size_t>(c)][t]);
    per_threshold.push_back(stable_mean(aps));
  }
  r.map50 = per_threshold[i50];
  r.map5095 = stable_mean(per_threshold);

  std::size_t tp = 0, fp = 0;
  for (const auto& im : images) {
    for (const auto& d : im.dets) r.num_detections += d.score >= opts.operating_score;
    for (const auto& g : im.gts) r.num_gt += !is_ignored(g);
    for (int c : classes) {
      std::vector<Detection> dets;
      for (const auto& d : im.dets)
        if (d.class_id == c && d.score >= opts.operating_score) dets.push_back(d);
      std::vector<GroundTruth> gts;
      for (const auto& g : im.gts)
        if (g.class_id == c || g.class_id < 0) gts.push_back(g);
      const MatchResult m = match(dets, gts, 0.5);
      tp += m.true_positives();
      fp += m.false_positives();
    }
  }
  r.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  r.recall = r.num_gt == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(r.num_gt);
  return r;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "map50=" << format_double(map50) << "\n";
  os << "map5095=" << format_double(map5095) << "\n";
  os << "precision=" << format_double(precision) << "\n";
  os << "recall=" << format_double(recall) << "\n";
  os << "operating_score=" << format_double(operating_score) << "\n";
  os << "suppression=" << suppression << "\n";
  os << "images=" << num_images << "\n";
  os << "detections=" << num_detections << "\n";
  os << "ground_truths=" << num_gt << "\n";
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      if (!ap[c][t]) continue;
      os << "ap" << threshold_key(thresholds[t]) << "." << class_names[c] << "="
         << format_double(*ap[c][t]) << "\n";
    }
  }
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["map50"] = map50;
  j["map5095"] = map5095;
  j["precision"] = precision;
  j["recall"] = recall;
  j["operating_score"] = operating_score;
  j["suppression"] = suppression;
  j["images"] = num_images;
  j["detections"] = num_detections;
  j["ground_truths"] = num_gt;
  j["thresholds"] = thresholds;
  nlohmann::json classes = nlohmann::json::object();
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    if (!ap[c].empty() && !ap[c][0]) continue;
    nlohmann::json row = nlohmann::json::array();
    for (const auto& v : ap[c]) row.push_back(*v);
    classes[class_names[c]] = row;
  }
  j["ap"] = classes;
  return j.dump(2) + "\n";
}

std::string format_detections(const std::vector<DetectionRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["image_id"] = r.image_id;
    j["class_id"] = r.det.class_id;
    j["score"] = r.det.score;
    j["x1"] = r.det.box.x1;
    j["y1"] = r.det.box.y1;
    j["x2"] = r.det.box.x2;
    j["y2"] = r.det.box.y2;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<DetectionRecord> parse_detections(const std::string& text) {
  std::vector<DetectionRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      DetectionRecord r;
      r.image_id = j.at("image_id").get<std::string>();
      r.det.class_id = j.at("class_id").get<int>();
      r.det.score = j.at("score").get<double>();
      r.det.box = {j.at("x1").get<double>(), j.at("y1").get<double>(), j.at("x2").get<double>(),
                   j.at("y2").get<double>()};
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, std::string("bad detection record: ") + e.what());
    }
  }
  return out;
}

}  // namespace sodyolo
