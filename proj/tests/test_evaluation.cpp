#include <doctest.h>
#include <json.hpp>

#include <cmath>

#include "oracles.hpp"
#include "sodyolo/errors.hpp"
#include "sodyolo/evaluation.hpp"

using namespace sodyolo;

namespace {

const Box kWide{0.0, 0.0, 10.0, 10.0};
const Box kNarrow{0.0, 0.0, 6.0, 10.0};  // IoU 0.6 with kWide
const Box kFar{50.0, 50.0, 60.0, 60.0};

std::vector<ImageRecord> records(const oracle::Instance& inst) {
  std::vector<ImageRecord> out;
  for (std::size_t i = 0; i < inst.dets.size(); ++i)
    out.push_back({"im" + std::to_string(i), inst.dets[i], inst.gts[i]});
  return out;
}

std::vector<PrPoint> points(const oracle::PrCurve& pr) {
  std::vector<PrPoint> out;
  for (std::size_t i = 0; i < pr.recall.size(); ++i) out.push_back({pr.recall[i], pr.precision[i]});
  return out;
}

oracle::Instance random_instance(Rng& rng, int classes, std::size_t max_dets, std::size_t max_gts) {
  oracle::Instance inst;
  const auto images = rng.uniform_int(1, 3);
  for (std::int64_t im = 0; im < images; ++im) {
    std::vector<GroundTruth> gts;
    const auto ng = rng.uniform_int(0, static_cast<std::int64_t>(max_gts));
    for (std::int64_t g = 0; g < ng; ++g)
      gts.push_back({oracle::random_box(rng, 30.0, 4.0, 15.0), static_cast<int>(rng.uniform_int(0, classes - 1)), false});
    std::vector<Detection> dets;
    const auto nd = rng.uniform_int(0, static_cast<std::int64_t>(max_dets));
    for (std::int64_t d = 0; d < nd; ++d) {
      Box b = oracle::random_box(rng, 30.0, 4.0, 15.0);
      if (!gts.empty() && rng.bernoulli(0.6)) {
        // jitter a ground truth so that matches actually occur
        const auto& g = gts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(gts.size()) - 1))];
        const double j = rng.uniform(0.0, 2.0);
        b = {g.box.x1 + j, g.box.y1 - j * 0.5, g.box.x2 + j, g.box.y2};
      }
      dets.push_back({b, static_cast<int>(rng.uniform_int(0, classes - 1)), rng.uniform(0.0, 1.0)});
    }
    inst.dets.push_back(dets);
    inst.gts.push_back(gts);
  }
  return inst;
}

}  // namespace

TEST_CASE("match examples") {
  const std::vector<GroundTruth> gt{{kWide, 0, false}};
  auto m = match({{kWide, 0, 0.9}}, gt, 0.5);
  CHECK(m.flags == std::vector<MatchFlag>{MatchFlag::kTruePositive});
  CHECK(m.matched_gt == std::vector<int>{0});
  CHECK(m.num_gt == 1);

  m = match({{kNarrow, 0, 0.8}, {kWide, 0, 0.9}}, gt, 0.5);
  CHECK(m.order == std::vector<std::size_t>{1, 0});
  CHECK(m.flags == std::vector<MatchFlag>{MatchFlag::kFalsePositive, MatchFlag::kTruePositive});
  CHECK(m.true_positives() == 1);
  CHECK(m.false_positives() == 1);

  m = match({{kNarrow, 0, 0.5}}, {{kWide, 0, true}}, 0.5);
  CHECK(m.flags == std::vector<MatchFlag>{MatchFlag::kIgnored});
  CHECK(m.num_gt == 0);
  CHECK(m.false_positives() == 0);
  m = match({{kNarrow, 0, 0.5}}, {{kWide, -1, false}}, 0.5);
  CHECK(m.flags == std::vector<MatchFlag>{MatchFlag::kIgnored});
  m = match({{kNarrow, 0, 0.5}}, {{kWide, 0, true}}, 0.7);
  CHECK(m.flags == std::vector<MatchFlag>{MatchFlag::kFalsePositive});
}

TEST_CASE("match prefers the highest-IoU ground truth and a real one over ignored") {
  const std::vector<GroundTruth> gts{{kNarrow, 0, false}, {kWide, 0, false}};
  auto m = match({{kWide, 0, 0.9}}, gts, 0.5);
  CHECK(m.matched_gt == std::vector<int>{1});
  m = match({{kWide, 0, 0.9}}, {{kWide, 0, true}, {kNarrow, 0, false}}, 0.5);
  CHECK(m.flags == std::vector<MatchFlag>{MatchFlag::kTruePositive});
  CHECK(m.matched_gt == std::vector<int>{1});
}

TEST_CASE("match threshold must lie in (0, 1)") {
  CHECK_THROWS_AS(match({}, {}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(match({}, {}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(match({}, {}, -0.2), std::invalid_argument);
  CHECK_NOTHROW(match({}, {}, 0.95));
}

TEST_CASE("precision and recall") {
  MatchResult m;
  m.flags.assign(8, MatchFlag::kTruePositive);
  m.flags.insert(m.flags.end(), 2, MatchFlag::kFalsePositive);
  m.num_gt = 10;
  CHECK(precision_recall(m).first == 0.8);
  MatchResult r;
  r.flags.assign(3, MatchFlag::kTruePositive);
  r.flags.push_back(MatchFlag::kIgnored);
  r.num_gt = 4;
  CHECK(precision_recall(r) == std::pair<double, double>{1.0, 0.75});
  CHECK(precision_recall(MatchResult{}) == std::pair<double, double>{1.0, 1.0});
}

TEST_CASE("average precision hand cases") {
  const std::vector<GroundTruth> gt{{kWide, 0, false}};
  CHECK(average_precision({{"a", {{kWide, 0, 0.9}}, gt}}, 0, 0.5) == 1.0);
  CHECK(average_precision({{"a", {{kFar, 0, 0.9}, {kWide, 0, 0.8}}, gt}}, 0, 0.5) == 0.5);
  CHECK(average_precision({{"a", {{kWide, 0, 0.9}, {kFar, 0, 0.8}}, gt}}, 0, 0.5) == 1.0);
  // recall 0.5 reached at precision 1: 51 of 101 grid points
  const std::vector<GroundTruth> two{{kWide, 0, false}, {kFar, 0, false}};
  CHECK(average_precision({{"a", {{kWide, 0, 0.9}}, two}}, 0, 0.5) ==
        doctest::Approx(51.0 / 101.0).epsilon(1e-15));
  // no ground truth of the class
  CHECK(average_precision({{"a", {}, {}}}, 0, 0.5) == 1.0);
  CHECK(average_precision({{"a", {{kWide, 0, 0.3}}, {}}}, 0, 0.5) == 0.0);
}

TEST_CASE("map hand cases") {
  const std::vector<ImageRecord> perfect{
      {"a", {{kWide, 0, 0.9}, {kFar, 1, 0.7}}, {{kWide, 0, false}, {kFar, 1, false}}}};
  CHECK(map50(perfect, 2) == 1.0);
  CHECK(map5095(perfect, 2) == 1.0);

  const std::vector<ImageRecord> half{
      {"a", {{kWide, 0, 0.9}, {kWide, 1, 0.7}}, {{kWide, 0, false}, {kFar, 1, false}}}};
  CHECK(map50(half, 2) == 0.5);

  const std::vector<ImageRecord> sweep{{"a", {{kNarrow, 0, 0.9}}, {{kWide, 0, false}}}};
  CHECK(map5095(sweep, 1) == doctest::Approx(0.3).epsilon(1e-15));
  for (std::size_t i = 0; i < 10; ++i)
    CHECK(map_at(sweep, 1, coco_thresholds()[i]) == (i <= 2 ? 1.0 : 0.0));

  // classes without ground truth are left out of the mean
  CHECK(map50(perfect, 5) == 1.0);
  CHECK(classes_with_gt(perfect, 5) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(map50({{"a", {{kWide, 0, 0.9}}, {}}}, 2), UndefinedMetricError);
}

TEST_CASE("coco thresholds and the stable mean") {
  const auto t = coco_thresholds();
  REQUIRE(t.size() == 10);
  CHECK(t.front() == 0.5);
  CHECK(t[2] == 0.6);
  CHECK(t.back() == 0.95);
  CHECK(stable_mean(std::vector<double>(10, 0.1)) == 0.1);
  CHECK(stable_mean({1.0, 2.0, 3.0}) == 2.0);
  CHECK_THROWS_AS(stable_mean({}), std::invalid_argument);
}

TEST_CASE("map5095 with ten copies of 0.5 equals map50") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = records(random_instance(rng, 3, 6, 3));
    if (classes_with_gt(inst, 3).empty()) continue;
    CHECK(map5095(inst, 3, std::vector<double>(10, 0.5)) == map50(inst, 3));
  }
}

TEST_CASE("AP depends only on the score order") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = random_instance(rng, 1, 6, 3);
    const double before = average_precision(records(inst), 0, 0.5);
    for (auto& im : inst.dets)
      for (auto& d : im) d.score = 0.1 + 0.8 * d.score * d.score * d.score;
    CHECK(average_precision(records(inst), 0, 0.5) == before);
  }
}

TEST_CASE("a trailing false positive never helps and removing one never hurts") {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    auto inst = random_instance(rng, 1, 6, 3);
    const auto recs = records(inst);
    const double base = average_precision(recs, 0, 0.5);
    auto more = recs;
    more[0].dets.push_back({{80.0, 80.0, 90.0, 90.0}, 0, -1.0});
    CHECK(average_precision(more, 0, 0.5) <= base);

    const auto m = match(recs[0].dets, recs[0].gts, 0.5);
    for (std::size_t i = 0; i < m.flags.size(); ++i) {
      if (m.flags[i] != MatchFlag::kFalsePositive) continue;
      auto fewer = recs;
      fewer[0].dets.erase(fewer[0].dets.begin() + static_cast<std::ptrdiff_t>(i));
      CHECK(average_precision(fewer, 0, 0.5) >= base);
      break;
    }
  }
}

TEST_CASE("sweep invariants") {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = records(random_instance(rng, 2, 8, 4));
    for (int c = 0; c < 2; ++c) {
      const auto sweep = pr_sweep(inst, c, 0.5);
      double prev = 0.0;
      for (const auto& p : sweep.points) {
        CHECK(p.recall >= prev);
        prev = p.recall;
      }
      const double ap = average_precision(inst, c, 0.5);
      CHECK(ap >= 0.0);
      CHECK(ap <= 1.0);
    }
  }
}

TEST_CASE("AP against exhaustive PR enumeration") {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto inst = random_instance(rng, 2, 6, 3);
    const auto recs = records(inst);
    for (int c = 0; c < 2; ++c) {
      for (double t : {0.5, 0.75}) {
        const auto pr = oracle::pr_points(inst, c, t);
        const auto sweep = pr_sweep(recs, c, t);
        REQUIRE(sweep.points.size() == pr.recall.size());
        if (sweep.num_gt == 0) continue;
        CHECK(std::abs(envelope_area(sweep.points) - oracle::exact_ap(pr)) <= 1e-9);
        CHECK(std::abs(interpolate_101(sweep.points) - oracle::ap_101(pr)) <= 1e-12);
        CHECK(std::abs(average_precision(recs, c, t) - oracle::exact_ap(pr)) <= 0.01);
        CHECK(envelope_area(points(pr)) == doctest::Approx(oracle::exact_ap(pr)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("evaluation report") {
  const std::vector<ImageRecord> recs{
      {"a", {{kWide, 0, 0.9}, {kFar, 0, 0.1}}, {{kWide, 0, false}, {{70, 70, 80, 80}, -1, false}}},
      {"b", {{kNarrow, 1, 0.6}}, {{kWide, 1, false}}}};
  EvalOptions opts;
  opts.suppression = "hard";
  const auto r = evaluate_records(recs, {"car", "bus", "van"}, opts);
  CHECK(r.num_images == 2);
  CHECK(r.num_detections == 2);  // 0.1 is below the operating score
  CHECK(r.num_gt == 2);
  CHECK(r.map50 == 1.0);
  CHECK(r.map5095 == doctest::Approx((1.0 + 0.3) / 2.0).epsilon(1e-15));
  CHECK(r.precision == 1.0);  // the 0.1 detection sits below the operating score
  CHECK(r.recall == 1.0);
  CHECK_FALSE(r.ap[2][0].has_value());

  const std::string text = r.to_text();
  CHECK(text.rfind("map50=1", 0) == 0);
  CHECK(text.find("\nmap5095=0.65") != std::string::npos);
  CHECK(text.find("\nap50.car=1\n") != std::string::npos);
  CHECK(text.find("\nap95.bus=0\n") != std::string::npos);
  CHECK(text.find(".van=") == std::string::npos);
  CHECK(text.find("suppression=hard") != std::string::npos);

  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j.at("map50").get<double>() == 1.0);
  CHECK(j.at("map5095").get<double>() == r.map5095);
  CHECK(j.at("ap").at("bus").size() == 10);
  CHECK_FALSE(j.at("ap").contains("van"));
  CHECK(j.at("thresholds").size() == 10);

  EvalOptions no_half;
  no_half.thresholds = {0.6, 0.7};
  CHECK_THROWS_AS(evaluate_records(recs, {"car", "bus"}, no_half), std::invalid_argument);
}

TEST_CASE("detection dump round trip") {
  const std::vector<DetectionRecord> recs{{"0001", {{1.5, 2.25, 30.125, 40.0}, 3, 0.123456789012345}},
                                          {"0002", {{0.1, 0.2, 0.30000000000000004, 0.4}, 0, 1.0}}};
  const std::string text = format_detections(recs);
  CHECK(text.find("\"image_id\":\"0001\"") != std::string::npos);
  const auto back = parse_detections(text);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].image_id == recs[i].image_id);
    CHECK(back[i].det == recs[i].det);
  }
  CHECK(format_detections(back) == text);
  CHECK(parse_detections("\n  \n").empty());
  CHECK_THROWS_AS(parse_detections("{\"image_id\":\"x\"}\n"), ParseError);
  CHECK_THROWS_AS(parse_detections("not json\n"), ParseError);
}
