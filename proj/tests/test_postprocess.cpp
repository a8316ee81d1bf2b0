#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "sodyolo/postprocess.hpp"

using namespace sodyolo;

namespace {

// IoU(kWide, kNarrow) is exactly 0.6.
const Box kWide{0.0, 0.0, 10.0, 10.0};
const Box kNarrow{0.0, 0.0, 6.0, 10.0};

SuppressionConfig config(SuppressionMode mode, double nt = 0.5, bool agnostic = false) {
  SuppressionConfig c;
  c.mode = mode;
  c.nt = nt;
  c.class_agnostic = agnostic;
  return c;
}

std::vector<Detection> random_dets(Rng& rng, std::size_t n, int classes, double extent = 30.0) {
  std::vector<Detection> d;
  for (std::size_t i = 0; i < n; ++i) {
    d.push_back({oracle::random_box(rng, extent, 2.0, 20.0),
                 static_cast<int>(rng.uniform_int(0, classes - 1)), rng.uniform(0.0, 1.0)});
  }
  return d;
}

void check_same(const std::vector<Detection>& got, const std::vector<Detection>& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].box == want[i].box);
    CHECK(got[i].class_id == want[i].class_id);
    CHECK(std::abs(got[i].score - want[i].score) <= tol);
  }
}

}  // namespace

TEST_CASE("iou examples") {
  CHECK(iou(kWide, kWide) == 1.0);
  CHECK(iou(kWide, {20, 20, 30, 30}) == 0.0);
  CHECK(iou({0, 0, 2, 2}, {10, 0, 12, 2}) == 0.0);
  CHECK(iou({0, 0, 2, 2}, {2, 0, 4, 2}) == 0.0);
  CHECK(iou({0, 0, 2, 2}, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(iou(kWide, kNarrow) == 0.6);
  CHECK_THROWS_AS(iou({0, 0, 0, 2}, kWide), std::invalid_argument);
  CHECK_THROWS_AS(iou(kWide, {3, 3, 1, 5}), std::invalid_argument);
}

TEST_CASE("iou is symmetric, bounded and matches the oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    const Box a = oracle::random_box(rng, 20.0, 0.5, 15.0);
    const Box b = oracle::random_box(rng, 20.0, 0.5, 15.0);
    const double v = iou(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == iou(b, a));
    CHECK(std::abs(v - oracle::box_iou(a, b)) <= 1e-12);
  }
}

TEST_CASE("hard nms examples") {
  const auto cfg = config(SuppressionMode::kHard);
  const Detection a{kWide, 0, 0.9}, b{kNarrow, 0, 0.8};
  CHECK(hard_nms({a}, cfg) == std::vector<Detection>{a});
  CHECK(hard_nms({a, b}, cfg) == std::vector<Detection>{a});
  CHECK(hard_nms({b, a}, cfg) == std::vector<Detection>{a});
  const Detection other{kNarrow, 1, 0.8};
  CHECK(hard_nms({a, other}, cfg) == std::vector<Detection>{a, other});
  CHECK(hard_nms({a, other}, config(SuppressionMode::kHard, 0.5, true)) == std::vector<Detection>{a});
  // IoU exactly at the threshold suppresses
  CHECK(hard_nms({a, b}, config(SuppressionMode::kHard, 0.6)).size() == 1);
  CHECK(hard_nms({a, b}, config(SuppressionMode::kHard, std::nextafter(0.6, 1.0))).size() == 2);
}

TEST_CASE("soft nms examples") {
  const auto cfg = config(SuppressionMode::kSoftLinear);
  const Detection a{kWide, 0, 0.9}, b{kNarrow, 0, 0.8};
  const auto out = soft_nms({b, a}, cfg);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == a);
  CHECK(out[1].box == kNarrow);
  CHECK(out[1].score == 0.8 * (1.0 - 0.6));
  CHECK(std::abs(out[1].score - 0.32) < 1e-15);

  const Detection c{{0.0, 0.0, 3.0, 10.0}, 0, 0.8};  // IoU 0.3 with kWide
  CHECK(iou(kWide, c.box) == 0.3);
  CHECK(soft_nms({a, c}, cfg) == std::vector<Detection>{a, c});
}

TEST_CASE("soft nms below threshold only sorts") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    // Disjoint boxes along a row.
    std::vector<Detection> d;
    const auto n = static_cast<std::size_t>(rng.uniform_int(0, 8));
    for (std::size_t i = 0; i < n; ++i) {
      const double x = 20.0 * static_cast<double>(i);
      d.push_back({{x, 0.0, x + 10.0, 10.0}, 0, rng.uniform(0.01, 1.0)});
    }
    auto want = d;
    std::stable_sort(want.begin(), want.end(),
                     [](const Detection& p, const Detection& q) { return p.score > q.score; });
    CHECK(soft_nms(d, config(SuppressionMode::kSoftLinear)) == want);
  }
}

TEST_CASE("score floor is strict") {
  auto cfg = config(SuppressionMode::kSoftLinear);
  cfg.score_floor = 0.25;
  const std::vector<Detection> d{{kWide, 0, 0.25}, {{20, 20, 30, 30}, 0, 0.2500001}};
  const auto out = soft_nms(d, cfg);
  REQUIRE(out.size() == 1);
  CHECK(out[0].score == 0.2500001);
}

TEST_CASE("equal scores keep input order") {
  const std::vector<Detection> d{{{0, 0, 1, 1}, 0, 0.5}, {{5, 5, 6, 6}, 1, 0.5}, {{9, 9, 10, 10}, 2, 0.5}};
  CHECK(soft_nms(d, config(SuppressionMode::kSoftLinear)) == d);
  CHECK(hard_nms(d, config(SuppressionMode::kHard)) == d);
  // Identical boxes with equal scores: the first one wins.
  const std::vector<Detection> twins{{kWide, 0, 0.7}, {kWide, 0, 0.7}};
  const auto hard = hard_nms({{kWide, 3, 0.7}, {kWide, 3, 0.7}}, config(SuppressionMode::kHard));
  CHECK(hard.size() == 1);
  const auto soft = soft_nms(twins, config(SuppressionMode::kSoftLinear));
  CHECK(soft.size() == 1);  // 0.7 * (1 - 1) = 0 falls below the floor
}

TEST_CASE("suppress dispatches and handles empty input") {
  Rng rng(3);
  const auto d = random_dets(rng, 8, 2);
  CHECK(suppress(d, config(SuppressionMode::kHard)) == hard_nms(d, config(SuppressionMode::kHard)));
  CHECK(suppress(d, config(SuppressionMode::kSoftLinear)) ==
        soft_nms(d, config(SuppressionMode::kSoftLinear)));
  CHECK(suppress({}, config(SuppressionMode::kHard)).empty());
  CHECK(suppress({}, config(SuppressionMode::kSoftLinear)).empty());
  CHECK_THROWS_AS(suppress(d, config(static_cast<SuppressionMode>(7))), std::invalid_argument);
}

TEST_CASE("mode names") {
  CHECK(parse_suppression_mode("hard") == SuppressionMode::kHard);
  CHECK(parse_suppression_mode("soft-linear") == SuppressionMode::kSoftLinear);
  CHECK(parse_suppression_mode("soft") == SuppressionMode::kSoftLinear);
  CHECK(to_string(SuppressionMode::kHard) == "hard");
  CHECK(to_string(SuppressionMode::kSoftLinear) == "soft-linear");
  CHECK_THROWS_WITH_AS(parse_suppression_mode("gaussian"), doctest::Contains("gaussian"),
                       std::invalid_argument);
}

TEST_CASE("config validation") {
  SuppressionConfig c;
  CHECK(c.nt == 0.5);
  CHECK(c.score_floor == 0.001);
  CHECK(c.mode == SuppressionMode::kSoftLinear);
  CHECK_FALSE(c.class_agnostic);
  CHECK_NOTHROW(c.validate());
  c.nt = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.nt = 0.5;
  c.score_floor = -0.1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("scores never increase and hard survivors do not overlap") {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const auto d = random_dets(rng, static_cast<std::size_t>(rng.uniform_int(0, 10)), 3);
    const double nt = rng.uniform(0.1, 0.9);
    for (auto mode : {SuppressionMode::kHard, SuppressionMode::kSoftLinear}) {
      for (const auto& o : suppress(d, config(mode, nt))) {
        const auto src = std::find_if(d.begin(), d.end(), [&](const Detection& x) {
          return x.box == o.box && x.class_id == o.class_id;
        });
        REQUIRE(src != d.end());
        CHECK(o.score <= src->score);
      }
    }
    const auto kept = hard_nms(d, config(SuppressionMode::kHard, nt));
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t j = i + 1; j < kept.size(); ++j)
        if (kept[i].class_id == kept[j].class_id) CHECK(iou(kept[i].box, kept[j].box) < nt);
  }
}

TEST_CASE("zero decay in the shared loop reduces soft to hard") {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const auto d = random_dets(rng, static_cast<std::size_t>(rng.uniform_int(0, 10)), 2);
    auto cfg = config(SuppressionMode::kSoftLinear, rng.uniform(0.1, 0.9), trial % 3 == 0);
    const auto zeroed = detail::greedy_rescore(d, cfg, [](double) { return 0.0; });
    cfg.mode = SuppressionMode::kHard;
    CHECK(zeroed == hard_nms(d, cfg));
    const auto linear = detail::greedy_rescore(d, cfg, [](double o) { return 1.0 - o; });
    CHECK(linear == soft_nms(d, cfg));
  }
}

TEST_CASE("soft nms with a near-one threshold changes nothing") {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto d = random_dets(rng, static_cast<std::size_t>(rng.uniform_int(1, 10)), 1);
    const auto out = soft_nms(d, config(SuppressionMode::kSoftLinear, 0.999));
    for (const auto& o : out) {
      const auto src = std::find_if(d.begin(), d.end(), [&](const Detection& x) { return x.box == o.box; });
      CHECK(o.score == src->score);
    }
  }
}

TEST_CASE("both modes match the brute-force transcription") {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = random_dets(rng, static_cast<std::size_t>(rng.uniform_int(0, 10)), 3, 25.0);
    const double nt = rng.uniform(0.2, 0.8);
    const bool agnostic = trial % 4 == 0;
    for (bool hard : {true, false}) {
      const auto cfg = config(hard ? SuppressionMode::kHard : SuppressionMode::kSoftLinear, nt, agnostic);
      check_same(suppress(d, cfg), oracle::suppression(d, nt, cfg.score_floor, hard, agnostic), 1e-9);
    }
  }
}

TEST_CASE("suppression is reproducible") {
  Rng rng(8);
  const auto d = random_dets(rng, 10, 2);
  const auto cfg = config(SuppressionMode::kSoftLinear);
  CHECK(soft_nms(d, cfg) == soft_nms(d, cfg));
}
