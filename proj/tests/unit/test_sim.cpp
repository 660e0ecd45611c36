#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "fixtures.hpp"
#include "harvest_guard/errors.hpp"
#include "harvest_guard/sim.hpp"

using namespace harvest_guard;
using namespace harvest_guard::sim;
using slip::SlipLabel;

namespace {

SlipTrajectoryParams noiseless() {
  SlipTrajectoryParams p;
  p.feature_noise = 0.0;
  return p;
}

bool labels_monotone(const std::vector<SlipLabel>& l) {
  for (std::size_t i = 1; i < l.size(); ++i)
    if (l[i] < l[i - 1]) return false;
  return true;
}

}  // namespace

TEST_CASE("normal trajectory without noise is flat") {
  Rng rng(1);
  const auto p = noiseless();
  const auto t = gen_slip_trajectory(p, SlipLabel::Normal, rng);
  REQUIRE(t.frames.size() == 14);
  for (std::size_t i = 0; i < t.frames.size(); ++i) {
    CHECK(t.labels[i] == SlipLabel::Normal);
    CHECK(t.frames[i].strawberry_area == doctest::Approx(0.35));
    CHECK(t.frames[i].gripper_area == doctest::Approx(0.25));
    CHECK(t.frames[i].background_area == doctest::Approx(0.40));
    CHECK(t.frames[i].y == doctest::Approx(0.45));
  }
}

TEST_CASE("slipping trajectory loses area and drifts down") {
  Rng rng(2);
  const auto p = noiseless();
  const auto t = gen_slip_trajectory(p, SlipLabel::Slipping, rng);
  REQUIRE(t.frames.size() == 14);
  CHECK(t.labels[5] == SlipLabel::Normal);
  CHECK(t.labels[6] == SlipLabel::Slipping);
  CHECK(t.labels.back() == SlipLabel::Slipping);
  for (std::size_t i = 6; i < t.frames.size(); ++i) {
    CHECK(t.frames[i].strawberry_area < t.frames[i - 1].strawberry_area);
    CHECK(t.frames[i].y > t.frames[i - 1].y);
  }
  // The first frames are untouched, the last normal frames show precursors.
  CHECK(t.frames[0].y == doctest::Approx(0.45));
  CHECK(t.frames[5].y > t.frames[2].y);
}

TEST_CASE("slipped trajectory ends with the fruit gone") {
  Rng rng(3);
  const auto p = noiseless();
  const auto ph = default_phases(p, SlipLabel::Slipped);
  CHECK(ph.normal == 6);
  CHECK(ph.slipping == 1);
  CHECK(ph.slipped == 7);
  const auto t = gen_slip_trajectory(p, SlipLabel::Slipped, rng);
  REQUIRE(t.frames.size() == 14);
  CHECK(t.labels[6] == SlipLabel::Slipping);
  CHECK(t.labels[7] == SlipLabel::Slipped);
  for (std::size_t i = 7; i < 14; ++i) {
    CHECK(t.frames[i].strawberry_area == doctest::Approx(0.0));
    CHECK(t.frames[i].w == 0.0);
    CHECK(t.frames[i].h == 0.0);
  }
}

TEST_CASE("noisy trajectories are valid with monotone labels") {
  Rng rng(4);
  SlipTrajectoryParams p;
  for (int i = 0; i < 300; ++i) {
    const auto outcome = static_cast<SlipLabel>(i % 3);
    const auto t = gen_slip_trajectory(p, outcome, rng);
    CHECK(labels_monotone(t.labels));
    CHECK(t.labels.back() == outcome);
    for (const auto& f : t.frames) CHECK_NOTHROW(slip::validate(f));
  }
}

TEST_CASE("category sampling frequencies") {
  Rng rng(5);
  const std::array<double, 3> probs{0.8, 0.1, 0.1};
  const int n = 20000;
  std::array<int, 3> hits{};
  for (int i = 0; i < n; ++i) ++hits[sample_category(probs, rng)];
  for (std::size_t k = 0; k < 3; ++k) {
    const double sigma = std::sqrt(n * probs[k] * (1 - probs[k]));
    CHECK(std::abs(hits[k] - n * probs[k]) <= 3 * sigma);
  }
  Rng r2(6);
  for (int i = 0; i < 100; ++i) CHECK(sample_category({0.0, 1.0, 0.0}, r2) == 1);
}

TEST_CASE("grasp observations are valid and class-shaped") {
  Rng rng(7);
  for (int i = 0; i < 300; ++i) {
    const auto cls = static_cast<grasp::GraspClass>(i % 3);
    const auto o = gen_grasp_observation(cls, 0.05, rng);
    CHECK_NOTHROW(grasp::validate(o));
    CHECK(o.fruit_present == (cls != grasp::GraspClass::Empty));
  }
  const auto exact = gen_grasp_observation(grasp::GraspClass::RipeHeld, 0.0, rng);
  CHECK(exact.red_fraction == 0.60);
  CHECK(exact.fruit_area == 0.50);
}

TEST_CASE("approach without noise") {
  ScenarioConfig c;
  c.vision_noise_mm = 0.0;
  c.actuation_noise_mm = 0.0;
  const geometry::CompensationParams params{10, 1.0, 0.5, geometry::CompensationMode::EitherAxisBoth};
  Rng rng(8);
  // Within tolerance: no compensation, residual equals the injected error.
  auto r = simulate_approach({500, 240, 700}, {8, -9, 50}, c, params, rng);
  CHECK_FALSE(r.record.compensated);
  CHECK(r.residual_x_mm == doctest::Approx(8));
  CHECK(r.residual_y_mm == doctest::Approx(9));
  // Full x gain removes x error; half y gain halves y error.
  r = simulate_approach({500, 240, 700}, {23, -4, 50}, c, params, rng);
  REQUIRE(r.record.compensated);
  CHECK(r.record.compensated->x == doctest::Approx(523));
  CHECK(r.record.compensated->y == doctest::Approx(238));
  CHECK(r.residual_x_mm == doctest::Approx(0.0));
  CHECK(r.residual_y_mm == doctest::Approx(2.0));
}

TEST_CASE("compensation residuals on table-like errors") {
  // Inject the listed visual errors with default noise and compare the mean
  // residual of compensated trials with the listed column means.
  const auto rows = fixtures::load_position_table();
  ScenarioConfig c;
  const geometry::CompensationParams params{10, 1.0, 0.5, geometry::CompensationMode::EitherAxisBoth};
  Rng rng(9);
  double sx = 0, sy = 0;
  int n = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto& row = rows[static_cast<std::size_t>(trial) % rows.size()];
    const auto r = simulate_approach({row.xs, row.ys, row.zs}, {row.dx, row.dy, row.zs - row.ze}, c, params, rng);
    if (!r.record.compensated) continue;
    sx += r.residual_x_mm;
    sy += r.residual_y_mm;
    ++n;
  }
  REQUIRE(n > 300);
  CHECK(std::abs(sx / n - 3.12) <= 1.5);
  CHECK(std::abs(sy / n - 4.11) <= 1.5);
}

TEST_CASE("scale_counts") {
  CHECK(scale_counts(kReferenceSlipCounts, 1.0) == kReferenceSlipCounts);
  CHECK(scale_counts(kReferenceSlipCounts, 1.1) == std::array<std::size_t, 3>{791, 173, 2158});
  CHECK(scale_counts(kReferenceGraspCounts, 0.5) == std::array<std::size_t, 3>{195, 173, 194});
  CHECK_THROWS_AS(scale_counts(kReferenceSlipCounts, 0.0), ValidationError);
}

TEST_CASE("datasets hit exact class counts") {
  ScenarioConfig c;
  Rng rng(10);
  const auto eps = gen_slip_dataset(c, {kReferenceSlipCounts}, rng);
  const auto counts = slip::class_counts(slip::windows_from_episodes(eps));
  CHECK(counts[0] == 719);
  CHECK(counts[1] == 157);
  CHECK(counts[2] == 1962);
  for (const auto& e : eps) CHECK(labels_monotone(e.labels));

  const auto rows = gen_grasp_dataset(c, {kReferenceGraspCounts}, rng);
  std::array<std::size_t, 3> g{};
  for (const auto& r : rows) ++g[static_cast<std::size_t>(r.label)];
  CHECK(g == kReferenceGraspCounts);
}

TEST_CASE("dataset files are byte-identical for a seed") {
  const auto dir = std::filesystem::temp_directory_path() / "hg_test_sim";
  std::filesystem::create_directories(dir);
  ScenarioConfig c;
  const DatasetTargets t{scale_counts(kReferenceSlipCounts, 0.2)};
  gen_dataset(c, DatasetKind::Slip, t, 5, dir / "a.csv");
  gen_dataset(c, DatasetKind::Slip, t, 5, dir / "b.csv");
  gen_dataset(c, DatasetKind::Slip, t, 6, dir / "c.csv");
  CHECK(fixtures::slurp(dir / "a.csv") == fixtures::slurp(dir / "b.csv"));
  CHECK(fixtures::slurp(dir / "a.csv") != fixtures::slurp(dir / "c.csv"));
  gen_dataset(c, DatasetKind::Grasp, {{20, 20, 20}}, 5, dir / "g1.csv");
  gen_dataset(c, DatasetKind::Grasp, {{20, 20, 20}}, 5, dir / "g2.csv");
  CHECK(fixtures::slurp(dir / "g1.csv") == fixtures::slurp(dir / "g2.csv"));
  // A regular file where a directory is needed.
  CHECK_THROWS_AS(gen_dataset(c, DatasetKind::Grasp, {{5, 5, 5}}, 1, dir / "a.csv" / "g.csv"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("config round trip and validation") {
  ScenarioConfig c;
  c.episodes = 37;
  c.error_x.std = 9.5;
  c.slip.frames_slipped = 5;
  c.grasp_probs = {0.7, 0.2, 0.1};
  const auto text = format_config(c);
  const auto back = parse_config(text);
  CHECK(format_config(back) == text);
  CHECK(back.episodes == 37);
  CHECK(back.error_x.std == 9.5);
  CHECK(back.slip.frames_slipped == 5);

  CHECK(parse_config("").episodes == ScenarioConfig{}.episodes);
  CHECK_THROWS_AS(parse_config("[scenario]\nepisodez = 3\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("[grasp]\np_ripe = 0.5\n"), ValidationError);  // sums to 0.7
  CHECK_THROWS_AS(parse_config("[scenario]\nepisodes = -3\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("[ripeness]\nthreshold = 2\n"), ValidationError);
  CHECK_THROWS_AS(parse_config("[positional]\nerror_std_x = abc\n"), ValidationError);
  CHECK_THROWS_AS(load_config("/nonexistent/scenario.ini"), IoError);
}
