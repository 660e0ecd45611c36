#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "harvest_guard/errors.hpp"
#include "harvest_guard/metrics.hpp"

using namespace harvest_guard;
using namespace harvest_guard::metrics;
using fsm::Outcome;

namespace {

ConfusionMatrix lstm_like() {
  return ConfusionMatrix({"Normal", "Slipping", "Slipped"}, {{89, 11, 0}, {6, 94, 0}, {0, 6, 94}});
}

EpisodeSummary ep(std::uint64_t id, grasp::GraspClass g, slip::SlipLabel s, Outcome o, double t, bool comp = false,
                  double rx = 0, double ry = 0) {
  return {id, g, s, o, t, comp, rx, ry};
}

}  // namespace

TEST_CASE("confusion metrics examples") {
  const auto m = confusion_metrics(lstm_like());
  REQUIRE(m.size() == 3);
  CHECK(m[0].recall == doctest::Approx(0.89));
  CHECK(m[1].recall == doctest::Approx(0.94));
  CHECK(m[2].recall == doctest::Approx(0.94));
  // Column sums 95, 111, 94.
  CHECK(m[0].precision == doctest::Approx(89.0 / 95));
  CHECK(m[1].precision == doctest::Approx(94.0 / 111));
  CHECK(m[2].precision == doctest::Approx(1.0));
  const double p = 94.0 / 111, r = 0.94;
  CHECK(m[1].f1 == doctest::Approx(2 * p * r / (p + r)));
  CHECK(m[1].support == 100);

  const ConfusionMatrix diag({"a", "b", "c"}, {{5, 0, 0}, {0, 7, 0}, {0, 0, 9}});
  for (const auto& c : confusion_metrics(diag)) {
    CHECK(c.precision == 1.0);
    CHECK(c.recall == 1.0);
    CHECK(c.f1 == 1.0);
  }
  const std::vector<ClassMetrics> dm = confusion_metrics(diag);
  CHECK(macro_f1(dm) == 1.0);
}

TEST_CASE("zero denominators are flagged") {
  const ConfusionMatrix cm({"a", "b"}, {{3, 0}, {0, 0}});
  const auto m = confusion_metrics(cm);
  CHECK(m[1].recall == 0.0);
  CHECK(m[1].recall_undefined);
  CHECK(m[1].precision_undefined);
  CHECK(m[1].f1 == 0.0);
  CHECK_FALSE(m[0].recall_undefined);
  CHECK_THROWS_AS(confusion_metrics(ConfusionMatrix(std::vector<std::string>{})), ValidationError);
  ConfusionMatrix add({"a", "b"});
  add.add(0, 1, 4);
  add.add(1, 1);
  CHECK(add.total() == 5);
  CHECK(add.counts[0][1] == 4);
  CHECK_THROWS_AS(add.add(2, 0), ValidationError);
}

TEST_CASE("metric bounds and permutation invariance on random matrices") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> cell(0, 20);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::vector<std::uint64_t>> c(3, std::vector<std::uint64_t>(3));
    for (auto& row : c)
      for (auto& x : row) x = static_cast<std::uint64_t>(cell(rng) < 4 ? 0 : cell(rng));
    const auto m = confusion_metrics(ConfusionMatrix({"a", "b", "c"}, c));
    for (const auto& x : m) {
      for (double v : {x.precision, x.recall, x.f1}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      if (x.precision + x.recall == 0.0) CHECK(x.f1 == 0.0);
    }
    std::array<std::size_t, 3> perm{0, 1, 2};
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<std::uint64_t>> pc(3, std::vector<std::uint64_t>(3));
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) pc[i][j] = c[perm[i]][perm[j]];
    const auto pm = confusion_metrics(ConfusionMatrix({"x", "y", "z"}, pc));
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(pm[i].precision == m[perm[i]].precision);
      CHECK(pm[i].recall == m[perm[i]].recall);
      CHECK(pm[i].f1 == m[perm[i]].f1);
    }
  }
}

TEST_CASE("ripeness loss") {
  CHECK(ripeness_loss({{1.0, 0.5}, {0.9, 0.6}, 1.0}) == doctest::Approx(0.1));
  CHECK(ripeness_loss({{0.2, 0.7, 1.1}, {0.2, 0.7, 1.1}, 3.0}) == 0.0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.1);
  for (int i = 0; i < 100; ++i) {
    RipenessEval e{{u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)}, 1.0};
    const double one = ripeness_loss(e);
    CHECK(one > 0.0);
    e.lambda = 2.0;
    CHECK(ripeness_loss(e) == doctest::Approx(2 * one));
  }
  CHECK_THROWS_AS(ripeness_loss({{0.1}, {0.1, 0.2}, 1.0}), ValidationError);
  CHECK_THROWS_AS(ripeness_loss({{1.2}, {0.1}, 1.0}), ValidationError);
  CHECK_THROWS_AS(ripeness_loss({{0.5}, {0.1}, -1.0}), ValidationError);
  CHECK_THROWS_AS(ripeness_loss({{}, {}, 1.0}), ValidationError);
}

TEST_CASE("cycle time aggregates") {
  using G = grasp::GraspClass;
  using L = slip::SlipLabel;
  std::vector<EpisodeSummary> e{ep(0, G::RipeHeld, L::Normal, Outcome::PickedAndPlaced, 11.0),
                                ep(1, G::RipeHeld, L::Normal, Outcome::PickedAndPlaced, 12.0),
                                ep(2, G::RipeHeld, L::Normal, Outcome::PickedAndPlaced, 13.0),
                                ep(3, G::Empty, L::Normal, Outcome::AbortedEmptyOrMisgrasp, 5.26)};
  const auto s = aggregate_cycle_times(e);
  REQUIRE(s.size() == 2);
  CHECK(s[0].outcome == Outcome::PickedAndPlaced);
  CHECK(s[0].mean_s == doctest::Approx(12.0));
  CHECK(s[0].std_s == doctest::Approx(1.0));
  CHECK(s[0].n == 3);
  CHECK(s[1].std_s == 0.0);
  CHECK(s[1].n == 1);

  const std::vector<double> same(10, 11.22);
  CHECK(sample_stats(same).std == 0.0);
  CHECK(sample_stats(same).mean == doctest::Approx(11.22));
  CHECK_THROWS_AS(sample_stats(std::span<const double>{}), ValidationError);
}

TEST_CASE("success percentages") {
  CHECK(percent_two_decimals(27, 30) == "90.00");
  CHECK(percent_two_decimals(26, 32) == "81.25");
  CHECK(percent_two_decimals(7, 7) == "100.00");
  CHECK(percent_two_decimals(10, 11) == "90.91");
  CHECK(percent_two_decimals(1, 3) == "33.33");
  CHECK(percent_two_decimals(2, 3) == "66.67");
  CHECK(percent_two_decimals(0, 5) == "0.00");
  // 1/8 = 12.5% exactly; 1/1600 = 0.0625% rounds half up to 0.06.
  CHECK(percent_two_decimals(1, 8) == "12.50");
  CHECK(percent_two_decimals(1, 1600) == "0.06");
  CHECK(percent_two_decimals(3, 1600) == "0.19");
  CHECK_THROWS_AS(percent_two_decimals(0, 0), ValidationError);
  CHECK_THROWS_AS(percent_two_decimals(4, 3), ValidationError);
}

TEST_CASE("success tally by condition") {
  using G = grasp::GraspClass;
  using L = slip::SlipLabel;
  const std::vector<EpisodeSummary> e{
      ep(0, G::Empty, L::Slipped, Outcome::AbortedEmptyOrMisgrasp, 5),   // grasp fault wins
      ep(1, G::UnripeHeld, L::Normal, Outcome::PickedAndPlaced, 11),     // missed misgrasp
      ep(2, G::RipeHeld, L::Slipping, Outcome::RecoveredAfterSlip, 12),
      ep(3, G::RipeHeld, L::Slipping, Outcome::PickedAndPlaced, 11),
      ep(4, G::RipeHeld, L::Slipped, Outcome::AbortedSlipped, 7),
      ep(5, G::RipeHeld, L::Normal, Outcome::PickedAndPlaced, 11),
  };
  CHECK(condition_of(e[0]) == Condition::EmptyGrasp);
  CHECK(condition_of(e[1]) == Condition::Misgrasp);
  const auto t = tally(e);
  CHECK(t.success == std::array<std::uint64_t, 5>{1, 0, 1, 1, 1});
  CHECK(t.failure == std::array<std::uint64_t, 5>{0, 1, 0, 1, 0});
  const auto rates = success_rates(t);
  REQUIRE(rates.size() == 5);
  CHECK(rates[3].condition == Condition::Slipping);
  CHECK(rates[3].percent == "50.00");
  CHECK(rates[3].fraction == 0.5);
  SuccessTally partial;
  partial.record(Condition::Normal, true);
  CHECK(success_rates(partial).size() == 1);
}

TEST_CASE("report round trip in both formats") {
  using G = grasp::GraspClass;
  using L = slip::SlipLabel;
  std::vector<EpisodeSummary> e;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 20);
  for (std::uint64_t i = 0; i < 25; ++i)
    e.push_back(ep(i, static_cast<G>(i % 3), static_cast<L>(i % 3 == 0 ? (i / 3) % 3 : 0),
                   static_cast<Outcome>(i % 4), u(rng), i % 2 == 0, u(rng) / 4, u(rng) / 4));
  const auto table = episode_table(e);
  for (auto fmt : {ReportFormat::Csv, ReportFormat::JsonLines}) {
    const auto text = format_report(table, fmt);
    const auto back = parse_report(text, fmt, episode_columns());
    CHECK(format_report(back, fmt) == text);
    CHECK(back.rows == table.rounded().rows);
    const auto summaries = episodes_from_table(back);
    REQUIRE(summaries.size() == e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
      CHECK(summaries[i].outcome == e[i].outcome);
      CHECK(summaries[i].grasp_truth == e[i].grasp_truth);
      CHECK(std::abs(summaries[i].total_s - e[i].total_s) <= 0.0005 + 1e-12);
    }
  }
  // Both formats carry equal values.
  const auto a = parse_report(format_report(table, ReportFormat::Csv), ReportFormat::Csv, episode_columns());
  const auto b =
      parse_report(format_report(table, ReportFormat::JsonLines), ReportFormat::JsonLines, episode_columns());
  CHECK(a.rows == b.rows);
  CHECK(format_report(table, ReportFormat::JsonLines).rfind("{\"episode_id\":0,\"grasp_truth\":\"RipeHeld\"", 0) == 0);
}

TEST_CASE("report files are byte-identical and empty results give a header") {
  const auto dir = std::filesystem::temp_directory_path() / "hg_test_metrics";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::vector<double> totals{11.2, 11.3, 11.25};
  std::vector<EpisodeSummary> e;
  for (std::size_t i = 0; i < totals.size(); ++i)
    e.push_back(ep(i, grasp::GraspClass::RipeHeld, slip::SlipLabel::Normal, Outcome::PickedAndPlaced, totals[i]));
  const auto stats = aggregate_cycle_times(e);
  const auto p1 = write_report(cycle_time_table(stats), ReportFormat::Csv, dir);
  const auto first = fixtures::slurp(p1);
  write_report(cycle_time_table(stats), ReportFormat::Csv, dir);
  CHECK(fixtures::slurp(p1) == first);
  CHECK(p1.filename() == "cycle_times.csv");
  CHECK(first == "outcome,n,mean_s,std_s\nPickedAndPlaced,3,11.250,0.050\n");

  const auto empty = write_report(episode_table({}), ReportFormat::Csv, dir);
  CHECK(fixtures::slurp(empty) ==
        "episode_id,grasp_truth,slip_truth,outcome,total_s,compensated,residual_x_mm,residual_y_mm\n");
  const auto empty_j = write_report(episode_table({}), ReportFormat::JsonLines, dir);
  CHECK(empty_j.extension() == ".jsonl");
  CHECK(fixtures::slurp(empty_j).empty());
  CHECK(success_table({}).rows.empty());
  CHECK(compensation_table({}).rows.empty());

  std::filesystem::remove_all(dir);
  // Writing below a regular file fails with the path in the message.
  const auto blocker = std::filesystem::temp_directory_path() / "hg_test_metrics_blocker";
  fixtures::write_file(blocker, "x");
  try {
    write_report(cycle_time_table(stats), ReportFormat::Csv, blocker / "sub");
    FAIL("expected IoError");
  } catch (const IoError& err) {
    CHECK(std::string(err.what()).find("hg_test_metrics_blocker") != std::string::npos);
  }
  std::filesystem::remove(blocker);
}

TEST_CASE("report parsing rejects malformed input") {
  CHECK(parse_format("csv") == ReportFormat::Csv);
  CHECK(parse_format("jsonl") == ReportFormat::JsonLines);
  CHECK_THROWS_AS(parse_format("xml"), ValidationError);
  CHECK_THROWS_AS(parse_report("a,b\n1,2\n", ReportFormat::Csv, episode_columns()), ValidationError);
  const auto header = "episode_id,grasp_truth,slip_truth,outcome,total_s,compensated,residual_x_mm,residual_y_mm\n";
  CHECK_THROWS_AS(
      parse_report(std::string(header) + "x,RipeHeld,Normal,PickedAndPlaced,1,0,0,0\n", ReportFormat::Csv,
                   episode_columns()),
      ValidationError);
  const auto t = parse_report(std::string(header) + "0,RipeHeld,Normal,Teleported,1,0,0,0\n", ReportFormat::Csv,
                              episode_columns());
  CHECK_THROWS_AS(episodes_from_table(t), ValidationError);
}

TEST_CASE("classification table has a macro row") {
  const auto m = confusion_metrics(lstm_like());
  const auto t = classification_table(m);
  REQUIRE(t.rows.size() == 4);
  CHECK(std::get<std::string>(t.rows[3][0]) == "macro");
  CHECK(std::get<double>(t.rows[3][3]) == doctest::Approx(macro_f1(m)));
  CHECK(std::get<std::int64_t>(t.rows[3][4]) == 300);
}
