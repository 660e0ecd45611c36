#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "harvest_guard/fsm.hpp"

namespace harvest_guard::metrics {

// ---------------------------------------------------------------- classification

struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::uint64_t>> counts;  // counts[truth][predicted]

  explicit ConfusionMatrix(std::vector<std::string> class_labels);
  ConfusionMatrix(std::vector<std::string> class_labels, std::vector<std::vector<std::uint64_t>> cells);

  void add(std::size_t truth, std::size_t predicted, std::uint64_t n = 1);
  std::size_t size() const { return labels.size(); }
  std::uint64_t total() const;
};

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;  // row total
  // Set when the quantity had a zero denominator and was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

/// Per-class precision, recall and F1. Throws ValidationError on an empty matrix.
std::vector<ClassMetrics> confusion_metrics(const ConfusionMatrix& cm);
double macro_f1(std::span<const ClassMetrics> metrics);

// ---------------------------------------------------------------- ripeness

struct RipenessEval {
  std::vector<double> truth;
  std::vector<double> predicted;
  double lambda = 1.0;
};

/// (lambda / N) * sum |r_i - r_hat_i|; lambda = 1 is the plain MAE.
double ripeness_loss(const RipenessEval& eval);

// ---------------------------------------------------------------- episodes

/// The per-episode facts reports are built from.
struct EpisodeSummary {
  std::uint64_t episode_id = 0;
  grasp::GraspClass grasp_truth = grasp::GraspClass::RipeHeld;
  slip::SlipLabel slip_truth = slip::SlipLabel::Normal;
  fsm::Outcome outcome = fsm::Outcome::PickedAndPlaced;
  double total_s = 0.0;
  bool compensated = false;
  double residual_x_mm = 0.0;
  double residual_y_mm = 0.0;
};

EpisodeSummary summarize(const fsm::HarvestEpisode& episode);
std::vector<EpisodeSummary> summarize(std::span<const fsm::HarvestEpisode> episodes);

struct CycleTimeStats {
  fsm::Outcome outcome = fsm::Outcome::PickedAndPlaced;
  double mean_s = 0.0;
  double std_s = 0.0;  // sample (n - 1); 0 for a single episode
  std::uint64_t n = 0;
};

/// One row per outcome that occurs, in outcome order.
std::vector<CycleTimeStats> aggregate_cycle_times(std::span<const EpisodeSummary> episodes);

struct SampleStats {
  double mean = 0.0;
  double std = 0.0;
  std::uint64_t n = 0;
};
/// Mean and sample standard deviation; throws on an empty sequence.
SampleStats sample_stats(std::span<const double> values);

enum class Condition : std::uint8_t { EmptyGrasp, Misgrasp, Normal, Slipping, Slipped };
inline constexpr std::size_t kConditionCount = 5;
const char* to_string(Condition c);

struct SuccessTally {
  std::array<std::uint64_t, kConditionCount> success{};
  std::array<std::uint64_t, kConditionCount> failure{};

  void record(Condition c, bool ok) { (ok ? success : failure)[static_cast<std::size_t>(c)] += 1; }
};

/// Grasp faults take precedence over the slip class when choosing the
/// condition an episode counts toward.
Condition condition_of(const EpisodeSummary& episode);
/// The response the system should have given for the episode's condition.
bool is_success(const EpisodeSummary& episode);
SuccessTally tally(std::span<const EpisodeSummary> episodes);

struct SuccessRate {
  Condition condition = Condition::Normal;
  std::uint64_t success = 0;
  std::uint64_t failure = 0;
  double fraction = 0.0;
  std::string percent;  // two decimals, half away from zero, e.g. "90.91"
};

/// Rows for conditions with at least one episode.
std::vector<SuccessRate> success_rates(const SuccessTally& tally);
/// 100 * success / total rounded half away from zero at two decimals.
std::string percent_two_decimals(std::uint64_t success, std::uint64_t total);

// ---------------------------------------------------------------- reports

enum class ReportFormat { Csv, JsonLines };
ReportFormat parse_format(const std::string& text);
const char* extension(ReportFormat format);

struct Column {
  enum class Kind { Text, Integer, Real };
  std::string name;
  Kind kind = Kind::Text;
  int decimals = 3;  // Real columns only
};

using Cell = std::variant<std::string, std::int64_t, double>;

struct ReportTable {
  std::string name;
  std::vector<Column> columns;
  std::vector<std::vector<Cell>> rows;

  /// Rounds Real cells to their column precision, the form they take on disk.
  ReportTable rounded() const;
};

std::string format_report(const ReportTable& table, ReportFormat format);
/// Parses text produced by format_report back into `columns`.
ReportTable parse_report(const std::string& text, ReportFormat format, const std::vector<Column>& columns);
/// Writes <dir>/<name>.<ext>; IoError carries the path.
std::filesystem::path write_report(const ReportTable& table, ReportFormat format, const std::filesystem::path& dir);

ReportTable cycle_time_table(std::span<const CycleTimeStats> stats);
ReportTable success_table(std::span<const SuccessRate> rates);
ReportTable compensation_table(std::span<const EpisodeSummary> episodes);
ReportTable stage_time_table(std::span<const fsm::HarvestEpisode> episodes);
ReportTable classification_table(std::span<const ClassMetrics> metrics);
const std::vector<Column>& episode_columns();
ReportTable episode_table(std::span<const EpisodeSummary> episodes);
std::vector<EpisodeSummary> episodes_from_table(const ReportTable& table);

}  // namespace harvest_guard::metrics
