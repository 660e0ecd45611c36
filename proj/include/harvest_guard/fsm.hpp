#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "harvest_guard/geometry.hpp"
#include "harvest_guard/grasp.hpp"
#include "harvest_guard/lstm.hpp"
#include "harvest_guard/rng.hpp"
#include "harvest_guard/sim.hpp"
#include "harvest_guard/slip_data.hpp"
#include "harvest_guard/slip_policy.hpp"

namespace harvest_guard::fsm {

enum class Stage : std::uint8_t {
  InflatingApproaching,
  Compensation,
  Swallowing,
  Deflating,
  SnapOff,
  Descending,
  Placing,
  Homing,
};

enum class Variant : std::uint8_t {
  Normal,
  EmptyGraspResponse,  // Deflating: re-inflate after an empty grasp
  MisgraspResponse,    // Deflating: re-inflate after closing on an unripe fruit
  SlippingRecovery,    // SnapOff: regrasp and snap again
  SlippedAbort,        // SnapOff: fruit lost, cycle aborted
  AbortReturn,         // Descending without anything to place
};

enum class Event : std::uint8_t {
  Aligned,
  OffsetExceedsTolerance,
  Compensated,
  Swallowed,
  GraspConfirmed,
  GraspAbort,
  TwoConsecutiveSlipping,
  TwoConsecutiveSlipped,
  SnapCompleted,
  Descended,
  Done,
};

const char* to_string(Stage s);
const char* to_string(Variant v);
const char* to_string(Event e);
Stage parse_stage(const std::string& text);
Variant parse_variant(const std::string& text);
Event parse_event(const std::string& text);

struct StageStep {
  Stage stage = Stage::InflatingApproaching;
  Variant variant = Variant::Normal;

  auto operator<=>(const StageStep&) const = default;
};

/// Transition table. `current` is the stage just completed, with its
/// variant already resolved from the monitor verdict. Pairs outside the
/// table throw ProtocolError; Homing is terminal.
StageStep next_transition(StageStep current, Event event);

/// All (stage, event) pairs the table defines, for exhaustive testing.
std::vector<std::pair<StageStep, Event>> defined_transitions();

// ---------------------------------------------------------------- timing

/// Which fault path an episode took; selects per-path timing overrides.
enum class CyclePath : std::uint8_t { Nominal, EmptyGrasp, Misgrasp, Slipped, SlippingRecovery };
const char* to_string(CyclePath p);

struct StageTiming {
  std::map<StageStep, sim::NormalDist> base;
  std::map<CyclePath, std::map<StageStep, sim::NormalDist>> overrides;

  /// Harvesting-time and slip-response tables of the deployed system.
  static StageTiming deployed_defaults();

  /// Override for `path` if present, else the base entry; throws
  /// ValidationError when neither exists.
  const sim::NormalDist& lookup(StageStep step, CyclePath path = CyclePath::Nominal) const;
  void validate() const;
};

/// Normal(mean, std) redrawn until >= 0.01 s; `deterministic` returns the
/// mean. A zero std returns the mean without consuming randomness.
double sample_stage_duration(const StageTiming& timing, StageStep step, Rng& rng, bool deterministic = false,
                             CyclePath path = CyclePath::Nominal);

inline constexpr double kMinStageDuration = 0.01;

// ---------------------------------------------------------------- monitors

/// Classifies one deflating-stage frame. `truth` is available so oracle
/// monitors can stand in for a trained model; real monitors ignore it.
class GraspMonitor {
 public:
  virtual ~GraspMonitor() = default;
  virtual std::optional<grasp::GraspClass> classify(const grasp::GripperObservation& obs, grasp::GraspClass truth,
                                                    Rng& rng) const = 0;
};

/// Trained classifier; frames below `min_confidence` are inconclusive.
class ModelGraspMonitor final : public GraspMonitor {
 public:
  ModelGraspMonitor(const grasp::GraspClassifier& model, double min_confidence = 0.5);
  std::optional<grasp::GraspClass> classify(const grasp::GripperObservation& obs, grasp::GraspClass truth,
                                            Rng& rng) const override;

 private:
  const grasp::GraspClassifier& model_;
  double min_confidence_;
};

/// Ground truth, replaced by a uniformly chosen wrong class with
/// probability `error_rate`.
class OracleGraspMonitor final : public GraspMonitor {
 public:
  explicit OracleGraspMonitor(double error_rate = 0.0);
  std::optional<grasp::GraspClass> classify(const grasp::GripperObservation& obs, grasp::GraspClass truth,
                                            Rng& rng) const override;

 private:
  double error_rate_;
};

/// Predicts the slip state of the next frames from one 5-frame window.
/// The window's label is the ground truth for oracle monitors.
class SlipMonitor {
 public:
  virtual ~SlipMonitor() = default;
  virtual slip::SlipLabel predict(const slip::SlipWindow& window, Rng& rng) const = 0;
};

class LstmSlipMonitor final : public SlipMonitor {
 public:
  LstmSlipMonitor(const slip::SlipModel& model, slip::ClassificationPolicy policy = {});
  slip::SlipLabel predict(const slip::SlipWindow& window, Rng& rng) const override;

 private:
  const slip::SlipModel& model_;
  slip::ClassificationPolicy policy_;
};

class OracleSlipMonitor final : public SlipMonitor {
 public:
  explicit OracleSlipMonitor(double error_rate = 0.0);
  slip::SlipLabel predict(const slip::SlipWindow& window, Rng& rng) const override;

 private:
  double error_rate_;
};

// ---------------------------------------------------------------- episodes

struct Policies {
  geometry::CompensationParams compensation;
  grasp::GraspDecisionConfig grasp_decision;
  const GraspMonitor* grasp_monitor = nullptr;
  const SlipMonitor* slip_monitor = nullptr;
  bool deterministic_timing = false;
};

/// What the world actually did in one cycle.
struct EpisodeTruth {
  geometry::ArmPoint3 picking;
  geometry::RelativeError injected;  // arm lands at commanded - injected
  grasp::GraspClass grasp = grasp::GraspClass::RipeHeld;
  slip::SlipLabel slip = slip::SlipLabel::Normal;
};

enum class Outcome : std::uint8_t { PickedAndPlaced, AbortedEmptyOrMisgrasp, AbortedSlipped, RecoveredAfterSlip };
const char* to_string(Outcome o);

struct StageRecord {
  StageStep step;
  double duration_s = 0.0;
  Event event = Event::Done;  // the event that ended this stage
  std::string detail;
};

struct SlipDecision {
  std::size_t frame = 0;  // index of the last frame in the window
  slip::SlipLabel prediction = slip::SlipLabel::Normal;
  slip::SlipAction action = slip::SlipAction::None;
  bool recovery_attempt = false;
};

struct HarvestEpisode {
  std::uint64_t episode_id = 0;
  EpisodeTruth truth;
  std::vector<StageRecord> records;
  geometry::CompensationRecord approach;
  double residual_x_mm = 0.0;
  double residual_y_mm = 0.0;
  bool compensated = false;
  grasp::GraspAction grasp_action = grasp::GraspAction::None;
  std::vector<std::optional<grasp::GraspClass>> grasp_frames;
  std::vector<SlipDecision> slip_decisions;
  CyclePath path = CyclePath::Nominal;
  Outcome outcome = Outcome::PickedAndPlaced;
  double total_s = 0.0;
};

/// Sum of stage durations in record order; `total_s` is set from this.
double sum_durations(const HarvestEpisode& episode);

/// Draws picking point, positional error, grasp class and slip class.
EpisodeTruth sample_truth(const sim::ScenarioConfig& world, Rng& rng);

/// Drives one cycle from approach to homing with a fixed ground truth.
/// Stage order and monitor calls use `rng`; durations come from a stream
/// split off it, so overriding timing never changes the stage sequence.
HarvestEpisode run_episode(const EpisodeTruth& truth, const sim::ScenarioConfig& world, const StageTiming& timing,
                           const Policies& policies, std::uint64_t episode_id, Rng& rng);

/// `episodes` cycles; episode i uses derive_rng(seed, i) for both its
/// truth and its run, so the result never depends on execution order.
std::vector<HarvestEpisode> simulate(const sim::ScenarioConfig& world, const StageTiming& timing,
                                     const Policies& policies, std::uint64_t seed, std::size_t episodes);

// ---------------------------------------------------------------- log

struct LogRecord {
  std::uint64_t episode_id = 0;
  std::uint64_t seq = 0;
  std::string stage;
  std::string variant;
  double duration_s = 0.0;
  std::string event;
  std::string detail;

  bool operator==(const LogRecord&) const = default;
};

std::vector<LogRecord> log_records(const HarvestEpisode& episode);
/// One JSON object per line, fields in the LogRecord order.
std::string format_log(const std::vector<HarvestEpisode>& episodes);
std::vector<LogRecord> parse_log(const std::string& text);

// ---------------------------------------------------------------- config

/// Which monitors `simulate` uses when no trained model is supplied.
struct MonitorSettings {
  double grasp_error_rate = 0.0;
  double slip_error_rate = 0.0;
  double grasp_min_confidence = 0.5;
  slip::ClassificationPolicy slip_policy;
};

/// Everything a simulation run reads from its config file: the scenario
/// sections plus [compensation], [monitors], [timing] and [timing.<path>].
struct SimulationConfig {
  sim::ScenarioConfig scenario;
  geometry::CompensationParams compensation;
  grasp::GraspDecisionConfig grasp_decision;
  MonitorSettings monitors;
  StageTiming timing = StageTiming::deployed_defaults();
};

SimulationConfig parse_simulation_config(const std::string& text);
SimulationConfig load_simulation_config(const std::filesystem::path& path);

/// Config-file key for a timing entry, e.g. "snap_off_slipping_recovery".
std::string timing_key(StageStep step);

}  // namespace harvest_guard::fsm
