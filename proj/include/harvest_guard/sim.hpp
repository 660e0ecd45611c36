#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "harvest_guard/geometry.hpp"
#include "harvest_guard/grasp.hpp"
#include "harvest_guard/rng.hpp"
#include "harvest_guard/slip_data.hpp"

namespace harvest_guard::sim {

struct NormalDist {
  double mean = 0.0;
  double std = 0.0;
};

/// Shape of generated snap-off feature curves.
struct SlipTrajectoryParams {
  double initial_area = 0.35;      // strawberry fraction of the frame while held
  double gripper_area = 0.25;
  double decay_rate = 0.05;        // fraction of initial area lost per slipping frame
  double box_w = 0.45;
  double box_h = 0.50;
  double center_x = 0.50;
  double center_y = 0.45;
  double slip_drift_y = 0.02;      // centre moves down the image while slipping
  std::size_t frames_normal = 6;
  std::size_t frames_slipping = 4;
  std::size_t frames_slipped = 4;
  std::size_t slipped_decay_frames = 1;  // how fast a fruit that falls goes from held to gone
  std::size_t precursor_frames = 3;      // loosening cues before the visible slip
  double precursor_drift_slipping = 0.02;
  double precursor_drift_slipped = 0.04;
  double feature_noise = 0.003;
  double frame_interval_s = 0.07;
};

struct ScenarioConfig {
  std::size_t episodes = 100;

  // Positional error injected between the true picking point and where the
  // arm first lands, per axis (mm).
  NormalDist error_x{0.0, 12.0};
  NormalDist error_y{0.0, 8.0};
  double vision_noise_mm = 2.0;
  double actuation_noise_mm = 3.0;
  geometry::ArmPoint3 picking_center{550.0, 235.0, 705.0};
  geometry::ArmPoint3 picking_spread{150.0, 10.0, 8.0};

  std::array<double, 3> grasp_probs{0.8, 0.1, 0.1};  // ripe, empty, unripe
  double grasp_noise = 0.05;
  double grasp_frame_interval_s = 0.1;
  std::array<double, 3> slip_probs{0.8, 0.1, 0.1};   // normal, slipping, slipped
  SlipTrajectoryParams slip;

  double ripeness_threshold = 0.8;

  /// Throws ValidationError on probabilities that do not sum to 1,
  /// negative spreads, or an out-of-range ripeness threshold.
  void validate() const;
};

/// Reads the INI-style scenario file; absent keys keep their defaults.
ScenarioConfig load_config(const std::filesystem::path& path);
ScenarioConfig parse_config(const std::string& text);
/// Canonical dump of every field, loadable by parse_config.
std::string format_config(const ScenarioConfig& config);

struct SlipTrajectory {
  std::vector<slip::FrameFeatures> frames;
  std::vector<slip::SlipLabel> labels;
};

struct SlipPhases {
  std::size_t normal = 0;
  std::size_t slipping = 0;
  std::size_t slipped = 0;
};

/// Default phase lengths for an outcome: everything normal, normal then
/// slipping to the end, or normal then a fast decay then slipped.
SlipPhases default_phases(const SlipTrajectoryParams& p, slip::SlipLabel outcome);

SlipTrajectory gen_slip_trajectory(const SlipTrajectoryParams& p, slip::SlipLabel outcome, Rng& rng);
/// `outcome` selects the dynamics (slow vs. fast loss); `phases` the lengths.
SlipTrajectory gen_slip_trajectory(const SlipTrajectoryParams& p, slip::SlipLabel outcome, const SlipPhases& phases,
                                   Rng& rng);

grasp::GripperObservation gen_grasp_observation(grasp::GraspClass cls, double noise, Rng& rng);

/// Draws index k with probability probs[k].
std::size_t sample_category(const std::array<double, 3>& probs, Rng& rng);

struct ApproachResult {
  geometry::CompensationRecord record;
  double residual_x_mm = 0.0;  // |true - final effector|
  double residual_y_mm = 0.0;
};

/// One approach: land with the injected error plus actuation noise, measure
/// with vision noise, compensate if needed, land again.
ApproachResult simulate_approach(const geometry::ArmPoint3& true_picking, const geometry::RelativeError& injected,
                                 const ScenarioConfig& config, const geometry::CompensationParams& params, Rng& rng);

enum class DatasetKind { Slip, Grasp };

/// Exact per-class totals: windows for slip data, rows for grasp data.
struct DatasetTargets {
  std::array<std::size_t, 3> counts{};
};

inline constexpr std::array<std::size_t, 3> kReferenceSlipCounts{719, 157, 1962};
inline constexpr std::array<std::size_t, 3> kReferenceGraspCounts{389, 346, 388};

std::array<std::size_t, 3> scale_counts(const std::array<std::size_t, 3>& counts, double scale);

std::vector<slip::SlipEpisode> gen_slip_dataset(const ScenarioConfig& config, const DatasetTargets& targets, Rng& rng);
std::vector<grasp::LabeledObservation> gen_grasp_dataset(const ScenarioConfig& config, const DatasetTargets& targets,
                                                         Rng& rng);

/// Generates and writes the CSV; IoError on an unwritable destination.
void gen_dataset(const ScenarioConfig& config, DatasetKind kind, const DatasetTargets& targets, std::uint64_t seed,
                 const std::filesystem::path& out);

}  // namespace harvest_guard::sim
