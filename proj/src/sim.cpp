#include "harvest_guard/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "harvest_guard/csv.hpp"
#include "harvest_guard/errors.hpp"
#include "ini_reader.hpp"

namespace harvest_guard::sim {

using geometry::ArmPoint3;
using geometry::RelativeError;
using slip::FrameFeatures;
using slip::SlipLabel;

void ScenarioConfig::validate() const {
  const auto check_probs = [](const std::array<double, 3>& p, const char* what) {
    for (double v : p)
      if (!(v >= 0.0)) throw ValidationError(fmt::format("{} probabilities must be >= 0", what));
    const double s = p[0] + p[1] + p[2];
    if (std::abs(s - 1.0) > 1e-9) throw ValidationError(fmt::format("{} probabilities sum to {}, not 1", what, s));
  };
  check_probs(grasp_probs, "grasp");
  check_probs(slip_probs, "slip");
  for (double s : {error_x.std, error_y.std, vision_noise_mm, actuation_noise_mm, grasp_noise, slip.feature_noise,
                   picking_spread.x, picking_spread.y, picking_spread.z})
    if (!(s >= 0.0)) throw ValidationError("standard deviations must be >= 0");
  if (!(ripeness_threshold >= 0.0 && ripeness_threshold <= 1.1))
    throw ValidationError(fmt::format("ripeness threshold {} outside [0, 1.1]", ripeness_threshold));
  if (!(slip.initial_area > 0.0) || slip.initial_area + slip.gripper_area > 1.0)
    throw ValidationError("slip initial_area + gripper_area must be in (0, 1]");
  if (!(slip.frame_interval_s > 0.0) || !(grasp_frame_interval_s > 0.0))
    throw ValidationError("frame intervals must be > 0");
  if (slip.frames_normal + slip.frames_slipping + slip.frames_slipped < slip::kWindowLength)
    throw ValidationError("a snap-off needs at least 5 frames");
  if (slip.slipped_decay_frames > slip.frames_slipping + slip.frames_slipped)
    throw ValidationError("slipped_decay_frames exceeds the frames after onset");
}

// ---------------------------------------------------------------- config file

ScenarioConfig parse_config(const std::string& text) {
  const auto tree = ini::parse(text);
  ScenarioConfig c;
  ini::Reader r(tree);
  r.get("scenario", "episodes", c.episodes);
  r.get("positional", "error_mean_x", c.error_x.mean);
  r.get("positional", "error_std_x", c.error_x.std);
  r.get("positional", "error_mean_y", c.error_y.mean);
  r.get("positional", "error_std_y", c.error_y.std);
  r.get("positional", "vision_noise_mm", c.vision_noise_mm);
  r.get("positional", "actuation_noise_mm", c.actuation_noise_mm);
  r.get("positional", "picking_x", c.picking_center.x);
  r.get("positional", "picking_y", c.picking_center.y);
  r.get("positional", "picking_z", c.picking_center.z);
  r.get("positional", "picking_spread_x", c.picking_spread.x);
  r.get("positional", "picking_spread_y", c.picking_spread.y);
  r.get("positional", "picking_spread_z", c.picking_spread.z);
  r.get("grasp", "p_ripe", c.grasp_probs[0]);
  r.get("grasp", "p_empty", c.grasp_probs[1]);
  r.get("grasp", "p_unripe", c.grasp_probs[2]);
  r.get("grasp", "observation_noise", c.grasp_noise);
  r.get("grasp", "frame_interval_s", c.grasp_frame_interval_s);
  r.get("slip", "p_normal", c.slip_probs[0]);
  r.get("slip", "p_slipping", c.slip_probs[1]);
  r.get("slip", "p_slipped", c.slip_probs[2]);
  r.get("slip", "initial_area", c.slip.initial_area);
  r.get("slip", "gripper_area", c.slip.gripper_area);
  r.get("slip", "decay_rate", c.slip.decay_rate);
  r.get("slip", "slip_drift_y", c.slip.slip_drift_y);
  r.get("slip", "frames_normal", c.slip.frames_normal);
  r.get("slip", "frames_slipping", c.slip.frames_slipping);
  r.get("slip", "frames_slipped", c.slip.frames_slipped);
  r.get("slip", "slipped_decay_frames", c.slip.slipped_decay_frames);
  r.get("slip", "precursor_frames", c.slip.precursor_frames);
  r.get("slip", "precursor_drift_slipping", c.slip.precursor_drift_slipping);
  r.get("slip", "precursor_drift_slipped", c.slip.precursor_drift_slipped);
  r.get("slip", "feature_noise", c.slip.feature_noise);
  r.get("slip", "frame_interval_s", c.slip.frame_interval_s);
  r.get("ripeness", "threshold", c.ripeness_threshold);
  r.reject_unknown_keys({"scenario", "positional", "grasp", "slip", "ripeness"});
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  const auto table_text = [&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }();
  try {
    return parse_config(table_text);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string format_config(const ScenarioConfig& c) {
  std::string out;
  out += fmt::format("[scenario]\nepisodes = {}\n\n", c.episodes);
  out += fmt::format(
      "[positional]\nerror_mean_x = {}\nerror_std_x = {}\nerror_mean_y = {}\nerror_std_y = {}\n"
      "vision_noise_mm = {}\nactuation_noise_mm = {}\npicking_x = {}\npicking_y = {}\npicking_z = {}\n"
      "picking_spread_x = {}\npicking_spread_y = {}\npicking_spread_z = {}\n\n",
      c.error_x.mean, c.error_x.std, c.error_y.mean, c.error_y.std, c.vision_noise_mm, c.actuation_noise_mm,
      c.picking_center.x, c.picking_center.y, c.picking_center.z, c.picking_spread.x, c.picking_spread.y,
      c.picking_spread.z);
  out += fmt::format("[grasp]\np_ripe = {}\np_empty = {}\np_unripe = {}\nobservation_noise = {}\nframe_interval_s = {}\n\n",
                     c.grasp_probs[0], c.grasp_probs[1], c.grasp_probs[2], c.grasp_noise, c.grasp_frame_interval_s);
  const auto& s = c.slip;
  out += fmt::format(
      "[slip]\np_normal = {}\np_slipping = {}\np_slipped = {}\ninitial_area = {}\ngripper_area = {}\n"
      "decay_rate = {}\nslip_drift_y = {}\nframes_normal = {}\nframes_slipping = {}\nframes_slipped = {}\n"
      "slipped_decay_frames = {}\nprecursor_frames = {}\nprecursor_drift_slipping = {}\n"
      "precursor_drift_slipped = {}\nfeature_noise = {}\nframe_interval_s = {}\n\n",
      c.slip_probs[0], c.slip_probs[1], c.slip_probs[2], s.initial_area, s.gripper_area, s.decay_rate, s.slip_drift_y,
      s.frames_normal, s.frames_slipping, s.frames_slipped, s.slipped_decay_frames, s.precursor_frames,
      s.precursor_drift_slipping, s.precursor_drift_slipped, s.feature_noise, s.frame_interval_s);
  out += fmt::format("[ripeness]\nthreshold = {}\n", c.ripeness_threshold);
  return out;
}

// ---------------------------------------------------------------- generators

std::size_t sample_category(const std::array<double, 3>& probs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    acc += probs[k];
    if (x < acc) return k;
  }
  return 2;
}

SlipPhases default_phases(const SlipTrajectoryParams& p, SlipLabel outcome) {
  const std::size_t total = p.frames_normal + p.frames_slipping + p.frames_slipped;
  switch (outcome) {
    case SlipLabel::Normal: return {total, 0, 0};
    case SlipLabel::Slipping: return {p.frames_normal, total - p.frames_normal, 0};
    case SlipLabel::Slipped:
      return {p.frames_normal, p.slipped_decay_frames, total - p.frames_normal - p.slipped_decay_frames};
  }
  return {total, 0, 0};
}

SlipTrajectory gen_slip_trajectory(const SlipTrajectoryParams& p, SlipLabel outcome, Rng& rng) {
  return gen_slip_trajectory(p, outcome, default_phases(p, outcome), rng);
}

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

FrameFeatures make_frame(const SlipTrajectoryParams& p, double straw_area, double dy, double shrink, bool gone,
                         std::normal_distribution<double>& noise, Rng& rng) {
  FrameFeatures f;
  // Draw every noise term unconditionally so the stream layout never depends on the phase.
  const double n_area = noise(rng), n_grip = noise(rng), n_w = noise(rng), n_h = noise(rng), n_x = noise(rng),
               n_y = noise(rng);
  f.strawberry_area = clamp01(straw_area + (gone ? std::abs(n_area) * 0.5 : n_area));
  f.gripper_area = clamp01(p.gripper_area + n_grip);
  if (f.strawberry_area + f.gripper_area > 1.0) f.gripper_area = 1.0 - f.strawberry_area;
  f.background_area = clamp01(1.0 - f.strawberry_area - f.gripper_area);
  if (gone) {
    f.w = f.h = f.x = f.y = 0.0;
  } else {
    f.w = clamp01(p.box_w * shrink + n_w);
    f.h = clamp01(p.box_h * shrink + n_h);
    f.x = clamp01(p.center_x + n_x);
    f.y = clamp01(p.center_y + dy + n_y);
  }
  return f;
}

}  // namespace

SlipTrajectory gen_slip_trajectory(const SlipTrajectoryParams& p, SlipLabel outcome, const SlipPhases& phases,
                                   Rng& rng) {
  std::normal_distribution<double> noise(0.0, std::max(p.feature_noise, 0.0));
  const bool noiseless = p.feature_noise <= 0.0;
  std::normal_distribution<double> zero(0.0, 1e-300);
  auto& nd = noiseless ? zero : noise;

  const bool will_slip = outcome != SlipLabel::Normal && (phases.slipping + phases.slipped) > 0;
  const double precursor_rate =
      outcome == SlipLabel::Slipped ? p.precursor_drift_slipped : p.precursor_drift_slipping;
  // Slipped-outcome fruit falls within the decay frames; slipping fruit loses
  // `decay_rate` of its area per frame.
  const double fall_rate = outcome == SlipLabel::Slipped
                               ? 1.0 / static_cast<double>(phases.slipping + 1)
                               : p.decay_rate;

  SlipTrajectory out;
  const std::size_t onset = phases.normal;
  // Precursor displacement carried into the slip so the curve stays continuous.
  const std::size_t pre = will_slip ? std::min(p.precursor_frames, phases.normal) : 0;
  const double pre_dy = precursor_rate * static_cast<double>(pre);
  const double pre_loss = 0.25 * precursor_rate * static_cast<double>(pre);

  for (std::size_t i = 0; i < phases.normal; ++i) {
    double dy = 0.0, loss = 0.0;
    if (will_slip && i + pre >= onset) {
      const auto k = static_cast<double>(i + pre - onset + 1);
      dy = precursor_rate * k;
      loss = 0.25 * precursor_rate * k;
    }
    out.frames.push_back(make_frame(p, p.initial_area * (1.0 - loss), dy, 1.0 - loss, false, nd, rng));
    out.labels.push_back(SlipLabel::Normal);
  }
  for (std::size_t j = 1; j <= phases.slipping; ++j) {
    const double remaining = std::max(0.0, 1.0 - pre_loss - fall_rate * static_cast<double>(j));
    const double dy = pre_dy + p.slip_drift_y * static_cast<double>(j);
    out.frames.push_back(make_frame(p, p.initial_area * remaining, dy, std::max(remaining, 0.05), false, nd, rng));
    out.labels.push_back(SlipLabel::Slipping);
  }
  for (std::size_t j = 0; j < phases.slipped; ++j) {
    out.frames.push_back(make_frame(p, 0.0, 0.0, 0.0, true, nd, rng));
    out.labels.push_back(SlipLabel::Slipped);
  }
  (void)onset;
  return out;
}

grasp::GripperObservation gen_grasp_observation(grasp::GraspClass cls, double noise, Rng& rng) {
  std::normal_distribution<double> nd(0.0, std::max(noise, 1e-300));
  const auto n = [&] { return noise > 0.0 ? nd(rng) : 0.0; };
  grasp::GripperObservation o;
  switch (cls) {
    case grasp::GraspClass::RipeHeld:
      o.red_fraction = clamp01(0.60 + n());
      o.green_fraction = clamp01(0.05 + n());
      o.fruit_area = std::clamp(0.50 + n(), 0.01, 1.0);
      o.fruit_present = true;
      break;
    case grasp::GraspClass::UnripeHeld:
      o.red_fraction = clamp01(0.05 + n());
      o.green_fraction = clamp01(0.55 + n());
      o.fruit_area = std::clamp(0.45 + n(), 0.01, 1.0);
      o.fruit_present = true;
      break;
    case grasp::GraspClass::Empty:
      // Stray colour from the gripper interior, no fruit blob.
      o.red_fraction = clamp01(std::abs(n()) * 0.5);
      o.green_fraction = clamp01(std::abs(n()) * 0.5);
      o.fruit_area = 0.0;
      o.fruit_present = false;
      break;
  }
  return o;
}

ApproachResult simulate_approach(const ArmPoint3& true_picking, const RelativeError& injected,
                                 const ScenarioConfig& config, const geometry::CompensationParams& params, Rng& rng) {
  std::normal_distribution<double> actuation(0.0, std::max(config.actuation_noise_mm, 1e-300));
  std::normal_distribution<double> vision(0.0, std::max(config.vision_noise_mm, 1e-300));
  const auto act = [&] { return config.actuation_noise_mm > 0.0 ? actuation(rng) : 0.0; };
  const auto vis = [&] { return config.vision_noise_mm > 0.0 ? vision(rng) : 0.0; };

  // The arm carries a systematic offset: commanding point c lands at c - injected.
  const auto land = [&](const ArmPoint3& commanded) {
    const double ax = act(), ay = act();
    return ArmPoint3{commanded.x - injected.dx + ax, commanded.y - injected.dy + ay, commanded.z - injected.dz};
  };

  ApproachResult out;
  const ArmPoint3 first = land(true_picking);
  const RelativeError physical = geometry::relative_error(true_picking, first);
  const double vx = vis(), vy = vis();
  const RelativeError measured{physical.dx + vx, physical.dy + vy, physical.dz};

  out.record = geometry::compensate(true_picking, first, params, measured);
  out.record.physical_err_x = physical.dx;
  out.record.physical_err_y = physical.dy;
  ArmPoint3 final_effector = first;
  if (out.record.compensated) {
    final_effector = land(*out.record.compensated);
    out.record.residual_x = true_picking.x - final_effector.x;
    out.record.residual_y = true_picking.y - final_effector.y;
  }
  out.residual_x_mm = std::abs(true_picking.x - final_effector.x);
  out.residual_y_mm = std::abs(true_picking.y - final_effector.y);
  return out;
}

// ---------------------------------------------------------------- datasets

std::array<std::size_t, 3> scale_counts(const std::array<std::size_t, 3>& counts, double scale) {
  if (!(scale > 0.0)) throw ValidationError("count scale must be > 0");
  std::array<std::size_t, 3> out{};
  for (std::size_t k = 0; k < 3; ++k) out[k] = static_cast<std::size_t>(std::llround(static_cast<double>(counts[k]) * scale));
  return out;
}

namespace {

/// Splits `total` into `parts` positive integers with random proportions.
std::vector<std::size_t> partition(std::size_t total, std::size_t parts, Rng& rng) {
  std::vector<std::size_t> out(parts, 1);
  if (parts == 0) return out;
  std::uniform_real_distribution<double> w(0.5, 1.5);
  std::vector<double> weights(parts);
  for (auto& v : weights) v = w(rng);
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  const std::size_t spare = total - parts;
  std::size_t given = 0;
  for (std::size_t i = 0; i < parts; ++i) {
    const auto extra = static_cast<std::size_t>(std::floor(static_cast<double>(spare) * weights[i] / sum));
    out[i] += extra;
    given += extra;
  }
  for (std::size_t i = 0; given < spare; i = (i + 1) % parts, ++given) ++out[i];
  return out;
}

}  // namespace

std::vector<slip::SlipEpisode> gen_slip_dataset(const ScenarioConfig& config, const DatasetTargets& targets, Rng& rng) {
  config.validate();
  // Window labels are the label of the frame three steps past the window end,
  // so an episode's window counts equal its frame-label counts from index 7 on.
  constexpr std::size_t uncounted = slip::kWindowLength + slip::kLookahead - 1;
  const auto& p = config.slip;
  const auto [c_normal, c_slipping, c_slipped] = targets.counts;

  struct Plan {
    SlipLabel outcome;
    std::size_t lead;      // counted normal frames
    std::size_t slipping;  // counted slipping frames
    std::size_t slipped;
  };
  std::vector<Plan> plans;

  constexpr std::size_t mean_tail = 32;
  const std::size_t decay = std::max<std::size_t>(p.slipped_decay_frames, 1);
  std::size_t n_slipped_eps = c_slipped == 0 ? 0 : (c_slipped + mean_tail - 1) / mean_tail;
  // Each slipped episode spends its decay frames on the slipping budget.
  n_slipped_eps = std::min(n_slipped_eps, std::max<std::size_t>(c_slipping / (2 * decay), c_slipped ? 1 : 0));
  n_slipped_eps = std::min(n_slipped_eps, c_slipped);
  const auto tails = partition(c_slipped, n_slipped_eps, rng);
  std::size_t slipping_left = c_slipping;
  for (std::size_t i = 0; i < n_slipped_eps; ++i) {
    const std::size_t d = std::min(decay, slipping_left);
    slipping_left -= d;
    plans.push_back({SlipLabel::Slipped, 0, d, tails[i]});
  }
  if (slipping_left > 0) {
    const std::size_t per = std::max<std::size_t>(2 * p.frames_slipping, 1);
    const std::size_t n_eps = (slipping_left + per - 1) / per;
    for (std::size_t s : partition(slipping_left, n_eps, rng)) plans.push_back({SlipLabel::Slipping, 0, s, 0});
  }
  // Normal windows: a short counted lead before each slip, the rest in
  // all-normal episodes.
  std::size_t normal_left = c_normal;
  std::uniform_int_distribution<std::size_t> lead_len(0, 6);
  for (auto& plan : plans) {
    plan.lead = std::min(normal_left, lead_len(rng));
    normal_left -= plan.lead;
  }
  if (normal_left > 0) {
    constexpr std::size_t per = 20;
    const std::size_t n_eps = (normal_left + per - 1) / per;
    for (std::size_t s : partition(normal_left, n_eps, rng)) plans.push_back({SlipLabel::Normal, s, 0, 0});
  }
  std::shuffle(plans.begin(), plans.end(), rng);

  std::vector<slip::SlipEpisode> out;
  out.reserve(plans.size());
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& plan = plans[i];
    const SlipPhases phases{uncounted + plan.lead, plan.slipping, plan.slipped};
    auto traj = gen_slip_trajectory(p, plan.outcome, phases, rng);
    slip::SlipEpisode ep;
    ep.episode_id = static_cast<std::int64_t>(i);
    ep.frames = std::move(traj.frames);
    ep.labels = std::move(traj.labels);
    out.push_back(std::move(ep));
  }
  return out;
}

std::vector<grasp::LabeledObservation> gen_grasp_dataset(const ScenarioConfig& config, const DatasetTargets& targets,
                                                         Rng& rng) {
  config.validate();
  std::vector<grasp::GraspClass> labels;
  for (std::size_t k = 0; k < 3; ++k) labels.insert(labels.end(), targets.counts[k], static_cast<grasp::GraspClass>(k));
  std::shuffle(labels.begin(), labels.end(), rng);
  std::vector<grasp::LabeledObservation> out;
  out.reserve(labels.size());
  for (auto cls : labels) out.push_back({gen_grasp_observation(cls, config.grasp_noise, rng), cls});
  return out;
}

void gen_dataset(const ScenarioConfig& config, DatasetKind kind, const DatasetTargets& targets, std::uint64_t seed,
                 const std::filesystem::path& out) {
  Rng rng(seed);
  if (kind == DatasetKind::Slip) {
    const auto episodes = gen_slip_dataset(config, targets, rng);
    csv::write_text(out, slip::format_slip_csv(episodes));
  } else {
    const auto rows = gen_grasp_dataset(config, targets, rng);
    csv::write_text(out, grasp::format_grasp_csv(rows));
  }
}

}  // namespace harvest_guard::sim
