#include "harvest_guard/fsm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "harvest_guard/errors.hpp"
#include "ini_reader.hpp"

namespace harvest_guard::fsm {

using grasp::GraspAction;
using grasp::GraspClass;
using slip::SlipAction;
using slip::SlipLabel;

namespace {

template <class E, std::size_t N>
E parse_enum(const std::string& text, const std::array<const char*, N>& names, const char* what) {
  for (std::size_t i = 0; i < N; ++i)
    if (text == names[i]) return static_cast<E>(i);
  throw ValidationError(fmt::format("unknown {} '{}'", what, text));
}

constexpr std::array<const char*, 8> kStageNames{"InflatingApproaching", "Compensation", "Swallowing", "Deflating",
                                                 "SnapOff",              "Descending",   "Placing",    "Homing"};
constexpr std::array<const char*, 6> kVariantNames{"Normal",           "EmptyGraspResponse", "MisgraspResponse",
                                                   "SlippingRecovery", "SlippedAbort",       "AbortReturn"};
constexpr std::array<const char*, 11> kEventNames{
    "Aligned",        "OffsetExceedsTolerance", "Compensated",           "Swallowed",
    "GraspConfirmed", "GraspAbort",             "TwoConsecutiveSlipping", "TwoConsecutiveSlipped",
    "SnapCompleted",  "Descended",              "Done"};
constexpr std::array<const char*, 5> kPathNames{"nominal", "empty_grasp", "misgrasp", "slipped", "slipping_recovery"};
constexpr std::array<const char*, 4> kOutcomeNames{"PickedAndPlaced", "AbortedEmptyOrMisgrasp", "AbortedSlipped",
                                                   "RecoveredAfterSlip"};

}  // namespace

const char* to_string(Stage s) { return kStageNames.at(static_cast<std::size_t>(s)); }
const char* to_string(Variant v) { return kVariantNames.at(static_cast<std::size_t>(v)); }
const char* to_string(Event e) { return kEventNames.at(static_cast<std::size_t>(e)); }
const char* to_string(CyclePath p) { return kPathNames.at(static_cast<std::size_t>(p)); }
const char* to_string(Outcome o) { return kOutcomeNames.at(static_cast<std::size_t>(o)); }
Stage parse_stage(const std::string& text) { return parse_enum<Stage>(text, kStageNames, "stage"); }
Variant parse_variant(const std::string& text) { return parse_enum<Variant>(text, kVariantNames, "variant"); }
Event parse_event(const std::string& text) { return parse_enum<Event>(text, kEventNames, "event"); }

// ---------------------------------------------------------------- transitions

namespace {

using S = Stage;
using V = Variant;
using E = Event;

struct Row {
  StageStep from;
  Event event;
  StageStep to;
};

const std::vector<Row>& table() {
  static const std::vector<Row> rows{
      {{S::InflatingApproaching, V::Normal}, E::Aligned, {S::Swallowing, V::Normal}},
      {{S::InflatingApproaching, V::Normal}, E::OffsetExceedsTolerance, {S::Compensation, V::Normal}},
      {{S::Compensation, V::Normal}, E::Compensated, {S::Swallowing, V::Normal}},
      {{S::Swallowing, V::Normal}, E::Swallowed, {S::Deflating, V::Normal}},
      {{S::Deflating, V::Normal}, E::GraspConfirmed, {S::SnapOff, V::Normal}},
      // Abort skips snap-off and placing; the re-inflation is part of the
      // fault-response duration.
      {{S::Deflating, V::Normal}, E::GraspAbort, {S::Descending, V::AbortReturn}},
      {{S::Deflating, V::EmptyGraspResponse}, E::GraspAbort, {S::Descending, V::AbortReturn}},
      {{S::Deflating, V::MisgraspResponse}, E::GraspAbort, {S::Descending, V::AbortReturn}},
      {{S::SnapOff, V::Normal}, E::SnapCompleted, {S::Descending, V::Normal}},
      {{S::SnapOff, V::Normal}, E::TwoConsecutiveSlipping, {S::SnapOff, V::SlippingRecovery}},
      {{S::SnapOff, V::Normal}, E::TwoConsecutiveSlipped, {S::Descending, V::AbortReturn}},
      {{S::SnapOff, V::SlippedAbort}, E::TwoConsecutiveSlipped, {S::Descending, V::AbortReturn}},
      {{S::SnapOff, V::SlippingRecovery}, E::SnapCompleted, {S::Descending, V::Normal}},
      {{S::SnapOff, V::SlippingRecovery}, E::TwoConsecutiveSlipped, {S::Descending, V::AbortReturn}},
      {{S::Descending, V::Normal}, E::Descended, {S::Placing, V::Normal}},
      {{S::Descending, V::AbortReturn}, E::Descended, {S::Homing, V::Normal}},
      {{S::Placing, V::Normal}, E::Done, {S::Homing, V::Normal}},
  };
  return rows;
}

}  // namespace

StageStep next_transition(StageStep current, Event event) {
  for (const auto& row : table())
    if (row.from == current && row.event == event) return row.to;
  throw ProtocolError(fmt::format("no transition from {}({}) on {}", to_string(current.stage),
                                  to_string(current.variant), to_string(event)));
}

std::vector<std::pair<StageStep, Event>> defined_transitions() {
  std::vector<std::pair<StageStep, Event>> out;
  for (const auto& row : table()) out.emplace_back(row.from, row.event);
  return out;
}

// ---------------------------------------------------------------- timing

StageTiming StageTiming::deployed_defaults() {
  StageTiming t;
  t.base = {
      {{S::InflatingApproaching, V::Normal}, {1.25, 0.01}},
      {{S::Compensation, V::Normal}, {0.71, 0.07}},
      {{S::Swallowing, V::Normal}, {0.73, 0.00}},
      {{S::Deflating, V::Normal}, {0.99, 0.00}},
      {{S::Deflating, V::EmptyGraspResponse}, {0.42, 0.04}},
      {{S::Deflating, V::MisgraspResponse}, {0.39, 0.03}},
      {{S::SnapOff, V::Normal}, {1.03, 0.00}},
      {{S::SnapOff, V::SlippingRecovery}, {1.81, 0.07}},
      {{S::SnapOff, V::SlippedAbort}, {1.44, 0.07}},
      {{S::Descending, V::Normal}, {0.98, 0.08}},
      {{S::Descending, V::AbortReturn}, {0.98, 0.08}},
      {{S::Placing, V::Normal}, {4.36, 0.01}},
      {{S::Homing, V::Normal}, {1.88, 0.00}},
  };
  return t;
}

const sim::NormalDist& StageTiming::lookup(StageStep step, CyclePath path) const {
  if (const auto p = overrides.find(path); p != overrides.end())
    if (const auto it = p->second.find(step); it != p->second.end()) return it->second;
  if (const auto it = base.find(step); it != base.end()) return it->second;
  throw ValidationError(
      fmt::format("no timing entry for {}({})", to_string(step.stage), to_string(step.variant)));
}

void StageTiming::validate() const {
  const auto check = [](const std::map<StageStep, sim::NormalDist>& m) {
    for (const auto& [step, d] : m)
      if (!(d.mean > 0.0) || !(d.std >= 0.0) || !std::isfinite(d.mean) || !std::isfinite(d.std))
        throw ValidationError(fmt::format("timing {}({}): mean must be > 0 and std >= 0", to_string(step.stage),
                                          to_string(step.variant)));
  };
  check(base);
  for (const auto& [path, m] : overrides) check(m);
}

double sample_stage_duration(const StageTiming& timing, StageStep step, Rng& rng, bool deterministic,
                             CyclePath path) {
  const auto& d = timing.lookup(step, path);
  if (deterministic || d.std == 0.0) return d.mean;
  std::normal_distribution<double> nd(d.mean, d.std);
  // Rejection keeps the draw an exact truncated normal; the cap only
  // matters for pathological means far below the cut.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double x = nd(rng);
    if (x >= kMinStageDuration) return x;
  }
  return kMinStageDuration;
}

// ---------------------------------------------------------------- monitors

namespace {

template <class T>
T wrong_class(T truth, Rng& rng) {
  std::uniform_int_distribution<int> pick(1, 2);
  return static_cast<T>((static_cast<int>(truth) + pick(rng)) % 3);
}

bool flip(double rate, Rng& rng) {
  if (rate <= 0.0) return false;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < rate;
}

}  // namespace

ModelGraspMonitor::ModelGraspMonitor(const grasp::GraspClassifier& model, double min_confidence)
    : model_(model), min_confidence_(min_confidence) {
  if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) throw ValidationError("min_confidence must be in [0, 1]");
}

std::optional<GraspClass> ModelGraspMonitor::classify(const grasp::GripperObservation& obs, GraspClass,
                                                      Rng&) const {
  const auto [cls, confidence] = grasp::classify_grasp(model_, obs);
  if (confidence < min_confidence_) return std::nullopt;
  return cls;
}

OracleGraspMonitor::OracleGraspMonitor(double error_rate) : error_rate_(error_rate) {
  if (!(error_rate >= 0.0 && error_rate <= 1.0)) throw ValidationError("grasp error rate must be in [0, 1]");
}

std::optional<GraspClass> OracleGraspMonitor::classify(const grasp::GripperObservation&, GraspClass truth,
                                                       Rng& rng) const {
  return flip(error_rate_, rng) ? wrong_class(truth, rng) : truth;
}

LstmSlipMonitor::LstmSlipMonitor(const slip::SlipModel& model, slip::ClassificationPolicy policy)
    : model_(model), policy_(policy) {
  model_.validate();
}

SlipLabel LstmSlipMonitor::predict(const slip::SlipWindow& window, Rng&) const {
  return slip::classify_slip(slip::lstm_forward(model_, window), policy_);
}

OracleSlipMonitor::OracleSlipMonitor(double error_rate) : error_rate_(error_rate) {
  if (!(error_rate >= 0.0 && error_rate <= 1.0)) throw ValidationError("slip error rate must be in [0, 1]");
}

SlipLabel OracleSlipMonitor::predict(const slip::SlipWindow& window, Rng& rng) const {
  return flip(error_rate_, rng) ? wrong_class(window.label, rng) : window.label;
}

// ---------------------------------------------------------------- episodes

double sum_durations(const HarvestEpisode& episode) {
  double total = 0.0;
  for (const auto& r : episode.records) total += r.duration_s;
  return total;
}

EpisodeTruth sample_truth(const sim::ScenarioConfig& world, Rng& rng) {
  const auto normal = [&](double mean, double std) {
    if (std <= 0.0) return mean;
    return std::normal_distribution<double>(mean, std)(rng);
  };
  EpisodeTruth t;
  t.picking = {normal(world.picking_center.x, world.picking_spread.x),
               normal(world.picking_center.y, world.picking_spread.y),
               normal(world.picking_center.z, world.picking_spread.z)};
  t.injected = {normal(world.error_x.mean, world.error_x.std), normal(world.error_y.mean, world.error_y.std), 0.0};
  t.grasp = static_cast<GraspClass>(sim::sample_category(world.grasp_probs, rng));
  t.slip = static_cast<SlipLabel>(sim::sample_category(world.slip_probs, rng));
  return t;
}

namespace {

// How a record's duration is obtained once the stage sequence is known.
struct PendingDuration {
  enum class Kind { Sample, Fixed, RecoveryRemainder } kind = Kind::Sample;
  double value = 0.0;
};

struct SnapResult {
  SlipAction action = SlipAction::None;
  std::size_t frame = 0;
};

class Driver {
 public:
  Driver(const EpisodeTruth& truth, const sim::ScenarioConfig& world, const Policies& policies,
         std::uint64_t episode_id, Rng& rng)
      : world_(world), policies_(policies), rng_(rng) {
    ep_.episode_id = episode_id;
    ep_.truth = truth;
  }

  HarvestEpisode run(const StageTiming& timing, std::uint64_t timing_seed) {
    approach();
    swallow();
    if (deflate()) snap_off();
    descend_and_finish();
    assign_durations(timing, timing_seed);
    return std::move(ep_);
  }

 private:
  // Appends the completed stage, then advances through the table.
  void complete(StageStep step, Event event, std::string detail, PendingDuration d = {}) {
    if (step != current_)
      throw ProtocolError(fmt::format("driver expected {}({}), table says {}({})", to_string(step.stage),
                                      to_string(step.variant), to_string(current_.stage),
                                      to_string(current_.variant)));
    ep_.records.push_back({step, 0.0, event, std::move(detail)});
    pending_.push_back(d);
    if (step.stage != Stage::Homing) current_ = next_transition(step, event);
  }

  // Stage variants below are resolved from monitor verdicts, so the
  // record's variant can differ from the one the table predicted.
  void resolve_variant(Variant v) { current_.variant = v; }

  void approach() {
    const auto a = sim::simulate_approach(ep_.truth.picking, ep_.truth.injected, world_, policies_.compensation, rng_);
    ep_.approach = a.record;
    ep_.residual_x_mm = a.residual_x_mm;
    ep_.residual_y_mm = a.residual_y_mm;
    const auto& v = a.record.visual_err;
    if (a.record.compensated) {
      ep_.compensated = true;
      complete(current_, Event::OffsetExceedsTolerance, fmt::format("dx={:.3f} dy={:.3f}", v.dx, v.dy));
      const auto& c = *a.record.compensated;
      complete(current_, Event::Compensated,
               fmt::format("target=({:.3f},{:.3f},{:.3f}) residual=({:.3f},{:.3f})", c.x, c.y, c.z, a.residual_x_mm,
                           a.residual_y_mm));
    } else {
      complete(current_, Event::Aligned, fmt::format("dx={:.3f} dy={:.3f}", v.dx, v.dy));
    }
  }

  void swallow() { complete(current_, Event::Swallowed, ""); }

  /// Returns true when the cycle proceeds to snap-off.
  bool deflate() {
    const auto& cfg = policies_.grasp_decision;
    auto state = grasp::initial_grasp_state(cfg);
    GraspAction action = GraspAction::None;
    std::optional<GraspClass> firing;
    const double interval = world_.grasp_frame_interval_s;
    for (std::size_t k = 1; static_cast<double>(k) * interval <= cfg.deadline_s + 1e-9; ++k) {
      const auto obs = sim::gen_grasp_observation(ep_.truth.grasp, world_.grasp_noise, rng_);
      const auto cls = policies_.grasp_monitor->classify(obs, ep_.truth.grasp, rng_);
      ep_.grasp_frames.push_back(cls);
      std::tie(state, action) = grasp::grasp_decision_step(state, cls, cfg);
      if (action != GraspAction::None) {
        firing = cls;
        break;
      }
    }
    std::string how = "verdict";
    if (action == GraspAction::None) {
      action = grasp::grasp_decision_timeout(state, cfg.deadline_s);
      how = "deadline";
    }
    ep_.grasp_action = action;
    const auto detail = fmt::format("frames={} {}={}", ep_.grasp_frames.size(), how, grasp::to_string(action));
    if (action == GraspAction::AbortCycle) {
      resolve_variant(firing == GraspClass::UnripeHeld ? Variant::MisgraspResponse : Variant::EmptyGraspResponse);
      ep_.path = firing == GraspClass::UnripeHeld ? CyclePath::Misgrasp : CyclePath::EmptyGrasp;
      ep_.outcome = Outcome::AbortedEmptyOrMisgrasp;
      complete(current_, Event::GraspAbort, fmt::format("{} class={}", detail, grasp::to_string(*firing)));
      return false;
    }
    complete(current_, Event::GraspConfirmed, detail);
    return true;
  }

  SnapResult watch_snap(SlipLabel outcome, bool recovery) {
    const auto& p = world_.slip;
    auto phases = sim::default_phases(p, outcome);
    // Three trailing frames give every monitored window a look-ahead label.
    (phases.slipped > 0 ? phases.slipped : phases.slipping > 0 ? phases.slipping : phases.normal) += slip::kLookahead;
    const auto traj = sim::gen_slip_trajectory(p, outcome, phases, rng_);
    const auto windows = slip::build_windows(traj.frames, traj.labels);
    slip::StabilityState state;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const std::size_t frame = i + slip::kWindowLength - 1;
      const auto pred = policies_.slip_monitor->predict(windows[i], rng_);
      SlipAction action;
      std::tie(state, action) = slip::time_stability_step(state, pred);
      ep_.slip_decisions.push_back({frame, pred, action, recovery});
      if (action == SlipAction::AbortCycle) return {action, frame};
      // Only one regrasp per cycle; later slipping pairs are ignored.
      if (action == SlipAction::RegraspAndResnap && !recovery) return {action, frame};
    }
    return {};
  }

  void snap_off() {
    const double interval = world_.slip.frame_interval_s;
    const auto first = watch_snap(ep_.truth.slip, false);
    const auto at = [](const SnapResult& r) { return fmt::format("frame={}", r.frame); };
    if (first.action == SlipAction::AbortCycle) {
      resolve_variant(Variant::SlippedAbort);
      ep_.path = CyclePath::Slipped;
      ep_.outcome = Outcome::AbortedSlipped;
      complete(current_, Event::TwoConsecutiveSlipped, at(first) + " action=AbortCycle");
      return;
    }
    if (first.action != SlipAction::RegraspAndResnap) {
      complete(current_, Event::SnapCompleted, "");
      return;
    }
    // The interrupted snap lasts until detection; the recovery record
    // carries the rest of the tabulated recovery response time.
    const double t_detect = static_cast<double>(first.frame + 1) * interval;
    ep_.path = CyclePath::SlippingRecovery;
    complete(current_, Event::TwoConsecutiveSlipping, at(first) + " action=RegraspAndResnap",
             {PendingDuration::Kind::Fixed, t_detect});
    const auto second = watch_snap(SlipLabel::Normal, true);
    const PendingDuration remainder{PendingDuration::Kind::RecoveryRemainder, t_detect};
    if (second.action == SlipAction::AbortCycle) {
      ep_.outcome = Outcome::AbortedSlipped;
      complete(current_, Event::TwoConsecutiveSlipped, at(second) + " action=AbortCycle", remainder);
      return;
    }
    ep_.outcome = Outcome::RecoveredAfterSlip;
    complete(current_, Event::SnapCompleted, "", remainder);
  }

  void descend_and_finish() {
    complete(current_, Event::Descended, "");
    if (current_.stage == Stage::Placing) complete(current_, Event::Done, "");
    complete(current_, Event::Done, "");
  }

  void assign_durations(const StageTiming& timing, std::uint64_t timing_seed) {
    Rng trng(timing_seed);
    const bool det = policies_.deterministic_timing;
    for (std::size_t i = 0; i < ep_.records.size(); ++i) {
      auto& r = ep_.records[i];
      const auto& d = pending_[i];
      switch (d.kind) {
        case PendingDuration::Kind::Sample:
          r.duration_s = sample_stage_duration(timing, r.step, trng, det, ep_.path);
          break;
        case PendingDuration::Kind::Fixed:
          r.duration_s = d.value;
          break;
        case PendingDuration::Kind::RecoveryRemainder:
          r.duration_s =
              std::max(kMinStageDuration, sample_stage_duration(timing, r.step, trng, det, ep_.path) - d.value);
          break;
      }
    }
    ep_.total_s = sum_durations(ep_);
  }

  const sim::ScenarioConfig& world_;
  const Policies& policies_;
  Rng& rng_;
  HarvestEpisode ep_;
  StageStep current_{};
  std::vector<PendingDuration> pending_;
};

}  // namespace

HarvestEpisode run_episode(const EpisodeTruth& truth, const sim::ScenarioConfig& world, const StageTiming& timing,
                           const Policies& policies, std::uint64_t episode_id, Rng& rng) {
  if (!policies.grasp_monitor || !policies.slip_monitor) throw ValidationError("run_episode needs both monitors");
  const std::uint64_t timing_seed = rng();
  return Driver(truth, world, policies, episode_id, rng).run(timing, timing_seed);
}

std::vector<HarvestEpisode> simulate(const sim::ScenarioConfig& world, const StageTiming& timing,
                                     const Policies& policies, std::uint64_t seed, std::size_t episodes) {
  world.validate();
  timing.validate();
  policies.compensation.validate();
  std::vector<HarvestEpisode> out;
  out.reserve(episodes);
  for (std::size_t i = 0; i < episodes; ++i) {
    Rng rng = derive_rng(seed, i);
    const auto truth = sample_truth(world, rng);
    out.push_back(run_episode(truth, world, timing, policies, i, rng));
  }
  return out;
}

// ---------------------------------------------------------------- log

std::vector<LogRecord> log_records(const HarvestEpisode& episode) {
  std::vector<LogRecord> out;
  for (std::size_t i = 0; i < episode.records.size(); ++i) {
    const auto& r = episode.records[i];
    out.push_back({episode.episode_id, i, to_string(r.step.stage), to_string(r.step.variant), r.duration_s,
                   to_string(r.event), r.detail});
  }
  return out;
}

std::string format_log(const std::vector<HarvestEpisode>& episodes) {
  std::string out;
  for (const auto& ep : episodes)
    for (const auto& r : log_records(ep)) {
      nlohmann::ordered_json j;
      j["episode_id"] = r.episode_id;
      j["seq"] = r.seq;
      j["stage"] = r.stage;
      j["variant"] = r.variant;
      j["duration_s"] = r.duration_s;
      j["event"] = r.event;
      j["detail"] = r.detail;
      out += j.dump();
      out += '\n';
    }
  return out;
}

std::vector<LogRecord> parse_log(const std::string& text) {
  std::vector<LogRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("episode_id").get<std::uint64_t>(), j.at("seq").get<std::uint64_t>(),
                     j.at("stage").get<std::string>(), j.at("variant").get<std::string>(),
                     j.at("duration_s").get<double>(), j.at("event").get<std::string>(),
                     j.at("detail").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("episode log line {}: {}", n, e.what()));
    }
  }
  return out;
}

// ---------------------------------------------------------------- config

std::string timing_key(StageStep step) {
  static const std::map<StageStep, std::string> keys{
      {{S::InflatingApproaching, V::Normal}, "inflating_approaching"},
      {{S::Compensation, V::Normal}, "compensation"},
      {{S::Swallowing, V::Normal}, "swallowing"},
      {{S::Deflating, V::Normal}, "deflating"},
      {{S::Deflating, V::EmptyGraspResponse}, "deflating_empty_grasp"},
      {{S::Deflating, V::MisgraspResponse}, "deflating_misgrasp"},
      {{S::SnapOff, V::Normal}, "snap_off"},
      {{S::SnapOff, V::SlippingRecovery}, "snap_off_slipping_recovery"},
      {{S::SnapOff, V::SlippedAbort}, "snap_off_slipped_abort"},
      {{S::Descending, V::Normal}, "descending"},
      {{S::Descending, V::AbortReturn}, "descending_abort_return"},
      {{S::Placing, V::Normal}, "placing"},
      {{S::Homing, V::Normal}, "homing"},
  };
  const auto it = keys.find(step);
  if (it == keys.end())
    throw ValidationError(fmt::format("no timing key for {}({})", to_string(step.stage), to_string(step.variant)));
  return it->second;
}

SimulationConfig parse_simulation_config(const std::string& text) {
  SimulationConfig c;
  c.scenario = sim::parse_config(text);
  const auto tree = ini::parse(text);
  ini::Reader r(tree);

  std::string mode = geometry::to_string(c.compensation.mode);
  r.get("compensation", "threshold_mm", c.compensation.threshold_mm);
  r.get("compensation", "k_x", c.compensation.k_x);
  r.get("compensation", "k_y", c.compensation.k_y);
  r.get_string("compensation", "mode", mode);
  c.compensation.mode = geometry::parse_mode(mode);
  c.compensation.validate();

  auto& m = c.monitors;
  std::string policy = "argmax";
  r.get("monitors", "grasp_error_rate", m.grasp_error_rate);
  r.get("monitors", "slip_error_rate", m.slip_error_rate);
  r.get("monitors", "grasp_min_confidence", m.grasp_min_confidence);
  r.get("monitors", "grasp_pool_fault_classes", c.grasp_decision.pool_fault_classes);
  r.get("monitors", "grasp_deadline_s", c.grasp_decision.deadline_s);
  r.get_string("monitors", "slip_policy", policy);
  r.get("monitors", "slip_min_threshold", m.slip_policy.min_threshold);
  r.get("monitors", "slip_max_threshold", m.slip_policy.max_threshold);
  if (policy == "thresholds") {
    m.slip_policy = slip::ClassificationPolicy::thresholds(m.slip_policy.min_threshold, m.slip_policy.max_threshold);
  } else if (policy != "argmax") {
    throw ValidationError("config [monitors] slip_policy must be 'argmax' or 'thresholds'");
  }
  for (double rate : {m.grasp_error_rate, m.slip_error_rate, m.grasp_min_confidence})
    if (!(rate >= 0.0 && rate <= 1.0)) throw ValidationError("config [monitors] rates must be in [0, 1]");
  if (!(c.grasp_decision.deadline_s > 0.0)) throw ValidationError("config [monitors] grasp_deadline_s must be > 0");

  std::set<std::string> known{"scenario", "positional", "grasp", "slip", "ripeness", "compensation", "monitors",
                              "timing"};
  const auto base = c.timing.base;
  for (const auto& [step, dist] : base) {
    const auto key = timing_key(step);
    r.get("timing", key + "_mean", c.timing.base[step].mean);
    r.get("timing", key + "_std", c.timing.base[step].std);
  }
  for (std::size_t p = 0; p < kPathNames.size(); ++p) {
    const std::string section = std::string("timing.") + kPathNames[p];
    known.insert(section);
    if (!r.has_section(section)) continue;
    for (const auto& [step, dist] : c.timing.base) {
      const auto key = timing_key(step);
      if (!r.has(section, key + "_mean") && !r.has(section, key + "_std")) continue;
      auto entry = dist;
      r.get(section, key + "_mean", entry.mean);
      r.get(section, key + "_std", entry.std);
      c.timing.overrides[static_cast<CyclePath>(p)][step] = entry;
    }
  }
  r.reject_unknown_sections(known);
  // Scenario sections were already checked by sim::parse_config.
  for (const char* s : {"scenario", "positional", "grasp", "slip", "ripeness"}) known.erase(s);
  r.reject_unknown_keys(known);
  c.timing.validate();
  return c;
}

SimulationConfig load_simulation_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_simulation_config(buf.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace harvest_guard::fsm
