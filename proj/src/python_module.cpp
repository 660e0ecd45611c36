// Python bindings: thin wrappers over the C++ core for scripting and
// notebooks. Library errors map to ValueError / OSError / RuntimeError.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "harvest_guard/errors.hpp"
#include "harvest_guard/fsm.hpp"
#include "harvest_guard/geometry.hpp"
#include "harvest_guard/grasp.hpp"
#include "harvest_guard/lstm.hpp"
#include "harvest_guard/metrics.hpp"
#include "harvest_guard/sampling.hpp"
#include "harvest_guard/sim.hpp"
#include "harvest_guard/slip_policy.hpp"

namespace py = pybind11;
namespace hg = harvest_guard;
using namespace pybind11::literals;

namespace {

hg::geometry::ArmPoint3 point(const std::array<double, 3>& p) { return {p[0], p[1], p[2]}; }

py::dict compensate(const std::array<double, 3>& picking, const std::array<double, 3>& effector, double threshold_mm,
                    double k_x, double k_y, const std::string& mode) {
  const hg::geometry::CompensationParams params{threshold_mm, k_x, k_y, hg::geometry::parse_mode(mode)};
  params.validate();
  const auto rec = hg::geometry::compensate(point(picking), point(effector), params);
  py::object comp = py::none();
  if (rec.compensated) comp = py::make_tuple(rec.compensated->x, rec.compensated->y, rec.compensated->z);
  return py::dict("dx"_a = rec.visual_err.dx, "dy"_a = rec.visual_err.dy, "dz"_a = rec.visual_err.dz, "compensated"_a = comp);
}

std::vector<std::string> stability_actions(const std::vector<int>& labels) {
  hg::slip::StabilityState st;
  std::vector<std::string> out;
  for (int l : labels) {
    auto [next, a] = hg::slip::time_stability_step(st, hg::slip::label_from_int(l));
    st = next;
    out.emplace_back(hg::slip::to_string(a));
  }
  return out;
}

std::vector<std::string> grasp_actions(const std::vector<std::optional<int>>& classes, bool pool_fault_classes) {
  const hg::grasp::GraspDecisionConfig cfg{pool_fault_classes, 0.99};
  auto st = hg::grasp::initial_grasp_state(cfg);
  std::vector<std::string> out;
  for (const auto& c : classes) {
    std::optional<hg::grasp::GraspClass> cls;
    if (c) cls = hg::grasp::class_from_int(*c);
    auto [next, a] = hg::grasp::grasp_decision_step(st, cls, cfg);
    st = next;
    out.emplace_back(hg::grasp::to_string(a));
  }
  return out;
}

// Windows arrive as a float array of shape (n, 5, 7).
py::array_t<double> slip_predict(const hg::slip::SlipModel& model,
                                 py::array_t<double, py::array::c_style | py::array::forcecast> windows) {
  if (windows.ndim() != 3 || windows.shape(1) != static_cast<py::ssize_t>(hg::slip::kWindowLength) ||
      windows.shape(2) != static_cast<py::ssize_t>(hg::slip::kFeatureCount))
    throw hg::ValidationError("windows must have shape (n, 5, 7)");
  const auto n = static_cast<std::size_t>(windows.shape(0));
  const auto r = windows.unchecked<3>();
  std::vector<hg::slip::SlipWindow> ws(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < hg::slip::kWindowLength; ++t) {
      const auto a = static_cast<py::ssize_t>(i), b = static_cast<py::ssize_t>(t);
      ws[i].frames[t] = {r(a, b, 0), r(a, b, 1), r(a, b, 2), r(a, b, 3), r(a, b, 4), r(a, b, 5), r(a, b, 6)};
    }
  std::vector<hg::slip::SlipProbabilities> probs;
  {
    py::gil_scoped_release release;
    probs = hg::slip::lstm_predict(model, ws);
  }
  py::array_t<double> out({static_cast<py::ssize_t>(n), py::ssize_t{3}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < 3; ++k) w(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(k)) = probs[i][k];
  return out;
}

py::list simulate(const std::optional<std::filesystem::path>& config, std::uint64_t seed,
                  std::optional<std::size_t> episodes, bool deterministic) {
  const auto cfg = config ? hg::fsm::load_simulation_config(*config) : hg::fsm::SimulationConfig{};
  const hg::fsm::OracleGraspMonitor gm(cfg.monitors.grasp_error_rate);
  const hg::fsm::OracleSlipMonitor sm(cfg.monitors.slip_error_rate);
  hg::fsm::Policies p;
  p.compensation = cfg.compensation;
  p.grasp_decision = cfg.grasp_decision;
  p.grasp_monitor = &gm;
  p.slip_monitor = &sm;
  p.deterministic_timing = deterministic;
  std::vector<hg::fsm::HarvestEpisode> eps;
  {
    py::gil_scoped_release release;
    eps = hg::fsm::simulate(cfg.scenario, cfg.timing, p, seed, episodes.value_or(cfg.scenario.episodes));
  }
  py::list out;
  for (const auto& e : eps) {
    py::list stages;
    for (const auto& r : e.records)
      stages.append(py::make_tuple(hg::fsm::to_string(r.step.stage), hg::fsm::to_string(r.step.variant),
                                   r.duration_s, hg::fsm::to_string(r.event)));
    out.append(py::dict("episode_id"_a = e.episode_id, "outcome"_a = hg::fsm::to_string(e.outcome),
                        "total_s"_a = e.total_s, "compensated"_a = e.compensated,
                        "residual_x_mm"_a = e.residual_x_mm, "residual_y_mm"_a = e.residual_y_mm,
                        "stages"_a = stages));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_harvest_guard, m) {
  m.doc() = "Strawberry harvesting fault diagnosis and recovery core";

  py::register_exception<hg::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<hg::IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<hg::ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);

  m.def("relative_error",
        [](const std::array<double, 3>& picking, const std::array<double, 3>& effector) {
          const auto e = hg::geometry::relative_error(point(picking), point(effector));
          return py::make_tuple(e.dx, e.dy, e.dz);
        },
        "picking"_a, "effector"_a, "Picking point minus effector position, per axis (mm).");
  m.def("compensate", &compensate, "picking"_a, "effector"_a, "threshold_mm"_a = 10.0, "k_x"_a = 1.0,
        "k_y"_a = 0.5, "mode"_a = "either");

  m.def("stratified_split_counts",
        [](const std::vector<std::size_t>& counts, double ratio) {
          const auto s = hg::sampling::stratified_split_counts(counts, ratio);
          return py::make_tuple(s.train, s.validation);
        },
        "counts"_a, "ratio"_a = 0.7);
  m.def("percent_two_decimals", &hg::metrics::percent_two_decimals, "success"_a, "total"_a);

  m.def("stability_actions", &stability_actions, "labels"_a,
        "Feeds slip predictions (0 normal, 1 slipping, 2 slipped) through the two-in-a-row rule.");
  m.def("grasp_actions", &grasp_actions, "classes"_a, "pool_fault_classes"_a = true,
        "Feeds grasp classes (0 ripe, 1 empty, 2 unripe, None inconclusive) through the decision rule.");

  py::class_<hg::slip::SlipModel>(m, "SlipModel")
      .def_static("load", &hg::slip::load_model, "path"_a)
      .def_static("initialize",
                  [](std::size_t layers, std::size_t hidden, std::uint64_t seed) {
                    hg::slip::SlipArchitecture a;
                    a.layers = layers;
                    a.hidden = hidden;
                    return hg::slip::SlipModel::initialize(a, seed);
                  },
                  "layers"_a = 5, "hidden"_a = 64, "seed"_a = 0)
      .def("save", [](const hg::slip::SlipModel& self, const std::filesystem::path& p) { hg::slip::save_model(self, p); })
      .def("predict", &slip_predict, "windows"_a, "Class probabilities, shape (n, 3).")
      .def_property_readonly("parameter_count", [](hg::slip::SlipModel& self) { return self.params.parameter_count(); });

  m.def("gen_dataset",
        [](const std::string& kind, std::uint64_t seed, const std::filesystem::path& out, double scale) {
          if (kind != "slip" && kind != "grasp") throw hg::ValidationError("kind must be 'slip' or 'grasp'");
          const auto k = kind == "slip" ? hg::sim::DatasetKind::Slip : hg::sim::DatasetKind::Grasp;
          const auto base = k == hg::sim::DatasetKind::Slip ? hg::sim::kReferenceSlipCounts : hg::sim::kReferenceGraspCounts;
          hg::sim::gen_dataset({}, k, {hg::sim::scale_counts(base, scale)}, seed, out);
        },
        "kind"_a, "seed"_a, "out"_a, "scale"_a = 1.0);

  m.def("simulate", &simulate, "config"_a = py::none(), "seed"_a = 0, "episodes"_a = py::none(),
        "deterministic"_a = false, "Runs seeded episodes with oracle monitors; returns one dict per episode.");
}
