#include "harvest_guard/pipeline.hpp"

#include "harvest_guard/errors.hpp"
#include "harvest_guard/rng.hpp"
#include "harvest_guard/sampling.hpp"

namespace harvest_guard::pipeline {

namespace {

// Fixed sub-streams of the user seed, one per random step.
constexpr std::uint64_t kSplitStream = 101;
constexpr std::uint64_t kOversampleStream = 102;

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) { return derive_rng(seed, stream)(); }

}  // namespace

SlipSplit split_slip_windows(std::span<const slip::SlipWindow> windows, double ratio, std::uint64_t seed,
                             bool oversample_first) {
  if (windows.empty()) throw ValidationError("no slip windows to split");
  const auto label = [](const slip::SlipWindow& w) { return w.label; };
  SlipSplit out;
  if (oversample_first) {
    const auto all = sampling::oversample(windows, label, sub_seed(seed, kOversampleStream));
    std::tie(out.train, out.validation) =
        sampling::stratified_split<slip::SlipWindow>(all, label, ratio, sub_seed(seed, kSplitStream));
    return out;
  }
  auto [train, validation] = sampling::stratified_split(windows, label, ratio, sub_seed(seed, kSplitStream));
  out.train = sampling::oversample<slip::SlipWindow>(train, label, sub_seed(seed, kOversampleStream));
  out.validation = std::move(validation);
  return out;
}

GraspSplit split_grasp_rows(std::span<const grasp::LabeledObservation> rows, double ratio, std::uint64_t seed) {
  if (rows.empty()) throw ValidationError("no grasp rows to split");
  GraspSplit out;
  std::tie(out.train, out.validation) = sampling::stratified_split(
      rows, [](const grasp::LabeledObservation& r) { return r.label; }, ratio, sub_seed(seed, kSplitStream));
  return out;
}

namespace {

Evaluation finish(metrics::ConfusionMatrix cm) {
  Evaluation e;
  e.per_class = metrics::confusion_metrics(cm);
  e.macro_f1 = metrics::macro_f1(e.per_class);
  e.confusion = std::move(cm);
  return e;
}

}  // namespace

Evaluation evaluate_slip(const slip::SlipModel& model, std::span<const slip::SlipWindow> windows,
                         const slip::ClassificationPolicy& policy) {
  if (windows.empty()) throw ValidationError("no slip windows to evaluate");
  metrics::ConfusionMatrix cm({"Normal", "Slipping", "Slipped"});
  const auto probs = slip::lstm_predict(model, windows);
  for (std::size_t i = 0; i < windows.size(); ++i)
    cm.add(static_cast<std::size_t>(windows[i].label),
           static_cast<std::size_t>(slip::classify_slip(probs[i], policy)));
  return finish(std::move(cm));
}

Evaluation evaluate_grasp(const grasp::GraspClassifier& model, std::span<const grasp::LabeledObservation> rows) {
  if (rows.empty()) throw ValidationError("no grasp rows to evaluate");
  metrics::ConfusionMatrix cm({"RipeHeld", "Empty", "UnripeHeld"});
  for (const auto& r : rows)
    cm.add(static_cast<std::size_t>(r.label), static_cast<std::size_t>(grasp::classify_grasp(model, r.obs).first));
  return finish(std::move(cm));
}

}  // namespace harvest_guard::pipeline
