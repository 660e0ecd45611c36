#pragma once

// Dataset preparation and evaluation shared by the CLI, the tests and the
// Python bindings, so every entry point trains on identical splits.

#include <cstdint>
#include <span>
#include <vector>

#include "harvest_guard/grasp.hpp"
#include "harvest_guard/lstm.hpp"
#include "harvest_guard/metrics.hpp"
#include "harvest_guard/slip_data.hpp"
#include "harvest_guard/slip_policy.hpp"

namespace harvest_guard::pipeline {

struct SlipSplit {
  std::vector<slip::SlipWindow> train;       // oversampled
  std::vector<slip::SlipWindow> validation;  // never oversampled unless oversample_first
};

/// Default: stratified split, then oversample the train part only.
/// `oversample_first` oversamples everything first, then splits, so duplicates
/// can land on both sides.
SlipSplit split_slip_windows(std::span<const slip::SlipWindow> windows, double ratio, std::uint64_t seed,
                             bool oversample_first = false);

struct GraspSplit {
  std::vector<grasp::LabeledObservation> train;
  std::vector<grasp::LabeledObservation> validation;
};
GraspSplit split_grasp_rows(std::span<const grasp::LabeledObservation> rows, double ratio, std::uint64_t seed);

struct Evaluation {
  metrics::ConfusionMatrix confusion{{}};
  std::vector<metrics::ClassMetrics> per_class;
  double macro_f1 = 0.0;
};

Evaluation evaluate_slip(const slip::SlipModel& model, std::span<const slip::SlipWindow> windows,
                         const slip::ClassificationPolicy& policy = {});
Evaluation evaluate_grasp(const grasp::GraspClassifier& model, std::span<const grasp::LabeledObservation> rows);

}  // namespace harvest_guard::pipeline
