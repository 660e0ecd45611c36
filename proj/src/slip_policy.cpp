#include "harvest_guard/slip_policy.hpp"

#include <cmath>
#include <fmt/format.h>

#include "harvest_guard/errors.hpp"

namespace harvest_guard::slip {

ClassificationPolicy ClassificationPolicy::thresholds(double min, double max) {
  if (!(min > 0.0 && min < max && max < 1.0))
    throw ValidationError(fmt::format("slip thresholds need 0 < min < max < 1, got min={} max={}", min, max));
  return {Kind::Thresholds, min, max};
}

SlipLabel classify_slip(const SlipProbabilities& probs, const ClassificationPolicy& policy) {
  if (policy.kind == ClassificationPolicy::Kind::Thresholds) {
    if (!(policy.min_threshold > 0.0 && policy.min_threshold < policy.max_threshold && policy.max_threshold < 1.0))
      throw ValidationError("invalid slip thresholds");
    const double score = probs.p_slipping + probs.p_slipped;
    if (score < policy.min_threshold) return SlipLabel::Normal;
    if (score >= policy.max_threshold) return SlipLabel::Slipped;
    return SlipLabel::Slipping;
  }
  std::size_t best = 2;
  for (std::size_t k = 2; k-- > 0;)
    if (probs[k] > probs[best]) best = k;
  return static_cast<SlipLabel>(best);
}

const char* to_string(SlipAction action) {
  switch (action) {
    case SlipAction::None: return "None";
    case SlipAction::ContinueSnapOff: return "ContinueSnapOff";
    case SlipAction::RegraspAndResnap: return "RegraspAndResnap";
    case SlipAction::AbortCycle: return "AbortCycle";
  }
  return "?";
}

std::pair<StabilityState, SlipAction> time_stability_step(const StabilityState& state, SlipLabel prediction) {
  StabilityState next;
  next.last = prediction;
  next.count = (state.last && *state.last == prediction) ? state.count + 1 : 1;
  if (next.count < 2) return {next, SlipAction::None};
  switch (prediction) {
    case SlipLabel::Slipped: return {StabilityState{}, SlipAction::AbortCycle};
    case SlipLabel::Slipping: return {StabilityState{}, SlipAction::RegraspAndResnap};
    case SlipLabel::Normal: return {StabilityState{}, SlipAction::ContinueSnapOff};
  }
  return {StabilityState{}, SlipAction::None};
}

}  // namespace harvest_guard::slip
