#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "harvest_guard/lstm.hpp"
#include "harvest_guard/slip_data.hpp"

namespace harvest_guard::slip {

struct ClassificationPolicy {
  enum class Kind { Argmax, Thresholds };
  Kind kind = Kind::Argmax;
  double min_threshold = 0.4;
  double max_threshold = 0.8;

  static ClassificationPolicy argmax() { return {}; }
  /// Throws ValidationError unless 0 < min < max < 1.
  static ClassificationPolicy thresholds(double min, double max);
};

/// Argmax breaks ties toward the more severe class. Thresholds scores
/// s = p_slipping + p_slipped: s < min is Normal, s >= max is Slipped,
/// anything between is Slipping.
SlipLabel classify_slip(const SlipProbabilities& probs, const ClassificationPolicy& policy);

enum class SlipAction : std::uint8_t { None, ContinueSnapOff, RegraspAndResnap, AbortCycle };

const char* to_string(SlipAction action);

struct StabilityState {
  std::optional<SlipLabel> last;
  std::uint32_t count = 0;

  bool operator==(const StabilityState&) const = default;
};

/// Two equal consecutive predictions fire the action for that label and
/// clear the state; the next firing needs a fresh pair.
std::pair<StabilityState, SlipAction> time_stability_step(const StabilityState& state, SlipLabel prediction);

}  // namespace harvest_guard::slip
