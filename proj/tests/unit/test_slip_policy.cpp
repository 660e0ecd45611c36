#include <doctest.h>

#include <vector>

#include "harvest_guard/errors.hpp"
#include "harvest_guard/slip_policy.hpp"

using namespace harvest_guard;
using namespace harvest_guard::slip;

namespace {

SlipAction action_for(SlipLabel l) {
  switch (l) {
    case SlipLabel::Normal: return SlipAction::ContinueSnapOff;
    case SlipLabel::Slipping: return SlipAction::RegraspAndResnap;
    case SlipLabel::Slipped: return SlipAction::AbortCycle;
  }
  return SlipAction::None;
}

// Pairwise scan: an action fires at i+1 whenever s[i] == s[i+1] and s[i]
// was not consumed by an earlier firing.
std::vector<SlipAction> oracle(const std::vector<SlipLabel>& s) {
  std::vector<SlipAction> out(s.size(), SlipAction::None);
  std::size_t i = 0;
  while (i + 1 < s.size()) {
    if (s[i] == s[i + 1]) {
      out[i + 1] = action_for(s[i]);
      i += 2;
    } else {
      i += 1;
    }
  }
  return out;
}

std::vector<SlipAction> run(const std::vector<SlipLabel>& s) {
  StabilityState st;
  std::vector<SlipAction> out;
  for (auto l : s) {
    auto [next, a] = time_stability_step(st, l);
    st = next;
    out.push_back(a);
  }
  return out;
}

}  // namespace

TEST_CASE("argmax classification") {
  const auto p = ClassificationPolicy::argmax();
  CHECK(classify_slip({0.7, 0.2, 0.1}, p) == SlipLabel::Normal);
  CHECK(classify_slip({0.1, 0.6, 0.3}, p) == SlipLabel::Slipping);
  CHECK(classify_slip({0.1, 0.2, 0.7}, p) == SlipLabel::Slipped);
  // Ties go to the more severe class.
  CHECK(classify_slip({0.4, 0.4, 0.2}, p) == SlipLabel::Slipping);
  CHECK(classify_slip({0.2, 0.4, 0.4}, p) == SlipLabel::Slipped);
  CHECK(classify_slip({1.0 / 3, 1.0 / 3, 1.0 / 3}, p) == SlipLabel::Slipped);
}

TEST_CASE("threshold classification") {
  const auto p = ClassificationPolicy::thresholds(0.4, 0.8);
  CHECK(classify_slip({0.7, 0.2, 0.1}, p) == SlipLabel::Normal);
  CHECK(classify_slip({0.5, 0.3, 0.2}, p) == SlipLabel::Slipping);
  CHECK(classify_slip({0.1, 0.5, 0.4}, p) == SlipLabel::Slipped);
  CHECK(classify_slip({0.6, 0.2, 0.2}, p) == SlipLabel::Slipping);  // s == min
  CHECK(classify_slip({0.2, 0.4, 0.4}, p) == SlipLabel::Slipped);   // s == max
  CHECK_THROWS_AS(ClassificationPolicy::thresholds(0.8, 0.4), ValidationError);
  CHECK_THROWS_AS(ClassificationPolicy::thresholds(0.0, 0.4), ValidationError);
  CHECK_THROWS_AS(ClassificationPolicy::thresholds(0.4, 1.0), ValidationError);
  CHECK_THROWS_AS(ClassificationPolicy::thresholds(0.5, 0.5), ValidationError);
}

TEST_CASE("time stability examples") {
  using L = SlipLabel;
  CHECK(run({L::Slipping, L::Slipping}) == std::vector{SlipAction::None, SlipAction::RegraspAndResnap});
  CHECK(run({L::Slipping, L::Normal, L::Slipping}) ==
        std::vector{SlipAction::None, SlipAction::None, SlipAction::None});
  CHECK(run({L::Slipped, L::Slipped}) == std::vector{SlipAction::None, SlipAction::AbortCycle});
  CHECK(run({L::Normal, L::Normal}) == std::vector{SlipAction::None, SlipAction::ContinueSnapOff});
  // After firing the next action needs a fresh pair.
  CHECK(run({L::Slipping, L::Slipping, L::Slipping}) ==
        std::vector{SlipAction::None, SlipAction::RegraspAndResnap, SlipAction::None});
  auto [st, a] = time_stability_step({}, L::Slipped);
  CHECK(a == SlipAction::None);
  CHECK(st.count == 1);
  CHECK(st.last == L::Slipped);
  auto [st2, a2] = time_stability_step(st, L::Slipped);
  CHECK(a2 == SlipAction::AbortCycle);
  CHECK(st2 == StabilityState{});
}

TEST_CASE("time stability agrees with a pairwise scan on every length-6 sequence") {
  std::size_t checked = 0;
  for (int code = 0; code < 729; ++code) {
    std::vector<SlipLabel> s;
    int c = code;
    for (int k = 0; k < 6; ++k, c /= 3) s.push_back(static_cast<SlipLabel>(c % 3));
    const auto got = run(s);
    CHECK(got == oracle(s));
    // No action without two equal consecutive predictions.
    for (std::size_t i = 0; i < s.size(); ++i)
      if (got[i] != SlipAction::None) CHECK((i > 0 && s[i - 1] == s[i]));
    ++checked;
  }
  CHECK(checked == 729);
}

TEST_CASE("action names") {
  CHECK(std::string(to_string(SlipAction::RegraspAndResnap)) == "RegraspAndResnap");
  CHECK(std::string(to_string(SlipAction::AbortCycle)) == "AbortCycle");
}
