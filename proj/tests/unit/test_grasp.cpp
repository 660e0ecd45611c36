#include <doctest.h>

#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "harvest_guard/errors.hpp"
#include "harvest_guard/grasp.hpp"

using namespace harvest_guard;
using namespace harvest_guard::grasp;

namespace {

std::vector<LabeledObservation> synthetic(std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 0.15);
  std::vector<LabeledObservation> out;
  for (std::size_t i = 0; i < per_class; ++i) {
    out.push_back({{0.75 + u(rng), 0.05 + u(rng), 0.3 + u(rng), true}, GraspClass::RipeHeld});
    out.push_back({{u(rng) * 0.3, u(rng) * 0.3, 0.0, false}, GraspClass::Empty});
    out.push_back({{0.05 + u(rng), 0.7 + u(rng), 0.25 + u(rng), true}, GraspClass::UnripeHeld});
  }
  return out;
}

enum class Family { Ok, Fault, None };

// Pairwise scan over verdict families; inconclusive frames never pair.
std::vector<GraspAction> oracle(const std::vector<std::optional<GraspClass>>& s, bool pooled) {
  auto key = [&](const std::optional<GraspClass>& c) -> int {
    if (!c) return -1;
    if (*c == GraspClass::RipeHeld) return 0;
    return pooled ? 1 : 1 + static_cast<int>(*c);
  };
  std::vector<GraspAction> out(s.size(), GraspAction::None);
  std::size_t i = 0;
  while (i + 1 < s.size()) {
    if (key(s[i]) >= 0 && key(s[i]) == key(s[i + 1])) {
      out[i + 1] = key(s[i]) == 0 ? GraspAction::Proceed : GraspAction::AbortCycle;
      i += 2;
    } else {
      i += 1;
    }
  }
  return out;
}

std::vector<GraspAction> run(const std::vector<std::optional<GraspClass>>& s, const GraspDecisionConfig& cfg) {
  auto st = initial_grasp_state(cfg);
  std::vector<GraspAction> out;
  for (const auto& c : s) {
    auto [next, a] = grasp_decision_step(st, c, cfg);
    st = next;
    out.push_back(a);
  }
  return out;
}

}  // namespace

TEST_CASE("observation validation") {
  CHECK_NOTHROW(validate({0.8, 0.1, 0.3, true}));
  CHECK_THROWS_AS(validate({1.2, 0.1, 0.3, true}), ValidationError);
  CHECK_THROWS_AS(validate({0.8, -0.1, 0.3, true}), ValidationError);
  CHECK_THROWS_AS(validate({0.1, 0.1, 0.0, true}), ValidationError);
  CHECK(class_from_int(2) == GraspClass::UnripeHeld);
  CHECK_THROWS_AS(class_from_int(3), ValidationError);
}

TEST_CASE("unloaded model is rejected") {
  LinearGraspClassifier m;
  CHECK_FALSE(m.loaded());
  CHECK_THROWS_AS(m.scores({0.8, 0.1, 0.3, true}), ValidationError);
}

TEST_CASE("training needs every class and valid hyperparameters") {
  auto data = synthetic(10, 1);
  std::erase_if(data, [](const auto& d) { return d.label == GraspClass::Empty; });
  CHECK_THROWS_AS(train_grasp_classifier(data, {}), ValidationError);
  CHECK_THROWS_AS(train_grasp_classifier(synthetic(3, 1), {0, 0.5, 0}), ValidationError);
  CHECK_THROWS_AS(train_grasp_classifier(synthetic(3, 1), {10, 0.0, 0}), ValidationError);
}

TEST_CASE("trained classifier separates the classes deterministically") {
  const auto data = synthetic(60, 3);
  const auto a = train_grasp_classifier(data, {800, 0.5, 9});
  const auto b = train_grasp_classifier(data, {800, 0.5, 9});
  CHECK(serialize_grasp_model(a) == serialize_grasp_model(b));
  std::size_t correct = 0;
  for (const auto& d : synthetic(30, 4)) {
    const auto [cls, conf] = classify_grasp(a, d.obs);
    correct += cls == d.label;
    CHECK(conf >= 1.0 / 3.0 - 1e-12);
    CHECK(conf <= 1.0);
    const auto s = a.scores(d.obs);
    CHECK(s.probs[0] + s.probs[1] + s.probs[2] == doctest::Approx(1.0));
  }
  CHECK(correct >= 85);
}

TEST_CASE("decision examples") {
  const GraspDecisionConfig cfg;
  using G = GraspClass;
  CHECK(run({G::RipeHeld, G::RipeHeld}, cfg) == std::vector{GraspAction::None, GraspAction::Proceed});
  CHECK(run({G::Empty, G::Empty}, cfg) == std::vector{GraspAction::None, GraspAction::AbortCycle});
  CHECK(run({G::UnripeHeld, G::UnripeHeld}, cfg) == std::vector{GraspAction::None, GraspAction::AbortCycle});
  CHECK(run({G::Empty, G::RipeHeld, G::Empty}, cfg) ==
        std::vector{GraspAction::None, GraspAction::None, GraspAction::None});
  // Pooled: Empty then UnripeHeld is two fault frames.
  CHECK(run({G::Empty, G::UnripeHeld}, cfg)[1] == GraspAction::AbortCycle);
  GraspDecisionConfig same{false, 0.99};
  CHECK(run({G::Empty, G::UnripeHeld}, same)[1] == GraspAction::None);
  CHECK(run({G::Empty, G::UnripeHeld, G::UnripeHeld}, same)[2] == GraspAction::AbortCycle);
  CHECK(run({G::RipeHeld, std::nullopt, G::RipeHeld}, cfg)[2] == GraspAction::None);
}

TEST_CASE("decision logic agrees with a pairwise scan on every length-6 sequence") {
  for (bool pooled : {true, false}) {
    const GraspDecisionConfig cfg{pooled, 0.99};
    for (int code = 0; code < 4096; ++code) {
      std::vector<std::optional<GraspClass>> s;
      int c = code;
      for (int k = 0; k < 6; ++k, c /= 4) {
        if (c % 4 == 3)
          s.push_back(std::nullopt);
        else
          s.push_back(static_cast<GraspClass>(c % 4));
      }
      CAPTURE(code);
      CHECK(run(s, cfg) == oracle(s, pooled));
    }
  }
}

TEST_CASE("no verdict by the deadline fails open") {
  const auto st = initial_grasp_state({true, 0.99});
  CHECK(st.deadline_s == 0.99);
  CHECK(grasp_decision_timeout(st, 0.5) == GraspAction::None);
  CHECK(grasp_decision_timeout(st, 0.99) == GraspAction::Proceed);
  CHECK(grasp_decision_timeout(st, 1.5) == GraspAction::Proceed);
}

TEST_CASE("CSV and model round trip") {
  const auto data = synthetic(5, 2);
  const auto text = format_grasp_csv(data);
  CHECK(text.rfind("red_fraction,green_fraction,fruit_area,fruit_present,label\n", 0) == 0);
  const auto back = parse_grasp_csv(text);
  REQUIRE(back.size() == data.size());
  CHECK(format_grasp_csv(back) == text);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].label == data[i].label);
    CHECK(back[i].obs.fruit_present == data[i].obs.fruit_present);
    CHECK(back[i].obs.red_fraction == doctest::Approx(data[i].obs.red_fraction).epsilon(1e-6));
  }
  CHECK_THROWS_AS(parse_grasp_csv("red_fraction,green_fraction,fruit_area,fruit_present,label\n0.5,0.1,0.2,1,4\n"),
                  ValidationError);
  CHECK_THROWS_AS(read_grasp_csv("/nonexistent/grasp.csv"), IoError);

  const auto m = train_grasp_classifier(synthetic(20, 6), {200, 0.5, 1});
  const auto path = std::filesystem::temp_directory_path() / "hg_test_grasp_model.json";
  save_grasp_model(m, path);
  const auto loaded = load_grasp_model(path);
  std::filesystem::remove(path);
  CHECK(loaded.loaded());
  CHECK(loaded.weights == m.weights);
  CHECK(loaded.bias == m.bias);
  CHECK_THROWS_AS(deserialize_grasp_model("[]"), ValidationError);
  CHECK_THROWS_AS(load_grasp_model("/nonexistent/grasp.json"), IoError);
}
