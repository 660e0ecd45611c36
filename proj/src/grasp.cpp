#include "harvest_guard/grasp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "harvest_guard/csv.hpp"
#include "harvest_guard/errors.hpp"
#include "harvest_guard/rng.hpp"

namespace harvest_guard::grasp {

GraspClass class_from_int(long long code) {
  if (code < 0 || code > 2) throw ValidationError(fmt::format("grasp label {} not in {{0,1,2}}", code));
  return static_cast<GraspClass>(code);
}

const char* to_string(GraspClass cls) {
  switch (cls) {
    case GraspClass::RipeHeld: return "RipeHeld";
    case GraspClass::Empty: return "Empty";
    case GraspClass::UnripeHeld: return "UnripeHeld";
  }
  return "?";
}

const char* to_string(GraspAction action) {
  switch (action) {
    case GraspAction::None: return "None";
    case GraspAction::Proceed: return "Proceed";
    case GraspAction::AbortCycle: return "AbortCycle";
  }
  return "?";
}

void validate(const GripperObservation& obs) {
  for (double v : {obs.red_fraction, obs.green_fraction, obs.fruit_area})
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(fmt::format("observation value {} outside [0,1]", v));
  if (obs.fruit_area == 0.0 && obs.fruit_present)
    throw ValidationError("fruit_present with zero fruit area");
}

GraspClass GraspScores::predicted() const {
  return static_cast<GraspClass>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double GraspScores::confidence() const { return *std::max_element(probs.begin(), probs.end()); }

namespace {

std::array<double, kGraspClassCount> softmax(const std::array<double, kGraspClassCount>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::array<double, kGraspClassCount> p{};
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) sum += (p[k] = std::exp(z[k] - m));
  for (auto& v : p) v /= sum;
  return p;
}

std::array<double, kGraspClassCount> logits(const LinearGraspClassifier& m, const std::array<double, kGraspFeatureCount>& x) {
  std::array<double, kGraspClassCount> z{};
  for (std::size_t k = 0; k < kGraspClassCount; ++k) {
    z[k] = m.bias[k];
    for (std::size_t j = 0; j < kGraspFeatureCount; ++j) z[k] += m.weights[k][j] * x[j];
  }
  return z;
}

}  // namespace

GraspScores LinearGraspClassifier::scores(const GripperObservation& obs) const {
  if (!loaded_) throw ValidationError("grasp classifier is not loaded");
  validate(obs);
  return {softmax(logits(*this, obs.features()))};
}

std::pair<GraspClass, double> classify_grasp(const GraspClassifier& model, const GripperObservation& obs) {
  const auto s = model.scores(obs);
  return {s.predicted(), s.confidence()};
}

LinearGraspClassifier train_grasp_classifier(std::span<const LabeledObservation> data,
                                             const GraspTrainingHyperparameters& hp) {
  if (hp.epochs == 0 || !(hp.learning_rate > 0.0)) throw ValidationError("grasp training needs epochs > 0 and lr > 0");
  std::array<std::size_t, kGraspClassCount> counts{};
  for (const auto& d : data) {
    validate(d.obs);
    ++counts[static_cast<std::size_t>(d.label)];
  }
  for (std::size_t k = 0; k < kGraspClassCount; ++k)
    if (counts[k] == 0)
      throw ValidationError(fmt::format("grasp training data has no {} samples", to_string(static_cast<GraspClass>(k))));

  LinearGraspClassifier m;
  m.seed = hp.seed;
  m.epochs = hp.epochs;
  m.learning_rate = hp.learning_rate;
  Rng rng(hp.seed);
  std::uniform_real_distribution<double> uni(-0.01, 0.01);
  for (auto& row : m.weights)
    for (auto& w : row) w = uni(rng);

  const double n = static_cast<double>(data.size());
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    std::array<std::array<double, kGraspFeatureCount>, kGraspClassCount> gw{};
    std::array<double, kGraspClassCount> gb{};
    for (const auto& d : data) {
      const auto x = d.obs.features();
      auto p = softmax(logits(m, x));
      p[static_cast<std::size_t>(d.label)] -= 1.0;
      for (std::size_t k = 0; k < kGraspClassCount; ++k) {
        gb[k] += p[k];
        for (std::size_t j = 0; j < kGraspFeatureCount; ++j) gw[k][j] += p[k] * x[j];
      }
    }
    for (std::size_t k = 0; k < kGraspClassCount; ++k) {
      m.bias[k] -= hp.learning_rate * gb[k] / n;
      for (std::size_t j = 0; j < kGraspFeatureCount; ++j) m.weights[k][j] -= hp.learning_rate * gw[k][j] / n;
    }
  }
  m.mark_loaded();
  return m;
}

GraspDecisionState initial_grasp_state(const GraspDecisionConfig& config) {
  GraspDecisionState s;
  s.deadline_s = config.deadline_s;
  return s;
}

std::pair<GraspDecisionState, GraspAction> grasp_decision_step(const GraspDecisionState& state,
                                                               std::optional<GraspClass> cls,
                                                               const GraspDecisionConfig& config) {
  GraspDecisionState next = state;
  if (!cls) {
    next.fault_count = next.ok_count = 0;
    next.last_fault.reset();
    return {next, GraspAction::None};
  }
  if (*cls == GraspClass::RipeHeld) {
    next.fault_count = 0;
    next.last_fault.reset();
    if (++next.ok_count >= 2) {
      next.ok_count = 0;
      return {next, GraspAction::Proceed};
    }
    return {next, GraspAction::None};
  }
  next.ok_count = 0;
  const bool continues = config.pool_fault_classes || !state.last_fault || *state.last_fault == *cls;
  next.fault_count = continues ? state.fault_count + 1 : 1;
  next.last_fault = *cls;
  if (next.fault_count >= 2) {
    next.fault_count = 0;
    next.last_fault.reset();
    return {next, GraspAction::AbortCycle};
  }
  return {next, GraspAction::None};
}

GraspAction grasp_decision_timeout(const GraspDecisionState& state, double elapsed_s) {
  return elapsed_s >= state.deadline_s ? GraspAction::Proceed : GraspAction::None;
}

// ---------------------------------------------------------------- CSV / model files

namespace {

std::vector<LabeledObservation> from_table(const csv::Table& t) {
  const auto c_red = t.column("red_fraction");
  const auto c_green = t.column("green_fraction");
  const auto c_area = t.column("fruit_area");
  const auto c_present = t.column("fruit_present");
  const auto c_label = t.column("label");
  std::vector<LabeledObservation> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& cells = t.rows[r];
    LabeledObservation d;
    d.obs.red_fraction = csv::to_double(cells[c_red], t, r);
    d.obs.green_fraction = csv::to_double(cells[c_green], t, r);
    d.obs.fruit_area = csv::to_double(cells[c_area], t, r);
    const auto present = csv::to_int(cells[c_present], t, r);
    if (present != 0 && present != 1) throw ValidationError(fmt::format("{}: row {}: fruit_present must be 0 or 1", t.source, r + 1));
    d.obs.fruit_present = present == 1;
    d.label = class_from_int(csv::to_int(cells[c_label], t, r));
    try {
      validate(d.obs);
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}: row {}: {}", t.source, r + 1, e.what()));
    }
    out.push_back(d);
  }
  return out;
}

constexpr const char* kGraspFormat = "harvest_guard.grasp_model";

}  // namespace

std::vector<LabeledObservation> read_grasp_csv(const std::filesystem::path& path) {
  return from_table(csv::read_file(path));
}

std::vector<LabeledObservation> parse_grasp_csv(const std::string& text) {
  return from_table(csv::parse(text, "<grasp>"));
}

std::string format_grasp_csv(std::span<const LabeledObservation> data) {
  std::string out = "red_fraction,green_fraction,fruit_area,fruit_present,label\n";
  for (const auto& d : data)
    out += fmt::format("{:.6f},{:.6f},{:.6f},{},{}\n", d.obs.red_fraction, d.obs.green_fraction, d.obs.fruit_area,
                       d.obs.fruit_present ? 1 : 0, static_cast<int>(d.label));
  return out;
}

std::string serialize_grasp_model(const LinearGraspClassifier& model) {
  if (!model.loaded()) throw ValidationError("cannot save an unloaded grasp classifier");
  nlohmann::ordered_json j;
  j["format"] = kGraspFormat;
  j["version"] = 1;
  j["feature_order"] = {"red_fraction", "green_fraction", "fruit_area", "fruit_present"};
  j["training"] = {{"seed", model.seed}, {"epochs", model.epochs}, {"learning_rate", model.learning_rate}};
  std::vector<double> w;
  for (const auto& row : model.weights) w.insert(w.end(), row.begin(), row.end());
  j["tensors"] = nlohmann::ordered_json::array(
      {{{"name", "linear.weight"}, {"shape", {kGraspClassCount, kGraspFeatureCount}}, {"order", "row-major"}, {"data", w}},
       {{"name", "linear.bias"}, {"shape", {kGraspClassCount, 1}}, {"order", "row-major"}, {"data", model.bias}}});
  return j.dump(1) + "\n";
}

LinearGraspClassifier deserialize_grasp_model(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != kGraspFormat) throw ValidationError("not a grasp model file");
    const auto order = j.at("feature_order").get<std::vector<std::string>>();
    if (order != std::vector<std::string>{"red_fraction", "green_fraction", "fruit_area", "fruit_present"})
      throw ValidationError("grasp model feature order mismatch");
    LinearGraspClassifier m;
    m.seed = j.at("training").at("seed");
    m.epochs = j.at("training").at("epochs");
    m.learning_rate = j.at("training").at("learning_rate");
    const auto w = j.at("tensors").at(0).at("data").get<std::vector<double>>();
    const auto b = j.at("tensors").at(1).at("data").get<std::vector<double>>();
    if (w.size() != kGraspClassCount * kGraspFeatureCount || b.size() != kGraspClassCount)
      throw ValidationError("grasp model tensor sizes are wrong");
    for (std::size_t k = 0; k < kGraspClassCount; ++k) {
      m.bias[k] = b[k];
      for (std::size_t f = 0; f < kGraspFeatureCount; ++f) m.weights[k][f] = w[k * kGraspFeatureCount + f];
    }
    m.mark_loaded();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed grasp model: ") + e.what());
  }
}

void save_grasp_model(const LinearGraspClassifier& model, const std::filesystem::path& path) {
  csv::write_text(path, serialize_grasp_model(model));
}

LinearGraspClassifier load_grasp_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize_grasp_model(buf.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace harvest_guard::grasp
