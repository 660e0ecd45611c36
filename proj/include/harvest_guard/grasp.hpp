#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace harvest_guard::grasp {

enum class GraspClass : std::uint8_t { RipeHeld = 0, Empty = 1, UnripeHeld = 2 };

inline constexpr std::size_t kGraspClassCount = 3;
inline constexpr std::size_t kGraspFeatureCount = 4;

GraspClass class_from_int(long long code);
const char* to_string(GraspClass cls);

/// Summary of one in-gripper camera frame during deflating.
struct GripperObservation {
  double red_fraction = 0.0;
  double green_fraction = 0.0;
  double fruit_area = 0.0;
  bool fruit_present = false;

  std::array<double, kGraspFeatureCount> features() const {
    return {red_fraction, green_fraction, fruit_area, fruit_present ? 1.0 : 0.0};
  }
};

/// Fractions in [0,1]; zero area must come with fruit_present = false.
void validate(const GripperObservation& obs);

struct LabeledObservation {
  GripperObservation obs;
  GraspClass label = GraspClass::RipeHeld;
};

struct GraspScores {
  std::array<double, kGraspClassCount> probs{};
  GraspClass predicted() const;
  double confidence() const;
};

/// Anything that maps an observation to three class probabilities.
class GraspClassifier {
 public:
  virtual ~GraspClassifier() = default;
  virtual GraspScores scores(const GripperObservation& obs) const = 0;
};

/// Softmax over a linear map of the four observation features.
class LinearGraspClassifier final : public GraspClassifier {
 public:
  LinearGraspClassifier() = default;

  bool loaded() const { return loaded_; }
  /// Throws ValidationError when the model is not loaded.
  GraspScores scores(const GripperObservation& obs) const override;

  std::array<std::array<double, kGraspFeatureCount>, kGraspClassCount> weights{};
  std::array<double, kGraspClassCount> bias{};
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double learning_rate = 0.0;

  void mark_loaded() { loaded_ = true; }

 private:
  bool loaded_ = false;
};

std::pair<GraspClass, double> classify_grasp(const GraspClassifier& model, const GripperObservation& obs);

struct GraspTrainingHyperparameters {
  std::size_t epochs = 2000;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
};

/// Full-batch gradient descent on cross-entropy. Every class must be present.
LinearGraspClassifier train_grasp_classifier(std::span<const LabeledObservation> data,
                                             const GraspTrainingHyperparameters& hp);

enum class GraspAction : std::uint8_t { None, Proceed, AbortCycle };
const char* to_string(GraspAction action);

struct GraspDecisionConfig {
  // Empty and UnripeHeld count toward the same run when pooled.
  bool pool_fault_classes = true;
  double deadline_s = 0.99;
};

struct GraspDecisionState {
  std::uint32_t fault_count = 0;
  std::uint32_t ok_count = 0;
  std::optional<GraspClass> last_fault;  // tracked for same-class mode
  double deadline_s = 0.99;
};

GraspDecisionState initial_grasp_state(const GraspDecisionConfig& config);

/// Feeds one classified frame; `std::nullopt` is an inconclusive frame and
/// breaks any run. Two consecutive frames of one verdict family fire.
std::pair<GraspDecisionState, GraspAction> grasp_decision_step(const GraspDecisionState& state,
                                                               std::optional<GraspClass> cls,
                                                               const GraspDecisionConfig& config = {});

/// Deadline check: past the deadline with no verdict the cycle proceeds.
GraspAction grasp_decision_timeout(const GraspDecisionState& state, double elapsed_s);

std::vector<LabeledObservation> read_grasp_csv(const std::filesystem::path& path);
std::vector<LabeledObservation> parse_grasp_csv(const std::string& text);
std::string format_grasp_csv(std::span<const LabeledObservation> data);

void save_grasp_model(const LinearGraspClassifier& model, const std::filesystem::path& path);
LinearGraspClassifier load_grasp_model(const std::filesystem::path& path);
std::string serialize_grasp_model(const LinearGraspClassifier& model);
LinearGraspClassifier deserialize_grasp_model(const std::string& text);

}  // namespace harvest_guard::grasp
