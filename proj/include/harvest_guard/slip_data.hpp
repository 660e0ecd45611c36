#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace harvest_guard::slip {

inline constexpr std::size_t kFeatureCount = 7;
inline constexpr std::size_t kWindowLength = 5;
inline constexpr std::size_t kLookahead = 3;
inline constexpr std::size_t kClassCount = 3;

/// Canonical feature order; a model records it and refuses any other.
inline const std::array<std::string, kFeatureCount> kFeatureOrder = {
    "strawberry_area", "gripper_area", "background_area", "w", "h", "x", "y"};

struct FrameFeatures {
  double strawberry_area = 0.0;
  double gripper_area = 0.0;
  double background_area = 1.0;
  double w = 0.0;
  double h = 0.0;
  double x = 0.0;
  double y = 0.0;

  std::array<double, kFeatureCount> as_array() const {
    return {strawberry_area, gripper_area, background_area, w, h, x, y};
  }
  bool operator==(const FrameFeatures&) const = default;
};

/// Throws ValidationError when a component leaves [0,1] or the three areas
/// do not sum to 1 within 0.01.
void validate(const FrameFeatures& f);

// Codes match the SlipData labels; the numeric order is the severity order.
enum class SlipLabel : std::uint8_t { Normal = 0, Slipping = 1, Slipped = 2 };

SlipLabel label_from_int(long long code);
const char* to_string(SlipLabel label);

struct SlipWindow {
  std::array<FrameFeatures, kWindowLength> frames;
  SlipLabel label = SlipLabel::Normal;

  bool operator==(const SlipWindow&) const = default;
};

/// One window per start index i with frames [i, i+5) and label = most severe
/// of labels[i+5, i+8). Yields n - 7 windows for n >= 8, none below that.
std::vector<SlipWindow> build_windows(std::span<const FrameFeatures> frames,
                                      std::span<const SlipLabel> labels);

/// A SlipData file grouped by episode, rows ordered by frame id.
struct SlipEpisode {
  std::int64_t episode_id = 0;
  std::vector<FrameFeatures> frames;
  std::vector<SlipLabel> labels;
};

std::vector<SlipEpisode> read_slip_csv(const std::filesystem::path& path);
std::vector<SlipEpisode> parse_slip_csv(const std::string& text);
std::string format_slip_csv(std::span<const SlipEpisode> episodes);

/// Windows of every episode, concatenated in episode order.
std::vector<SlipWindow> windows_from_episodes(std::span<const SlipEpisode> episodes);

std::array<std::size_t, kClassCount> class_counts(std::span<const SlipWindow> windows);

}  // namespace harvest_guard::slip
