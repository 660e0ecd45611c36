#include "harvest_guard/slip_data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <fmt/format.h>

#include "harvest_guard/csv.hpp"
#include "harvest_guard/errors.hpp"

namespace harvest_guard::slip {

void validate(const FrameFeatures& f) {
  const auto values = f.as_array();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0 && values[i] <= 1.0))
      throw ValidationError(fmt::format("feature {} = {} outside [0,1]", kFeatureOrder[i], values[i]));
  }
  const double sum = f.strawberry_area + f.gripper_area + f.background_area;
  if (std::abs(sum - 1.0) > 0.01)
    throw ValidationError(fmt::format("area fractions sum to {}, expected 1 +/- 0.01", sum));
}

SlipLabel label_from_int(long long code) {
  if (code < 0 || code > 2) throw ValidationError(fmt::format("slip label {} not in {{0,1,2}}", code));
  return static_cast<SlipLabel>(code);
}

const char* to_string(SlipLabel label) {
  switch (label) {
    case SlipLabel::Normal: return "Normal";
    case SlipLabel::Slipping: return "Slipping";
    case SlipLabel::Slipped: return "Slipped";
  }
  return "?";
}

std::vector<SlipWindow> build_windows(std::span<const FrameFeatures> frames,
                                      std::span<const SlipLabel> labels) {
  if (frames.size() != labels.size())
    throw ValidationError(fmt::format("build_windows: {} frames but {} labels", frames.size(), labels.size()));
  std::vector<SlipWindow> out;
  constexpr std::size_t span_needed = kWindowLength + kLookahead;
  if (frames.size() < span_needed) return out;
  out.reserve(frames.size() - span_needed + 1);
  for (std::size_t i = 0; i + span_needed <= frames.size(); ++i) {
    SlipWindow w;
    std::copy_n(frames.begin() + static_cast<std::ptrdiff_t>(i), kWindowLength, w.frames.begin());
    const auto next = labels.subspan(i + kWindowLength, kLookahead);
    w.label = *std::max_element(next.begin(), next.end());
    out.push_back(w);
  }
  return out;
}

namespace {

std::vector<SlipEpisode> episodes_from_table(const csv::Table& t) {
  const std::size_t c_ep = t.column("episode_id");
  const std::size_t c_fr = t.column("frame_id");
  std::array<std::size_t, kFeatureCount> c_feat{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) c_feat[i] = t.column(kFeatureOrder[i]);
  const std::size_t c_label = t.column("label");

  struct Row {
    long long frame;
    FrameFeatures f;
    SlipLabel label;
  };
  std::map<long long, std::vector<Row>> grouped;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& cells = t.rows[r];
    std::array<double, kFeatureCount> v{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) v[i] = csv::to_double(cells[c_feat[i]], t, r);
    FrameFeatures f{v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
    try {
      validate(f);
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}: row {}: {}", t.source, r + 1, e.what()));
    }
    grouped[csv::to_int(cells[c_ep], t, r)].push_back(
        {csv::to_int(cells[c_fr], t, r), f, label_from_int(csv::to_int(cells[c_label], t, r))});
  }

  std::vector<SlipEpisode> out;
  for (auto& [id, rows] : grouped) {
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.frame < b.frame; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].frame != rows[i - 1].frame + 1)
        throw ValidationError(fmt::format("{}: episode {} frames are not consecutive at frame {}",
                                          t.source, id, rows[i].frame));
    }
    SlipEpisode ep;
    ep.episode_id = id;
    for (const auto& row : rows) {
      ep.frames.push_back(row.f);
      ep.labels.push_back(row.label);
    }
    out.push_back(std::move(ep));
  }
  return out;
}

}  // namespace

std::vector<SlipEpisode> read_slip_csv(const std::filesystem::path& path) {
  return episodes_from_table(csv::read_file(path));
}

std::vector<SlipEpisode> parse_slip_csv(const std::string& text) {
  return episodes_from_table(csv::parse(text, "<slip>"));
}

std::string format_slip_csv(std::span<const SlipEpisode> episodes) {
  std::string out = "episode_id,frame_id,strawberry_area,gripper_area,background_area,w,h,x,y,label\n";
  for (const auto& ep : episodes) {
    for (std::size_t i = 0; i < ep.frames.size(); ++i) {
      const auto& f = ep.frames[i];
      out += fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{}\n", ep.episode_id, i,
                         f.strawberry_area, f.gripper_area, f.background_area, f.w, f.h, f.x, f.y,
                         static_cast<int>(ep.labels[i]));
    }
  }
  return out;
}

std::vector<SlipWindow> windows_from_episodes(std::span<const SlipEpisode> episodes) {
  std::vector<SlipWindow> out;
  for (const auto& ep : episodes) {
    auto w = build_windows(ep.frames, ep.labels);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

std::array<std::size_t, kClassCount> class_counts(std::span<const SlipWindow> windows) {
  std::array<std::size_t, kClassCount> counts{};
  for (const auto& w : windows) ++counts[static_cast<std::size_t>(w.label)];
  return counts;
}

}  // namespace harvest_guard::slip
