#include "harvest_guard/metrics.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "harvest_guard/csv.hpp"
#include "harvest_guard/errors.hpp"

namespace harvest_guard::metrics {

using fsm::Outcome;

// ---------------------------------------------------------------- classification

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> class_labels)
    : labels(std::move(class_labels)), counts(labels.size(), std::vector<std::uint64_t>(labels.size(), 0)) {}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> class_labels, std::vector<std::vector<std::uint64_t>> cells)
    : labels(std::move(class_labels)), counts(std::move(cells)) {
  if (counts.size() != labels.size()) throw ValidationError("confusion matrix: row count differs from label count");
  for (const auto& row : counts)
    if (row.size() != labels.size()) throw ValidationError("confusion matrix must be square");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t n) {
  if (truth >= size() || predicted >= size())
    throw ValidationError(fmt::format("confusion matrix index ({}, {}) outside {} classes", truth, predicted, size()));
  counts[truth][predicted] += n;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
  return t;
}

std::vector<ClassMetrics> confusion_metrics(const ConfusionMatrix& cm) {
  if (cm.size() == 0) throw ValidationError("confusion matrix is empty");
  const std::size_t k = cm.size();
  std::vector<ClassMetrics> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t tp = cm.counts[c][c], row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += cm.counts[c][j];
      col += cm.counts[j][c];
    }
    auto& m = out[c];
    m.label = cm.labels[c];
    m.support = row;
    m.precision_undefined = col == 0;
    m.recall_undefined = row == 0;
    m.precision = col == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(col);
    m.recall = row == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(row);
    const double s = m.precision + m.recall;
    m.f1_undefined = s == 0.0;
    m.f1 = s == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / s;
  }
  return out;
}

double macro_f1(std::span<const ClassMetrics> metrics) {
  if (metrics.empty()) throw ValidationError("macro F1 of no classes");
  double s = 0.0;
  for (const auto& m : metrics) s += m.f1;
  return s / static_cast<double>(metrics.size());
}

// ---------------------------------------------------------------- ripeness

double ripeness_loss(const RipenessEval& eval) {
  if (eval.truth.size() != eval.predicted.size())
    throw ValidationError(fmt::format("ripeness: {} truths vs {} predictions", eval.truth.size(), eval.predicted.size()));
  if (eval.truth.empty()) throw ValidationError("ripeness: need at least one sample");
  if (!(eval.lambda >= 0.0)) throw ValidationError("ripeness: lambda must be >= 0");
  double s = 0.0;
  for (std::size_t i = 0; i < eval.truth.size(); ++i) {
    for (double v : {eval.truth[i], eval.predicted[i]})
      if (!(v >= 0.0 && v <= 1.1)) throw ValidationError(fmt::format("ripeness value {} outside [0, 1.1]", v));
    s += std::abs(eval.truth[i] - eval.predicted[i]);
  }
  return eval.lambda * s / static_cast<double>(eval.truth.size());
}

// ---------------------------------------------------------------- episodes

EpisodeSummary summarize(const fsm::HarvestEpisode& e) {
  return {e.episode_id, e.truth.grasp, e.truth.slip, e.outcome, e.total_s, e.compensated, e.residual_x_mm,
          e.residual_y_mm};
}

std::vector<EpisodeSummary> summarize(std::span<const fsm::HarvestEpisode> episodes) {
  std::vector<EpisodeSummary> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) out.push_back(summarize(e));
  return out;
}

SampleStats sample_stats(std::span<const double> values) {
  if (values.empty()) throw ValidationError("statistics of an empty sequence");
  SampleStats s;
  s.n = values.size();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

std::vector<CycleTimeStats> aggregate_cycle_times(std::span<const EpisodeSummary> episodes) {
  std::map<Outcome, std::vector<double>> by_outcome;
  for (const auto& e : episodes) by_outcome[e.outcome].push_back(e.total_s);
  std::vector<CycleTimeStats> out;
  for (const auto& [outcome, totals] : by_outcome) {
    const auto s = sample_stats(totals);
    out.push_back({outcome, s.mean, s.std, s.n});
  }
  return out;
}

const char* to_string(Condition c) {
  static constexpr std::array<const char*, kConditionCount> names{"EmptyGrasp", "Misgrasp", "Normal", "Slipping",
                                                                  "Slipped"};
  return names.at(static_cast<std::size_t>(c));
}

Condition condition_of(const EpisodeSummary& e) {
  if (e.grasp_truth == grasp::GraspClass::Empty) return Condition::EmptyGrasp;
  if (e.grasp_truth == grasp::GraspClass::UnripeHeld) return Condition::Misgrasp;
  switch (e.slip_truth) {
    case slip::SlipLabel::Normal: return Condition::Normal;
    case slip::SlipLabel::Slipping: return Condition::Slipping;
    case slip::SlipLabel::Slipped: return Condition::Slipped;
  }
  return Condition::Normal;
}

bool is_success(const EpisodeSummary& e) {
  switch (condition_of(e)) {
    case Condition::EmptyGrasp:
    case Condition::Misgrasp: return e.outcome == Outcome::AbortedEmptyOrMisgrasp;
    case Condition::Normal: return e.outcome == Outcome::PickedAndPlaced;
    case Condition::Slipping: return e.outcome == Outcome::RecoveredAfterSlip;
    case Condition::Slipped: return e.outcome == Outcome::AbortedSlipped;
  }
  return false;
}

SuccessTally tally(std::span<const EpisodeSummary> episodes) {
  SuccessTally t;
  for (const auto& e : episodes) t.record(condition_of(e), is_success(e));
  return t;
}

std::string percent_two_decimals(std::uint64_t success, std::uint64_t total) {
  if (total == 0) throw ValidationError("success rate needs at least one attempt");
  if (success > total) throw ValidationError("more successes than attempts");
  // Integer arithmetic: hundredths of a percent, rounded half up.
  const std::uint64_t hundredths = (20000 * success + total) / (2 * total);
  return fmt::format("{}.{:02}", hundredths / 100, hundredths % 100);
}

std::vector<SuccessRate> success_rates(const SuccessTally& t) {
  std::vector<SuccessRate> out;
  for (std::size_t c = 0; c < kConditionCount; ++c) {
    const auto n = t.success[c] + t.failure[c];
    if (n == 0) continue;
    out.push_back({static_cast<Condition>(c), t.success[c], t.failure[c],
                   static_cast<double>(t.success[c]) / static_cast<double>(n), percent_two_decimals(t.success[c], n)});
  }
  return out;
}

// ---------------------------------------------------------------- reports

ReportFormat parse_format(const std::string& text) {
  if (text == "csv") return ReportFormat::Csv;
  if (text == "jsonlines" || text == "jsonl") return ReportFormat::JsonLines;
  throw ValidationError(fmt::format("unknown report format '{}' (csv or jsonlines)", text));
}

const char* extension(ReportFormat format) { return format == ReportFormat::Csv ? "csv" : "jsonl"; }

namespace {

std::string format_cell(const Cell& cell, const Column& col) {
  switch (col.kind) {
    case Column::Kind::Text: return std::get<std::string>(cell);
    case Column::Kind::Integer: return std::to_string(std::get<std::int64_t>(cell));
    case Column::Kind::Real: {
      auto s = fmt::format("{:.{}f}", std::get<double>(cell), col.decimals);
      // Avoid "-0.000" so equal values always print identically.
      if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
      return s;
    }
  }
  return {};
}

Cell parse_cell(const std::string& text, const Column& col, std::size_t line) {
  const auto fail = [&] {
    return ValidationError(fmt::format("report line {}: column '{}' value '{}' is invalid", line, col.name, text));
  };
  switch (col.kind) {
    case Column::Kind::Text: return text;
    case Column::Kind::Integer: {
      std::int64_t v = 0;
      const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size()) throw fail();
      return v;
    }
    case Column::Kind::Real: {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size()) throw fail();
      return v;
    }
  }
  return text;
}

void check_row(const ReportTable& t, const std::vector<Cell>& row) {
  if (row.size() != t.columns.size())
    throw ValidationError(fmt::format("report '{}': row has {} cells, expected {}", t.name, row.size(), t.columns.size()));
}

}  // namespace

ReportTable ReportTable::rounded() const {
  ReportTable out = *this;
  for (auto& row : out.rows) {
    check_row(out, row);
    for (std::size_t c = 0; c < row.size(); ++c)
      if (columns[c].kind == Column::Kind::Real) row[c] = parse_cell(format_cell(row[c], columns[c]), columns[c], 0);
  }
  return out;
}

std::string format_report(const ReportTable& t, ReportFormat format) {
  std::string out;
  if (format == ReportFormat::Csv) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) out += (c ? "," : "") + t.columns[c].name;
    out += '\n';
    for (const auto& row : t.rows) {
      check_row(t, row);
      for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + format_cell(row[c], t.columns[c]);
      out += '\n';
    }
    return out;
  }
  for (const auto& row : t.rows) {
    check_row(t, row);
    nlohmann::ordered_json j;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const auto& col = t.columns[c];
      const auto text = format_cell(row[c], col);
      if (col.kind == Column::Kind::Text) {
        j[col.name] = text;
      } else if (col.kind == Column::Kind::Integer) {
        j[col.name] = std::get<std::int64_t>(row[c]);
      } else {
        // Emit the rounded value so both formats carry the same number.
        j[col.name] = std::get<double>(parse_cell(text, col, 0));
      }
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

ReportTable parse_report(const std::string& text, ReportFormat format, const std::vector<Column>& columns) {
  ReportTable t;
  t.columns = columns;
  if (format == ReportFormat::Csv) {
    const auto table = csv::parse(text, "<report>");
    if (table.header.size() != columns.size())
      throw ValidationError(fmt::format("report header has {} columns, expected {}", table.header.size(), columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (table.header[c] != columns[c].name)
        throw ValidationError(fmt::format("report column {} is '{}', expected '{}'", c, table.header[c], columns[c].name));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      if (table.rows[r].size() != columns.size())
        throw ValidationError(fmt::format("report line {}: wrong number of fields", r + 2));
      std::vector<Cell> row;
      for (std::size_t c = 0; c < columns.size(); ++c) row.push_back(parse_cell(table.rows[r][c], columns[c], r + 2));
      t.rows.push_back(std::move(row));
    }
    return t;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      std::vector<Cell> row;
      for (const auto& col : columns) {
        const auto& v = j.at(col.name);
        if (col.kind == Column::Kind::Text) row.emplace_back(v.get<std::string>());
        else if (col.kind == Column::Kind::Integer) row.emplace_back(v.get<std::int64_t>());
        else row.emplace_back(v.get<double>());
      }
      t.rows.push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("report line {}: {}", n, e.what()));
    }
  }
  return t;
}

std::filesystem::path write_report(const ReportTable& table, ReportFormat format, const std::filesystem::path& dir) {
  const auto path = dir / (table.name + "." + extension(format));
  csv::write_text(path, format_report(table, format));
  return path;
}

ReportTable cycle_time_table(std::span<const CycleTimeStats> stats) {
  ReportTable t{"cycle_times",
                {{"outcome"}, {"n", Column::Kind::Integer}, {"mean_s", Column::Kind::Real, 3},
                 {"std_s", Column::Kind::Real, 3}},
                {}};
  for (const auto& s : stats)
    t.rows.push_back({std::string(fsm::to_string(s.outcome)), static_cast<std::int64_t>(s.n), s.mean_s, s.std_s});
  return t;
}

ReportTable success_table(std::span<const SuccessRate> rates) {
  ReportTable t{"success_rates",
                {{"condition"}, {"success", Column::Kind::Integer}, {"failure", Column::Kind::Integer},
                 {"rate_percent", Column::Kind::Real, 2}},
                {}};
  for (const auto& r : rates) {
    double pct = 0.0;
    std::from_chars(r.percent.data(), r.percent.data() + r.percent.size(), pct);
    t.rows.push_back({std::string(to_string(r.condition)), static_cast<std::int64_t>(r.success),
                      static_cast<std::int64_t>(r.failure), pct});
  }
  return t;
}

ReportTable compensation_table(std::span<const EpisodeSummary> episodes) {
  ReportTable t{"compensation",
                {{"episodes", Column::Kind::Integer}, {"compensated", Column::Kind::Integer},
                 {"mean_residual_x_mm", Column::Kind::Real, 3}, {"mean_residual_y_mm", Column::Kind::Real, 3}},
                {}};
  std::vector<double> rx, ry;
  for (const auto& e : episodes)
    if (e.compensated) {
      rx.push_back(e.residual_x_mm);
      ry.push_back(e.residual_y_mm);
    }
  const double mx = rx.empty() ? 0.0 : sample_stats(rx).mean;
  const double my = ry.empty() ? 0.0 : sample_stats(ry).mean;
  if (!episodes.empty())
    t.rows.push_back({static_cast<std::int64_t>(episodes.size()), static_cast<std::int64_t>(rx.size()), mx, my});
  return t;
}

ReportTable stage_time_table(std::span<const fsm::HarvestEpisode> episodes) {
  ReportTable t{"stage_times",
                {{"stage"}, {"variant"}, {"n", Column::Kind::Integer}, {"mean_s", Column::Kind::Real, 3},
                 {"std_s", Column::Kind::Real, 3}},
                {}};
  std::map<fsm::StageStep, std::vector<double>> by_step;
  for (const auto& e : episodes)
    for (const auto& r : e.records) by_step[r.step].push_back(r.duration_s);
  for (const auto& [step, d] : by_step) {
    const auto s = sample_stats(d);
    t.rows.push_back({std::string(fsm::to_string(step.stage)), std::string(fsm::to_string(step.variant)),
                      static_cast<std::int64_t>(s.n), s.mean, s.std});
  }
  return t;
}

ReportTable classification_table(std::span<const ClassMetrics> metrics) {
  ReportTable t{"classification",
                {{"class"}, {"precision", Column::Kind::Real, 3}, {"recall", Column::Kind::Real, 3},
                 {"f1", Column::Kind::Real, 3}, {"support", Column::Kind::Integer}},
                {}};
  for (const auto& m : metrics)
    t.rows.push_back({m.label, m.precision, m.recall, m.f1, static_cast<std::int64_t>(m.support)});
  if (!metrics.empty()) {
    double p = 0.0, r = 0.0;
    std::uint64_t n = 0;
    for (const auto& m : metrics) {
      p += m.precision;
      r += m.recall;
      n += m.support;
    }
    const auto k = static_cast<double>(metrics.size());
    t.rows.push_back({std::string("macro"), p / k, r / k, macro_f1(metrics), static_cast<std::int64_t>(n)});
  }
  return t;
}

const std::vector<Column>& episode_columns() {
  static const std::vector<Column> cols{{"episode_id", Column::Kind::Integer},
                                        {"grasp_truth"},
                                        {"slip_truth"},
                                        {"outcome"},
                                        {"total_s", Column::Kind::Real, 3},
                                        {"compensated", Column::Kind::Integer},
                                        {"residual_x_mm", Column::Kind::Real, 3},
                                        {"residual_y_mm", Column::Kind::Real, 3}};
  return cols;
}

ReportTable episode_table(std::span<const EpisodeSummary> episodes) {
  ReportTable t{"episodes", episode_columns(), {}};
  for (const auto& e : episodes)
    t.rows.push_back({static_cast<std::int64_t>(e.episode_id), std::string(grasp::to_string(e.grasp_truth)),
                      std::string(slip::to_string(e.slip_truth)), std::string(fsm::to_string(e.outcome)), e.total_s,
                      static_cast<std::int64_t>(e.compensated ? 1 : 0), e.residual_x_mm, e.residual_y_mm});
  return t;
}

std::vector<EpisodeSummary> episodes_from_table(const ReportTable& t) {
  const auto& cols = episode_columns();
  if (t.columns.size() != cols.size()) throw ValidationError("not an episode table");
  for (std::size_t c = 0; c < cols.size(); ++c)
    if (t.columns[c].name != cols[c].name) throw ValidationError("not an episode table");

  const auto lookup = [](const std::string& text, std::size_t count, auto name_of, const char* what) {
    for (std::size_t i = 0; i < count; ++i)
      if (text == name_of(i)) return i;
    throw ValidationError(fmt::format("unknown {} '{}'", what, text));
  };
  std::vector<EpisodeSummary> out;
  for (const auto& row : t.rows) {
    EpisodeSummary e;
    e.episode_id = static_cast<std::uint64_t>(std::get<std::int64_t>(row[0]));
    e.grasp_truth = static_cast<grasp::GraspClass>(lookup(std::get<std::string>(row[1]), 3, [](std::size_t i) {
      return std::string(grasp::to_string(static_cast<grasp::GraspClass>(i)));
    }, "grasp class"));
    e.slip_truth = static_cast<slip::SlipLabel>(lookup(std::get<std::string>(row[2]), 3, [](std::size_t i) {
      return std::string(slip::to_string(static_cast<slip::SlipLabel>(i)));
    }, "slip label"));
    e.outcome = static_cast<Outcome>(lookup(std::get<std::string>(row[3]), 4, [](std::size_t i) {
      return std::string(fsm::to_string(static_cast<Outcome>(i)));
    }, "outcome"));
    e.total_s = std::get<double>(row[4]);
    e.compensated = std::get<std::int64_t>(row[5]) != 0;
    e.residual_x_mm = std::get<double>(row[6]);
    e.residual_y_mm = std::get<double>(row[7]);
    out.push_back(e);
  }
  return out;
}

}  // namespace harvest_guard::metrics
