// harvest-guard: dataset generation, training, evaluation, compensation
// audits and cycle simulation from one binary.
//
// Exit codes: 0 success, 1 invalid input or usage, 2 file-system failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "harvest_guard/csv.hpp"
#include "harvest_guard/errors.hpp"
#include "harvest_guard/fsm.hpp"
#include "harvest_guard/geometry.hpp"
#include "harvest_guard/grasp.hpp"
#include "harvest_guard/lstm.hpp"
#include "harvest_guard/metrics.hpp"
#include "harvest_guard/pipeline.hpp"
#include "harvest_guard/sim.hpp"
#include "harvest_guard/slip_data.hpp"
#include "harvest_guard/slip_policy.hpp"

namespace hg = harvest_guard;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("harvest-guard");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("HARVEST_GUARD_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "info") spdlog::set_level(spdlog::level::info);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else throw hg::ValidationError("HARVEST_GUARD_LOG must be one of error, info, debug");
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw hg::IoError(fmt::format("{} '{}' does not exist or is not a file", what, p.string()));
}

std::array<std::size_t, 3> parse_counts(const std::string& text) {
  std::array<std::size_t, 3> out{};
  const auto parts = hg::csv::split_line(text);
  if (parts.size() != 3) throw hg::ValidationError("--counts needs three comma-separated integers");
  for (std::size_t i = 0; i < 3; ++i) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(parts[i], &used);
      if (used != parts[i].size() || v < 0) throw std::invalid_argument("");
      out[i] = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw hg::ValidationError(fmt::format("--counts: '{}' is not a non-negative integer", parts[i]));
    }
  }
  return out;
}

void print_evaluation(const hg::pipeline::Evaluation& e) {
  std::cout << hg::metrics::format_report(hg::metrics::classification_table(e.per_class), hg::metrics::ReportFormat::Csv);
  std::cout << fmt::format("macro_f1={:.4f}\n", e.macro_f1);
}

hg::slip::ClassificationPolicy make_policy(const std::string& name, double min, double max) {
  if (name == "argmax") return hg::slip::ClassificationPolicy::argmax();
  if (name == "thresholds") return hg::slip::ClassificationPolicy::thresholds(min, max);
  throw hg::ValidationError("--policy must be argmax or thresholds");
}

// ---------------------------------------------------------------- commands

struct GenDataOptions {
  std::string kind;
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
  std::optional<double> scale;
  std::string counts;
};

void run_gen_data(const GenDataOptions& o) {
  const auto cfg = o.config.empty() ? hg::sim::ScenarioConfig{} : hg::sim::load_config(o.config);
  hg::sim::DatasetKind kind;
  std::array<std::size_t, 3> counts{};
  if (o.kind == "slip") {
    kind = hg::sim::DatasetKind::Slip;
    counts = hg::sim::scale_counts(hg::sim::kReferenceSlipCounts, o.scale.value_or(1.1));
  } else if (o.kind == "grasp") {
    kind = hg::sim::DatasetKind::Grasp;
    counts = hg::sim::scale_counts(hg::sim::kReferenceGraspCounts, o.scale.value_or(1.0));
  } else {
    throw hg::ValidationError("--kind must be slip or grasp");
  }
  if (!o.counts.empty()) counts = parse_counts(o.counts);
  hg::sim::gen_dataset(cfg, kind, {counts}, o.seed, o.out);
  spdlog::info("wrote {} dataset ({}, {}, {}) to {}", o.kind, counts[0], counts[1], counts[2], o.out);
}

struct TrainSlipOptions {
  std::string data;
  std::uint64_t seed = 0;
  std::string out;
  hg::slip::TrainingHyperparameters hp;
  hg::slip::SlipArchitecture arch;
  double ratio = 0.7;
  bool oversample_first = false;
};

void run_train_slip(TrainSlipOptions o) {
  o.hp.seed = o.seed;
  o.hp.validate();
  o.arch.validate();
  require_file(o.data, "--data");
  const auto episodes = hg::slip::read_slip_csv(o.data);
  const auto windows = hg::slip::windows_from_episodes(episodes);
  const auto split = hg::pipeline::split_slip_windows(windows, o.ratio, o.seed, o.oversample_first);
  const auto tc = hg::slip::class_counts(split.train);
  spdlog::info("{} windows; train {} (oversampled {}/{}/{}), validation {}", windows.size(), split.train.size(), tc[0],
               tc[1], tc[2], split.validation.size());
  const auto model = hg::slip::lstm_train(split.train, split.validation, o.hp, o.arch,
                                          [](std::size_t epoch, double train_loss, double val_loss) {
                                            spdlog::info("epoch {} train_loss={:.5f} val_loss={:.5f}", epoch + 1,
                                                         train_loss, val_loss);
                                          });
  hg::slip::save_model(model, o.out);
  if (!split.validation.empty()) print_evaluation(hg::pipeline::evaluate_slip(model, split.validation));
  spdlog::info("saved model to {}", o.out);
}

struct EvalSlipOptions {
  std::string model;
  std::string data;
  std::string policy = "argmax";
  double min = 0.4;
  double max = 0.8;
  std::string out;
  std::string format = "csv";
};

void run_eval_slip(const EvalSlipOptions& o) {
  const auto policy = make_policy(o.policy, o.min, o.max);
  const auto format = hg::metrics::parse_format(o.format);
  require_file(o.model, "--model");
  require_file(o.data, "--data");
  const auto model = hg::slip::load_model(o.model);
  const auto windows = hg::slip::windows_from_episodes(hg::slip::read_slip_csv(o.data));
  const auto e = hg::pipeline::evaluate_slip(model, windows, policy);
  print_evaluation(e);
  if (!o.out.empty()) hg::metrics::write_report(hg::metrics::classification_table(e.per_class), format, o.out);
}

struct TrainGraspOptions {
  std::string data;
  std::uint64_t seed = 0;
  std::string out;
  hg::grasp::GraspTrainingHyperparameters hp;
  double ratio = 0.7;
};

void run_train_grasp(TrainGraspOptions o) {
  o.hp.seed = o.seed;
  if (o.hp.epochs == 0 || !(o.hp.learning_rate > 0.0)) throw hg::ValidationError("epochs and lr must be positive");
  require_file(o.data, "--data");
  const auto rows = hg::grasp::read_grasp_csv(o.data);
  const auto split = hg::pipeline::split_grasp_rows(rows, o.ratio, o.seed);
  spdlog::info("{} rows; train {}, validation {}", rows.size(), split.train.size(), split.validation.size());
  const auto model = hg::grasp::train_grasp_classifier(split.train, o.hp);
  hg::grasp::save_grasp_model(model, o.out);
  if (!split.validation.empty()) print_evaluation(hg::pipeline::evaluate_grasp(model, split.validation));
}

struct CompensateOptions {
  std::string input;
  hg::geometry::CompensationParams params;
  std::string mode = "either";
  std::string error_source = "supplied";
  std::string out;
};

void run_compensate(CompensateOptions o) {
  o.params.mode = hg::geometry::parse_mode(o.mode);
  o.params.validate();
  if (o.error_source != "supplied" && o.error_source != "coords")
    throw hg::ValidationError("--error-source must be supplied or coords");
  require_file(o.input, "--input");
  const auto rows = hg::geometry::read_audit_csv(o.input);
  std::vector<hg::geometry::CompensationRecord> records;
  for (const auto& row : rows) {
    const auto measured = o.error_source == "supplied" ? row.listed_err : std::nullopt;
    auto rec = hg::geometry::compensate(row.picking, row.effector, o.params, measured);
    rec.physical_err_x = row.physical_err_x;
    rec.physical_err_y = row.physical_err_y;
    if (rec.compensated) {
      rec.residual_x = row.residual_x;
      rec.residual_y = row.residual_y;
    }
    records.push_back(rec);
  }
  const auto text = hg::geometry::format_records_csv(records);
  if (o.out.empty()) std::cout << text;
  else hg::csv::write_text(o.out, text);

  std::vector<double> dx, dy;
  for (const auto& r : records) {
    dx.push_back(r.visual_err.dx);
    dy.push_back(r.visual_err.dy);
  }
  if (!records.empty())
    spdlog::info("{} rows, {} compensated; mean |dx|={:.3f} mean |dy|={:.3f}", records.size(),
                 std::count_if(records.begin(), records.end(), [](const auto& r) { return r.compensated.has_value(); }),
                 hg::geometry::mean_abs_error(dx), hg::geometry::mean_abs_error(dy));
}

struct SimulateOptions {
  std::string config;
  std::uint64_t seed = 0;
  std::optional<std::size_t> episodes;
  std::string out;
  bool deterministic = false;
  std::string slip_model;
  std::string grasp_model;
  std::string format = "csv";
};

void write_summary_reports(std::span<const hg::metrics::EpisodeSummary> episodes,
                           std::span<const hg::fsm::HarvestEpisode> staged, hg::metrics::ReportFormat format,
                           const fs::path& dir) {
  namespace m = hg::metrics;
  const auto cycle = m::aggregate_cycle_times(episodes);
  m::write_report(m::cycle_time_table(cycle), format, dir);
  m::write_report(m::success_table(m::success_rates(m::tally(episodes))), format, dir);
  m::write_report(m::compensation_table(episodes), format, dir);
  m::write_report(m::stage_time_table(staged), format, dir);
}

void run_simulate(const SimulateOptions& o) {
  const auto format = hg::metrics::parse_format(o.format);
  auto cfg = o.config.empty() ? hg::fsm::SimulationConfig{} : hg::fsm::load_simulation_config(o.config);
  if (o.episodes) cfg.scenario.episodes = *o.episodes;
  if (!o.slip_model.empty()) require_file(o.slip_model, "--slip-model");
  if (!o.grasp_model.empty()) require_file(o.grasp_model, "--grasp-model");

  std::optional<hg::slip::SlipModel> slip_model;
  std::optional<hg::grasp::LinearGraspClassifier> grasp_model;
  if (!o.slip_model.empty()) slip_model = hg::slip::load_model(o.slip_model);
  if (!o.grasp_model.empty()) grasp_model = hg::grasp::load_grasp_model(o.grasp_model);

  std::unique_ptr<hg::fsm::GraspMonitor> grasp_monitor;
  std::unique_ptr<hg::fsm::SlipMonitor> slip_monitor;
  if (grasp_model)
    grasp_monitor = std::make_unique<hg::fsm::ModelGraspMonitor>(*grasp_model, cfg.monitors.grasp_min_confidence);
  else
    grasp_monitor = std::make_unique<hg::fsm::OracleGraspMonitor>(cfg.monitors.grasp_error_rate);
  if (slip_model)
    slip_monitor = std::make_unique<hg::fsm::LstmSlipMonitor>(*slip_model, cfg.monitors.slip_policy);
  else
    slip_monitor = std::make_unique<hg::fsm::OracleSlipMonitor>(cfg.monitors.slip_error_rate);

  hg::fsm::Policies policies;
  policies.compensation = cfg.compensation;
  policies.grasp_decision = cfg.grasp_decision;
  policies.grasp_monitor = grasp_monitor.get();
  policies.slip_monitor = slip_monitor.get();
  policies.deterministic_timing = o.deterministic;

  spdlog::info("simulating {} episodes (seed {}, {} timing)", cfg.scenario.episodes, o.seed,
               o.deterministic ? "deterministic" : "stochastic");
  const auto episodes = hg::fsm::simulate(cfg.scenario, cfg.timing, policies, o.seed, cfg.scenario.episodes);

  const fs::path dir = o.out;
  hg::csv::write_text(dir / "episodes_log.jsonl", hg::fsm::format_log(episodes));
  // Aggregates come from the rounded per-episode table, so `report` on the
  // written file reproduces them byte for byte.
  const auto table = hg::metrics::episode_table(hg::metrics::summarize(episodes)).rounded();
  hg::metrics::write_report(table, format, dir);
  write_summary_reports(hg::metrics::episodes_from_table(table), episodes, format, dir);
  spdlog::info("wrote results to {}", dir.string());
}

struct ReportOptions {
  std::string input;
  std::string log;
  std::string format = "csv";
  std::string out;
};

std::vector<hg::fsm::HarvestEpisode> episodes_from_log(const std::vector<hg::fsm::LogRecord>& records) {
  std::vector<hg::fsm::HarvestEpisode> out;
  for (const auto& r : records) {
    if (out.empty() || out.back().episode_id != r.episode_id) {
      out.emplace_back();
      out.back().episode_id = r.episode_id;
    }
    out.back().records.push_back({{hg::fsm::parse_stage(r.stage), hg::fsm::parse_variant(r.variant)}, r.duration_s,
                                  hg::fsm::parse_event(r.event), r.detail});
  }
  return out;
}

void run_report(const ReportOptions& o) {
  namespace m = hg::metrics;
  const auto format = m::parse_format(o.format);
  require_file(o.input, "--input");
  if (!o.log.empty()) require_file(o.log, "--log");
  const fs::path input = o.input;
  const auto in_format = input.extension() == ".jsonl" ? m::ReportFormat::JsonLines : m::ReportFormat::Csv;
  std::ifstream in(input, std::ios::binary);
  if (!in) throw hg::IoError("cannot open " + input.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto episodes = m::episodes_from_table(m::parse_report(text, in_format, m::episode_columns()));

  std::vector<hg::fsm::HarvestEpisode> staged;
  if (!o.log.empty()) {
    std::ifstream lin(o.log, std::ios::binary);
    if (!lin) throw hg::IoError("cannot open " + o.log);
    const std::string log((std::istreambuf_iterator<char>(lin)), std::istreambuf_iterator<char>());
    staged = episodes_from_log(hg::fsm::parse_log(log));
  }
  const fs::path dir = o.out;
  m::write_report(m::cycle_time_table(m::aggregate_cycle_times(episodes)), format, dir);
  m::write_report(m::success_table(m::success_rates(m::tally(episodes))), format, dir);
  m::write_report(m::compensation_table(episodes), format, dir);
  if (!staged.empty()) m::write_report(m::stage_time_table(staged), format, dir);
  for (const auto& r : m::success_rates(m::tally(episodes)))
    std::cout << fmt::format("{}: {}/{} = {}%\n", m::to_string(r.condition), r.success, r.success + r.failure,
                             r.percent);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fault diagnosis and self-recovery engine for a strawberry-harvesting cycle"};
  app.name("harvest-guard");
  app.require_subcommand(1);

  GenDataOptions gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a synthetic slip or grasp dataset (CSV)");
  c_gen->add_option("--kind", gen.kind, "slip or grasp")->required()->check(CLI::IsMember({"slip", "grasp"}));
  c_gen->add_option("--seed", gen.seed, "Random seed")->required();
  c_gen->add_option("--out", gen.out, "Output CSV path")->required();
  c_gen->add_option("--config", gen.config, "Scenario config file");
  c_gen->add_option("--scale", gen.scale, "Multiplier on the reference class counts (slip 1.1, grasp 1.0)");
  c_gen->add_option("--counts", gen.counts, "Exact per-class counts, e.g. 719,157,1962");

  TrainSlipOptions ts;
  auto* c_ts = app.add_subcommand("train-slip", "Train the LSTM slip classifier");
  c_ts->add_option("--data", ts.data, "SlipData CSV")->required();
  c_ts->add_option("--seed", ts.seed, "Random seed")->required();
  c_ts->add_option("--out", ts.out, "Model output path")->required();
  c_ts->add_option("--epochs", ts.hp.epochs, "Training epochs")->capture_default_str();
  c_ts->add_option("--lr", ts.hp.learning_rate, "Learning rate")->capture_default_str();
  c_ts->add_option("--batch", ts.hp.batch_size, "Minibatch size")->capture_default_str();
  c_ts->add_option("--momentum", ts.hp.momentum, "Momentum")->capture_default_str();
  c_ts->add_option("--clip", ts.hp.clip_norm, "Global gradient-norm clip (<= 0 disables)")->capture_default_str();
  c_ts->add_option("--layers", ts.arch.layers, "LSTM layers")->capture_default_str();
  c_ts->add_option("--hidden", ts.arch.hidden, "Hidden units per layer")->capture_default_str();
  c_ts->add_option("--ratio", ts.ratio, "Train fraction of the stratified split")->capture_default_str();
  c_ts->add_flag("--oversample-first", ts.oversample_first, "Oversample before splitting");

  EvalSlipOptions es;
  auto* c_es = app.add_subcommand("eval-slip", "Evaluate a slip model on a SlipData CSV");
  c_es->add_option("--model", es.model, "Model file")->required();
  c_es->add_option("--data", es.data, "SlipData CSV")->required();
  c_es->add_option("--policy", es.policy, "argmax or thresholds")->capture_default_str();
  c_es->add_option("--min", es.min, "Thresholds policy: minimum slip score")->capture_default_str();
  c_es->add_option("--max", es.max, "Thresholds policy: maximum slip score")->capture_default_str();
  c_es->add_option("--out", es.out, "Directory for classification report");
  c_es->add_option("--format", es.format, "csv or jsonlines")->capture_default_str();

  TrainGraspOptions tg;
  auto* c_tg = app.add_subcommand("train-grasp", "Train the baseline grasp classifier");
  c_tg->add_option("--data", tg.data, "GraspData CSV")->required();
  c_tg->add_option("--seed", tg.seed, "Random seed")->required();
  c_tg->add_option("--out", tg.out, "Model output path")->required();
  c_tg->add_option("--epochs", tg.hp.epochs, "Gradient steps")->capture_default_str();
  c_tg->add_option("--lr", tg.hp.learning_rate, "Learning rate")->capture_default_str();
  c_tg->add_option("--ratio", tg.ratio, "Train fraction of the stratified split")->capture_default_str();

  CompensateOptions co;
  auto* c_co = app.add_subcommand("compensate", "Recompute compensated picking points for an audit CSV");
  c_co->add_option("--input", co.input, "CSV with xs,ys,zs,xe,ye,ze[,dx,dy][,dx_w,dy_w][,ex,ey]")->required();
  c_co->add_option("--kx", co.params.k_x, "x gain")->capture_default_str();
  c_co->add_option("--ky", co.params.k_y, "y gain")->capture_default_str();
  c_co->add_option("--threshold", co.params.threshold_mm, "Tolerance T in mm")->capture_default_str();
  c_co->add_option("--mode", co.mode, "either or per-axis")->capture_default_str();
  c_co->add_option("--error-source", co.error_source,
                   "supplied: use dx,dy columns when present; coords: always picking minus effector")
      ->capture_default_str();
  c_co->add_option("--out", co.out, "Output CSV (stdout when omitted)");

  SimulateOptions si;
  auto* c_si = app.add_subcommand("simulate", "Run seeded harvesting episodes and write logs and reports");
  c_si->add_option("--config", si.config, "Scenario config file");
  c_si->add_option("--seed", si.seed, "Master seed")->required();
  c_si->add_option("--episodes", si.episodes, "Episode count (overrides the config)");
  c_si->add_option("--out", si.out, "Output directory")->required();
  c_si->add_flag("--deterministic", si.deterministic, "Use stage-time means instead of sampling");
  c_si->add_option("--slip-model", si.slip_model, "Trained slip model (default: oracle monitor)");
  c_si->add_option("--grasp-model", si.grasp_model, "Trained grasp model (default: oracle monitor)");
  c_si->add_option("--format", si.format, "Report format: csv or jsonlines")->capture_default_str();

  ReportOptions rp;
  auto* c_rp = app.add_subcommand("report", "Aggregate a per-episode table into cycle-time and success reports");
  c_rp->add_option("--input", rp.input, "episodes.csv or episodes.jsonl from simulate")->required();
  c_rp->add_option("--log", rp.log, "episodes_log.jsonl for per-stage times");
  c_rp->add_option("--format", rp.format, "csv or jsonlines")->capture_default_str();
  c_rp->add_option("--out", rp.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    setup_logging();
    if (*c_gen) run_gen_data(gen);
    else if (*c_ts) run_train_slip(ts);
    else if (*c_es) run_eval_slip(es);
    else if (*c_tg) run_train_grasp(tg);
    else if (*c_co) run_compensate(co);
    else if (*c_si) run_simulate(si);
    else if (*c_rp) run_report(rp);
    return kExitOk;
  } catch (const hg::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}
