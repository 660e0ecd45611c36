#include "harvest_guard/geometry.hpp"

#include <cmath>
#include <fmt/format.h>

#include "harvest_guard/csv.hpp"
#include "harvest_guard/errors.hpp"

namespace harvest_guard::geometry {

namespace {

void require_finite(const ArmPoint3& p, const char* what) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
    throw ValidationError(fmt::format("{} has a non-finite coordinate", what));
}

bool x_exceeds(const RelativeError& e, double t) { return std::abs(e.dx) > t; }
bool y_exceeds(const RelativeError& e, double t) { return std::abs(e.dy) > t; }

std::optional<double> optional_cell(const csv::Table& t, std::size_t row, const char* name) {
  if (!t.has_column(name)) return std::nullopt;
  const auto& cell = t.rows[row][t.column(name)];
  if (cell.empty() || cell == "-") return std::nullopt;
  return csv::to_double(cell, t, row);
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt::format("{:.3f}", *v) : std::string{};
}

}  // namespace

void CompensationParams::validate() const {
  if (!(threshold_mm > 0.0) || !std::isfinite(threshold_mm))
    throw ValidationError(fmt::format("threshold must be > 0 mm, got {}", threshold_mm));
  if (!(k_x > 0.0) || !(k_y > 0.0) || !std::isfinite(k_x) || !std::isfinite(k_y))
    throw ValidationError(fmt::format("gains must be > 0, got k_x={} k_y={}", k_x, k_y));
}

CompensationMode parse_mode(const std::string& text) {
  if (text == "per-axis" || text == "PerAxis") return CompensationMode::PerAxis;
  if (text == "either" || text == "EitherAxisBoth") return CompensationMode::EitherAxisBoth;
  throw ValidationError("unknown compensation mode '" + text + "' (expected per-axis|either)");
}

std::string to_string(CompensationMode mode) {
  return mode == CompensationMode::PerAxis ? "per-axis" : "either";
}

RelativeError relative_error(const ArmPoint3& picking, const ArmPoint3& effector) {
  require_finite(picking, "picking point");
  require_finite(effector, "effector point");
  return {picking.x - effector.x, picking.y - effector.y, picking.z - effector.z};
}

bool needs_compensation(const RelativeError& err, const CompensationParams& params) {
  // Both modes trigger on the same condition; they differ in which axes move.
  return x_exceeds(err, params.threshold_mm) || y_exceeds(err, params.threshold_mm);
}

ArmPoint3 compensated_point(const ArmPoint3& picking, const RelativeError& err,
                            const CompensationParams& params) {
  bool fix_x = false;
  bool fix_y = false;
  if (params.mode == CompensationMode::PerAxis) {
    fix_x = x_exceeds(err, params.threshold_mm);
    fix_y = y_exceeds(err, params.threshold_mm);
  } else {
    fix_x = fix_y = needs_compensation(err, params);
  }
  ArmPoint3 out = picking;
  if (fix_x) out.x = picking.x + params.k_x * err.dx;
  if (fix_y) out.y = picking.y + params.k_y * err.dy;
  return out;
}

double mean_abs_error(std::span<const double> values) {
  if (values.empty()) throw ValidationError("mean_abs_error of an empty sequence");
  double sum = 0.0;
  for (double v : values) sum += std::abs(v);
  return sum / static_cast<double>(values.size());
}

CompensationRecord compensate(const ArmPoint3& picking, const ArmPoint3& effector,
                              const CompensationParams& params,
                              std::optional<RelativeError> measured) {
  CompensationRecord rec;
  rec.picking = picking;
  rec.effector = effector;
  rec.visual_err = measured ? *measured : relative_error(picking, effector);
  if (needs_compensation(rec.visual_err, params))
    rec.compensated = compensated_point(picking, rec.visual_err, params);
  return rec;
}

namespace {

std::vector<AuditRow> rows_from_table(const csv::Table& table) {
  std::vector<AuditRow> rows;
  rows.reserve(table.rows.size());
  const auto need = [&](std::size_t r, const char* name) {
    return csv::to_double(table.rows[r][table.column(name)], table, r);
  };
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    AuditRow row;
    row.picking = {need(r, "xs"), need(r, "ys"), need(r, "zs")};
    row.effector = {need(r, "xe"), need(r, "ye"), need(r, "ze")};
    const auto dx = optional_cell(table, r, "dx");
    const auto dy = optional_cell(table, r, "dy");
    if (dx && dy) row.listed_err = RelativeError{*dx, *dy, row.picking.z - row.effector.z};
    row.physical_err_x = optional_cell(table, r, "dx_w");
    row.physical_err_y = optional_cell(table, r, "dy_w");
    row.residual_x = optional_cell(table, r, "ex");
    row.residual_y = optional_cell(table, r, "ey");
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::vector<AuditRow> parse_audit_csv(const std::string& text) {
  return rows_from_table(csv::parse(text, "<audit>"));
}

std::vector<AuditRow> read_audit_csv(const std::filesystem::path& path) {
  return rows_from_table(csv::read_file(path));
}

std::string format_records_csv(const std::vector<CompensationRecord>& records) {
  std::string out = "xs,ys,zs,xe,ye,ze,dx,dy,dx_w,dy_w,xce,yce,zce,ex,ey\n";
  for (const auto& r : records) {
    const auto& c = r.compensated;
    out += fmt::format("{:.3f},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f},{},{},{},{},{},{},{}\n",
                       r.picking.x, r.picking.y, r.picking.z, r.effector.x, r.effector.y,
                       r.effector.z, r.visual_err.dx, r.visual_err.dy, fmt_opt(r.physical_err_x),
                       fmt_opt(r.physical_err_y), fmt_opt(c ? std::optional(c->x) : std::nullopt),
                       fmt_opt(c ? std::optional(c->y) : std::nullopt),
                       fmt_opt(c ? std::optional(c->z) : std::nullopt),
                       fmt_opt(c ? r.residual_x : std::nullopt),
                       fmt_opt(c ? r.residual_y : std::nullopt));
  }
  return out;
}

}  // namespace harvest_guard::geometry
