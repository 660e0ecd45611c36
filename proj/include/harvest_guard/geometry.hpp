#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace harvest_guard::geometry {

/// A position in the robot-arm frame, millimetres. There is deliberately no
/// conversion from camera coordinates anywhere in this API.
struct ArmPoint3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool operator==(const ArmPoint3&) const = default;
};

/// Picking point minus effector, componentwise (mm).
struct RelativeError {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;

  bool operator==(const RelativeError&) const = default;
};

enum class CompensationMode {
  PerAxis,          // correct only the axes whose error exceeds the threshold
  EitherAxisBoth,   // if any axis exceeds, correct both x and y
};

struct CompensationParams {
  double threshold_mm = 10.0;
  double k_x = 1.0;
  double k_y = 0.5;
  CompensationMode mode = CompensationMode::EitherAxisBoth;

  /// Throws ValidationError unless threshold > 0 and both gains > 0.
  void validate() const;
};

CompensationMode parse_mode(const std::string& text);
std::string to_string(CompensationMode mode);

/// Throws ValidationError on non-finite coordinates.
RelativeError relative_error(const ArmPoint3& picking, const ArmPoint3& effector);

bool needs_compensation(const RelativeError& err, const CompensationParams& params);

/// Corrected picking point. Axes that the mode does not correct, and z,
/// are copied from `picking`; with no axis over threshold this returns
/// `picking` unchanged.
ArmPoint3 compensated_point(const ArmPoint3& picking, const RelativeError& err,
                            const CompensationParams& params);

/// Mean of |v|; throws ValidationError on an empty sequence.
double mean_abs_error(std::span<const double> values);

/// One row of a compensation audit. Physical errors, compensated point and
/// residuals are optional because an input row may not carry them.
struct CompensationRecord {
  ArmPoint3 picking;
  ArmPoint3 effector;
  RelativeError visual_err;
  std::optional<double> physical_err_x;
  std::optional<double> physical_err_y;
  std::optional<ArmPoint3> compensated;
  std::optional<double> residual_x;
  std::optional<double> residual_y;
};

/// Builds a record for one observation. `measured` overrides the
/// coordinate-difference error when a separately measured value exists.
CompensationRecord compensate(const ArmPoint3& picking, const ArmPoint3& effector,
                              const CompensationParams& params,
                              std::optional<RelativeError> measured = std::nullopt);

// Table-2 style CSV. Input header: xs,ys,zs,xe,ye,ze[,dx,dy][,dx_w,dy_w][,ex,ey]
struct AuditRow {
  ArmPoint3 picking;
  ArmPoint3 effector;
  std::optional<RelativeError> listed_err;  // dx,dy columns when present
  std::optional<double> physical_err_x;
  std::optional<double> physical_err_y;
  std::optional<double> residual_x;         // measured E_x when present
  std::optional<double> residual_y;
};

std::vector<AuditRow> read_audit_csv(const std::filesystem::path& path);
std::vector<AuditRow> parse_audit_csv(const std::string& text);

/// Full Table-2 column set; absent values are written as empty fields.
std::string format_records_csv(const std::vector<CompensationRecord>& records);

}  // namespace harvest_guard::geometry
