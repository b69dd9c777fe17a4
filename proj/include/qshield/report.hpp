#pragma once

#include <string>
#include <vector>

#include "qshield/explore.hpp"

namespace qshield {

/// Deterministic double formatting for CSV/JSON artifacts: shortest decimal
/// that round-trips (%.17g trimmed), so identical values always serialize to
/// identical bytes.
std::string format_double(double v);

/// Explorer report: one row per evaluated point, fixed documented columns.
void write_report_csv(const std::vector<EvaluatedPoint>& points,
                      const std::vector<double>& rates, const std::string& path);

/// Full evaluated points as JSON (consumed by `report`).
void write_points_json(const std::vector<EvaluatedPoint>& points,
                       const std::string& path);
std::vector<EvaluatedPoint> load_points_json(const std::string& path);

/// Pareto set as JSON.
void write_pareto_json(const std::vector<EvaluatedPoint>& front,
                       const std::string& path);

/// One CSV per design point (columns rate, mean_accuracy, ci_low, ci_high),
/// named curve_<label>.csv under out_dir. Returns warnings: an empty input
/// set, and any curve that rises with rate beyond the joined CIs. Throws
/// when a point has no per-rate metrics.
std::vector<std::string> emit_plot_data(const std::vector<EvaluatedPoint>& points,
                                        const std::string& out_dir);

} // namespace qshield
