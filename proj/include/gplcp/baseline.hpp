#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "gplcp/adaptive_query.hpp"

namespace gplcp {

struct DenseResult {
  VolumeField lcp;
  QueryStats stats;
};

/// Cell estimate for every target cell, with the same seeds as the adaptive path.
DenseResult lcp_field_dense(const std::shared_ptr<const PreparedModel>& model,
                            const GridSpec& target, const QueryConfig& cfg);

struct PhaseTimes {
  double gp = 0.0;
  double mc = 0.0;
  double overhead = 0.0;
  double total = 0.0;
};

PhaseTimes phase_times(const QueryStats& stats);

struct ComparisonReport {
  double rmse = 0.0;
  double max_abs_error = 0.0;
  std::int64_t nonzero_cells_truth = 0;
  std::int64_t nonzero_cells_test = 0;
  std::optional<PhaseTimes> truth_times;
  std::optional<PhaseTimes> test_times;
  /// 100 * test total / truth total, when both timings are known.
  std::optional<double> speedup_percent;
};

/// Error statistics between two fields over the same grid.
ComparisonReport compare_fields(const VolumeField& truth, const VolumeField& test);

/// Adds timing columns and the speedup percentage.
void attach_times(ComparisonReport& report, const QueryStats& truth, const QueryStats& test);

VolumeField absolute_error_field(const VolumeField& truth, const VolumeField& test);

std::string report_json(const ComparisonReport& report);
std::string report_table(const ComparisonReport& report);

}  // namespace gplcp
