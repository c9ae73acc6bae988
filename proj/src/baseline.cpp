#include "gplcp/baseline.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "gplcp/cell_field.hpp"
#include "gplcp/error.hpp"

namespace gplcp {

namespace {

void require_match(const VolumeField& a, const VolumeField& b) {
  if (!(a.spec == b.spec) || a.kind != b.kind)
    throw SpecMismatch("fields have different grids or centering");
  if (!a.consistent() || !b.consistent())
    throw SpecMismatch("field value count does not match its grid");
}

nlohmann::json times_json(const PhaseTimes& t) {
  return {{"gp", t.gp}, {"mc", t.mc}, {"overhead", t.overhead}, {"total", t.total}};
}

}  // namespace

DenseResult lcp_field_dense(const std::shared_ptr<const PreparedModel>& prepared,
                            const GridSpec& target, const QueryConfig& cfg) {
  target.check();
  if (auto problems = check_query_config(cfg); !problems.empty()) throw ConfigError(problems.front());
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::int64_t> cells(std::size_t(target.num_cells()));
  for (std::size_t c = 0; c < cells.size(); ++c) cells[c] = std::int64_t(c);
  const auto batch = evaluate_cells(prepared->model, prepared->precomp, target, cells,
                                    cfg.iso_value, cfg.mc_samples, cfg.rng_seed, cfg.threads);

  DenseResult result;
  result.lcp = VolumeField::zeros(target, Centering::cell);
  result.lcp.values = batch.probabilities;
  result.stats.leaf_cells = std::int64_t(cells.size());
  result.stats.time_gp = batch.time_gp;
  result.stats.time_mc = batch.time_mc;
  result.stats.time_total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.stats.time_overhead =
      std::max(0.0, result.stats.time_total - batch.time_gp - batch.time_mc);
  return result;
}

PhaseTimes phase_times(const QueryStats& stats) {
  return {stats.time_gp, stats.time_mc, stats.time_overhead, stats.time_total};
}

ComparisonReport compare_fields(const VolumeField& truth, const VolumeField& test) {
  require_match(truth, test);
  ComparisonReport r;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < truth.values.size(); ++i) {
    const double e = std::abs(truth.values[i] - test.values[i]);
    sum_sq += e * e;
    r.max_abs_error = std::max(r.max_abs_error, e);
    if (truth.values[i] != 0.0) ++r.nonzero_cells_truth;
    if (test.values[i] != 0.0) ++r.nonzero_cells_test;
  }
  if (!truth.values.empty()) r.rmse = std::sqrt(sum_sq / double(truth.values.size()));
  return r;
}

void attach_times(ComparisonReport& report, const QueryStats& truth, const QueryStats& test) {
  report.truth_times = phase_times(truth);
  report.test_times = phase_times(test);
  if (truth.time_total > 0.0) report.speedup_percent = 100.0 * test.time_total / truth.time_total;
}

VolumeField absolute_error_field(const VolumeField& truth, const VolumeField& test) {
  require_match(truth, test);
  VolumeField out = VolumeField::zeros(truth.spec, truth.kind);
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = std::abs(truth.values[i] - test.values[i]);
  return out;
}

std::string report_json(const ComparisonReport& r) {
  nlohmann::json j = {{"rmse", r.rmse},
                      {"max_abs_error", r.max_abs_error},
                      {"nonzero_cells_truth", r.nonzero_cells_truth},
                      {"nonzero_cells_test", r.nonzero_cells_test}};
  if (r.truth_times) j["time_truth"] = times_json(*r.truth_times);
  if (r.test_times) j["time_test"] = times_json(*r.test_times);
  if (r.speedup_percent) j["speedup_percent"] = *r.speedup_percent;
  return j.dump(2);
}

std::string report_table(const ComparisonReport& r) {
  std::ostringstream out;
  out << std::left << std::setw(22) << "rmse" << std::scientific << std::setprecision(3) << r.rmse
      << "\n"
      << std::setw(22) << "max_abs_error" << r.max_abs_error << "\n"
      << std::setw(22) << "nonzero_cells_truth" << r.nonzero_cells_truth << "\n"
      << std::setw(22) << "nonzero_cells_test" << r.nonzero_cells_test << "\n";
  if (r.truth_times && r.test_times) {
    out << std::fixed << std::setprecision(3) << "\n"
        << std::setw(10) << "method" << std::right << std::setw(10) << "gp" << std::setw(10)
        << "mc" << std::setw(10) << "overhead" << std::setw(10) << "total" << "\n";
    auto row = [&](const char* name, const PhaseTimes& t) {
      out << std::left << std::setw(10) << name << std::right << std::setw(10) << t.gp
          << std::setw(10) << t.mc << std::setw(10) << t.overhead << std::setw(10) << t.total
          << "\n";
    };
    row("truth", *r.truth_times);
    row("test", *r.test_times);
  }
  if (r.speedup_percent)
    out << std::left << std::setw(22) << "speedup_percent" << std::fixed << std::setprecision(1)
        << *r.speedup_percent << "\n";
  return out.str();
}

}  // namespace gplcp
