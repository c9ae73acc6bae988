#include "gplcp/cli.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "gplcp/adaptive_query.hpp"
#include "gplcp/baseline.hpp"
#include "gplcp/error.hpp"
#include "gplcp/fitting.hpp"
#include "gplcp/io.hpp"

namespace gplcp {

namespace {

using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumerical = 4;

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message)
      : Error("UsageError", ErrorCategory::usage, message) {}
};

std::array<int, 3> parse_dims(const std::string& text) {
  std::vector<int> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      values.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("--dims expects N or NX,NY,NZ, got \"" + text + "\"");
    }
  }
  if (values.size() == 1) values.assign(3, values[0]);
  if (values.size() != 3) throw UsageError("--dims expects N or NX,NY,NZ, got \"" + text + "\"");
  for (int v : values)
    if (v < 2) throw UsageError("--dims values must be >= 2");
  return {values[0], values[1], values[2]};
}

VolumeDtype parse_dtype(const std::string& text) {
  if (text == "f32le") return VolumeDtype::f32le;
  if (text == "u8") return VolumeDtype::u8;
  throw UsageError("--dtype must be f32le or u8");
}

json stats_json(const QueryStats& s) {
  return {{"nodes_visited", s.nodes_visited},
          {"nodes_pruned", s.nodes_pruned},
          {"bound_evaluations", s.bound_evaluations},
          {"minimizations_skipped", s.minimizations_skipped},
          {"early_exits", s.early_exits},
          {"second_sides_settled", s.second_sides_settled},
          {"optimizer_not_converged", s.optimizer_not_converged},
          {"leaf_cells", s.leaf_cells},
          {"time_gp", s.time_gp},
          {"time_mc", s.time_mc},
          {"time_overhead", s.time_overhead},
          {"time_total", s.time_total}};
}

json grid_json(const GridSpec& g) {
  return {{"dims", {g.dims[0], g.dims[1], g.dims[2]}},
          {"origin", {g.origin[0], g.origin[1], g.origin[2]}},
          {"spacing", {g.spacing[0], g.spacing[1], g.spacing[2]}}};
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << doc.dump(2) << "\n";
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::int64_t count_nonzero(const VolumeField& f) {
  std::int64_t n = 0;
  for (double v : f.values) n += v != 0.0;
  return n;
}

// Shared state for one invocation.
struct Session {
  std::vector<std::string> args;
  std::ostream& out;
  std::ostream& err;
  json config;

  void provenance(const std::string& stem, const json& inputs) const {
    json doc = {{"tool", "gplcp"},
                {"version", kToolVersion},
                {"arguments", args},
                {"config", config},
                {"inputs", inputs}};
    write_json(stem + ".provenance.json", doc);
  }
};

json model_input(const std::string& path) {
  return {{"path", path}, {"fnv1a64", hex64(file_hash(path))}};
}

struct QueryOptions {
  std::string model;
  double iso = 0.0;
  std::string dims = "64";
  double alpha = 1e-3;
  double beta = 6.0;
  int mc = 1600;
  std::uint64_t seed = 0;
  int threads = 0;
  int max_depth = 0;
  int max_iters = 50;
  double grad_tol = 1e-8;
  int multistarts = 5;
  std::string out;
  std::string levels_out;
  std::string vtk;
  std::string dtype = "f32le";
};

void add_query_options(CLI::App* cmd, QueryOptions& q, bool with_output) {
  cmd->add_option("--model", q.model, "Model JSON file")->required();
  cmd->add_option("--dims", q.dims, "Target grid points per axis: N or NX,NY,NZ")
      ->capture_default_str();
  cmd->add_option("--alpha", q.alpha, "Pruning probability threshold")->capture_default_str();
  cmd->add_option("--beta", q.beta, "Local GP radius in lengthscales")->capture_default_str();
  cmd->add_option("--mc", q.mc, "Monte Carlo samples per cell")->capture_default_str();
  cmd->add_option("--seed", q.seed, "Global RNG seed")->capture_default_str();
  cmd->add_option("--threads", q.threads, "Worker threads (0 = all cores)")->capture_default_str();
  cmd->add_option("--max-depth", q.max_depth, "Octree depth (0 = from grid)")
      ->capture_default_str();
  cmd->add_option("--max-iters", q.max_iters, "Optimizer iterations per start")
      ->capture_default_str();
  cmd->add_option("--grad-tol", q.grad_tol, "Projected-gradient tolerance")->capture_default_str();
  cmd->add_option("--multistarts", q.multistarts, "Optimizer starts per box (1-15)")
      ->capture_default_str();
  if (with_output) {
    cmd->add_option("--iso", q.iso, "Iso-value")->required();
    cmd->add_option("--out", q.out, "Output volume stem")->required();
    cmd->add_option("--vtk", q.vtk, "Also export a legacy VTK file");
    cmd->add_option("--dtype", q.dtype, "Volume dtype: f32le or u8")->capture_default_str();
  }
}

QueryConfig query_config(const QueryOptions& q, double iso) {
  QueryConfig cfg;
  cfg.iso_value = iso;
  cfg.alpha = q.alpha;
  cfg.beta = q.beta;
  cfg.max_depth = q.max_depth;
  cfg.mc_samples = q.mc;
  cfg.rng_seed = q.seed;
  cfg.threads = q.threads;
  cfg.optimizer = {q.max_iters, q.grad_tol, q.multistarts};
  if (auto problems = check_query_config(cfg); !problems.empty()) throw UsageError(problems.front());
  return cfg;
}

json config_json(const QueryConfig& cfg, const GridSpec& target) {
  return {{"iso", cfg.iso_value},
          {"alpha", cfg.alpha},
          {"beta", cfg.beta},
          {"mc", cfg.mc_samples},
          {"seed", cfg.rng_seed},
          {"threads", cfg.threads},
          {"max_depth", resolve_max_depth(target, cfg)},
          {"optimizer",
           {{"max_iters", cfg.optimizer.max_iters},
            {"grad_tol", cfg.optimizer.grad_tol},
            {"multistarts", cfg.optimizer.multistarts}}},
          {"target", grid_json(target)}};
}

GridSpec target_grid(const SparseGpModel& model, const std::string& dims) {
  return GridSpec::spanning(model.domain, parse_dims(dims));
}

void check_depth(const GridSpec& target, const QueryConfig& cfg) {
  try {
    resolve_max_depth(target, cfg);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

void echo_config(Session& s) { s.err << s.config.dump() << "\n"; }

void save_volume(const VolumeField& f, const std::string& path, const std::string& dtype,
                 const std::string& vtk) {
  write_volume(f, path, parse_dtype(dtype));
  if (!vtk.empty()) export_vtk_legacy(f, vtk);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Level-crossing probability fields from sparse GP models", "gplcp"};
  app.require_subcommand(1);
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors, "Report errors as JSON on stderr");
  app.set_version_flag("--version", kToolVersion);

  Session session{args, out, err, json::object()};
  std::function<void()> action;

  // gen-tangle
  std::string tangle_dims = "32", tangle_out, tangle_dtype = "f32le", tangle_vtk;
  double tangle_scale = 1.0, tangle_offset = 0.0;
  auto* gen = app.add_subcommand("gen-tangle", "Write the Tangle test volume");
  gen->add_option("--dims", tangle_dims, "Grid points per axis: N or NX,NY,NZ")
      ->capture_default_str();
  gen->add_option("--out", tangle_out, "Output volume stem")->required();
  gen->add_option("--scale", tangle_scale, "Value scale")->capture_default_str();
  gen->add_option("--offset", tangle_offset, "Value offset")->capture_default_str();
  gen->add_option("--dtype", tangle_dtype, "f32le or u8")->capture_default_str();
  gen->add_option("--vtk", tangle_vtk, "Also export a legacy VTK file");
  gen->callback([&] {
    action = [&] {
      const auto dims = parse_dims(tangle_dims);
      session.config = {{"command", "gen-tangle"},
                        {"dims", dims},
                        {"scale", tangle_scale},
                        {"offset", tangle_offset},
                        {"dtype", tangle_dtype}};
      echo_config(session);
      const auto field = generate_tangle(dims, tangle_scale, tangle_offset);
      save_volume(field, tangle_out, tangle_dtype, tangle_vtk);
      session.provenance(volume_stem(tangle_out), json::object());
    };
  });

  // fit
  std::string fit_in, fit_out, fit_selection = "strided";
  int fit_inducing = 50, fit_threads = 0;
  double fit_holdout = 0.0;
  std::optional<double> fit_l, fit_var, fit_noise;
  bool fit_search = false;
  auto* fit = app.add_subcommand("fit", "Fit a sparse GP model to a point volume");
  fit->add_option("--in", fit_in, "Training volume")->required();
  fit->add_option("--out", fit_out, "Output model JSON")->required();
  fit->add_option("--inducing", fit_inducing, "Number of inducing points")->capture_default_str();
  fit->add_option("--selection", fit_selection, "strided or kmeans")->capture_default_str();
  auto* opt_l = fit->add_option("--lengthscale", fit_l, "Fixed lengthscale (index units)");
  auto* opt_v = fit->add_option("--variance", fit_var, "Fixed kernel variance");
  auto* opt_n = fit->add_option("--noise", fit_noise, "Fixed noise variance");
  auto* opt_s = fit->add_flag("--search", fit_search, "Search the hyperparameter grid");
  opt_s->excludes(opt_l)->excludes(opt_v)->excludes(opt_n);
  fit->add_option("--holdout", fit_holdout, "Held-out fraction for scoring")->capture_default_str();
  fit->add_option("--threads", fit_threads, "Worker threads (0 = all cores)")->capture_default_str();
  fit->callback([&] {
    action = [&] {
      FitConfig cfg;
      cfg.num_inducing = fit_inducing;
      cfg.holdout_fraction = fit_holdout;
      cfg.threads = fit_threads;
      if (fit_selection == "strided") cfg.selection = InducingSelection::uniform_grid_subsample;
      else if (fit_selection == "kmeans") cfg.selection = InducingSelection::kmeans_positions;
      else throw UsageError("--selection must be strided or kmeans");
      const int fixed = int(fit_l.has_value()) + int(fit_var.has_value()) + int(fit_noise.has_value());
      if (fixed != 0 && fixed != 3)
        throw UsageError("--lengthscale, --variance and --noise must be given together");
      if (fixed == 3) cfg.fixed = HyperParams{*fit_l, *fit_var, *fit_noise};
      if (!(fit_holdout >= 0.0 && fit_holdout < 0.5)) throw UsageError("--holdout must lie in [0, 0.5)");
      if (fit_inducing < 1) throw UsageError("--inducing must be >= 1");

      session.config = {{"command", "fit"},
                        {"inducing", fit_inducing},
                        {"selection", fit_selection},
                        {"search", !cfg.fixed.has_value()},
                        {"holdout", fit_holdout},
                        {"threads", fit_threads}};
      if (cfg.fixed)
        session.config["fixed"] = {{"lengthscale", *fit_l}, {"variance", *fit_var}, {"noise", *fit_noise}};
      echo_config(session);

      const VolumeField training = read_volume(fit_in);
      if (training.kind != Centering::point) throw ConfigError("training volume must be point-centred");
      const auto result = fit_sgpr_detailed(training, cfg);
      write_model(result.model, fit_out);
      const auto prepared = prepare(result.model);
      const auto recon = reconstruct_mean(prepared->model, prepared->precomp, training.spec, fit_threads);
      const double db = psnr(training, recon);
      json report = {{"lengthscale", result.chosen.lengthscale},
                     {"variance", result.chosen.variance},
                     {"noise_variance", result.chosen.noise_variance},
                     {"inducing", result.model.size()},
                     {"psnr_db", std::isinf(db) ? json("inf") : json(db)}};
      out << report.dump(2) << "\n";
      session.provenance(fit_out, {{"training", model_input(volume_stem(fit_in) + ".raw")}});
    };
  });

  // predict-mean
  std::string pm_model, pm_dims = "64", pm_out, pm_vtk;
  int pm_threads = 0;
  auto* pm = app.add_subcommand("predict-mean", "Reconstruct the posterior mean on a grid");
  pm->add_option("--model", pm_model, "Model JSON file")->required();
  pm->add_option("--dims", pm_dims, "Grid points per axis: N or NX,NY,NZ")->capture_default_str();
  pm->add_option("--out", pm_out, "Output volume stem")->required();
  pm->add_option("--vtk", pm_vtk, "Also export a legacy VTK file");
  pm->add_option("--threads", pm_threads, "Worker threads (0 = all cores)")->capture_default_str();
  pm->callback([&] {
    action = [&] {
      const auto prepared = prepare(read_model(pm_model));
      const GridSpec target = target_grid(prepared->model, pm_dims);
      session.config = {{"command", "predict-mean"}, {"target", grid_json(target)}, {"threads", pm_threads}};
      echo_config(session);
      const auto field = reconstruct_mean(prepared->model, prepared->precomp, target, pm_threads);
      save_volume(field, pm_out, "f32le", pm_vtk);
      session.provenance(volume_stem(pm_out), {{"model", model_input(pm_model)}});
    };
  });

  // lcp-dense / lcp-adaptive
  QueryOptions dense_opts, adaptive_opts;
  auto* dense = app.add_subcommand("lcp-dense", "Cell estimate on every target cell");
  add_query_options(dense, dense_opts, true);
  auto* adaptive = app.add_subcommand("lcp-adaptive", "Octree-pruned cell estimates");
  add_query_options(adaptive, adaptive_opts, true);
  adaptive->add_option("--levels-out", adaptive_opts.levels_out, "Level field volume stem");

  auto run_query = [&](const QueryOptions& q, bool is_adaptive) {
    const auto prepared = prepare(read_model(q.model));
    const GridSpec target = target_grid(prepared->model, q.dims);
    const QueryConfig cfg = query_config(q, q.iso);
    check_depth(target, cfg);
    session.config = config_json(cfg, target);
    session.config["command"] = is_adaptive ? "lcp-adaptive" : "lcp-dense";
    session.config["dtype"] = q.dtype;
    echo_config(session);

    const std::string stem = volume_stem(q.out);
    json stats;
    if (is_adaptive) {
      const auto r = lcp_field_adaptive(prepared, target, cfg);
      save_volume(r.lcp, q.out, q.dtype, q.vtk);
      if (!q.levels_out.empty()) {
        write_volume(r.level_field, q.levels_out, VolumeDtype::f32le);
        session.provenance(volume_stem(q.levels_out), {{"model", model_input(q.model)}});
      }
      stats = stats_json(r.stats);
      stats["nonzero_cells"] = count_nonzero(r.lcp);
    } else {
      const auto r = lcp_field_dense(prepared, target, cfg);
      save_volume(r.lcp, q.out, q.dtype, q.vtk);
      stats = stats_json(r.stats);
      stats["nonzero_cells"] = count_nonzero(r.lcp);
    }
    write_json(stem + ".stats.json", {{"method", is_adaptive ? "adaptive" : "dense"}, {"stats", stats}});
    session.provenance(stem, {{"model", model_input(q.model)}});
    out << stats.dump(2) << "\n";
  };
  dense->callback([&] { action = [&] { run_query(dense_opts, false); }; });
  adaptive->callback([&] { action = [&] { run_query(adaptive_opts, true); }; });

  // compare
  std::string cmp_truth, cmp_test, cmp_out, cmp_error_out, cmp_truth_stats, cmp_test_stats;
  auto* cmp = app.add_subcommand("compare", "Compare an LCP field against a reference");
  cmp->add_option("--truth", cmp_truth, "Reference volume")->required();
  cmp->add_option("--test", cmp_test, "Volume under test")->required();
  cmp->add_option("--out", cmp_out, "Report JSON")->required();
  cmp->add_option("--error-out", cmp_error_out, "Absolute-error volume stem");
  cmp->add_option("--truth-stats", cmp_truth_stats, "Stats JSON of the reference run");
  cmp->add_option("--test-stats", cmp_test_stats, "Stats JSON of the tested run");
  cmp->callback([&] {
    action = [&] {
      session.config = {{"command", "compare"}, {"truth", cmp_truth}, {"test", cmp_test}};
      echo_config(session);
      const auto truth = read_volume(cmp_truth);
      const auto test = read_volume(cmp_test);
      auto report = compare_fields(truth, test);
      auto load_stats = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open " + path);
        json j;
        try {
          j = json::parse(in).at("stats");
        } catch (const json::exception& e) {
          throw ParseError(path + ": " + e.what());
        }
        QueryStats s;
        s.time_gp = j.value("time_gp", 0.0);
        s.time_mc = j.value("time_mc", 0.0);
        s.time_overhead = j.value("time_overhead", 0.0);
        s.time_total = j.value("time_total", 0.0);
        return s;
      };
      if (!cmp_truth_stats.empty() && !cmp_test_stats.empty())
        attach_times(report, load_stats(cmp_truth_stats), load_stats(cmp_test_stats));
      {
        std::ofstream f(cmp_out);
        if (!f) throw ConfigError("cannot write " + cmp_out);
        f << report_json(report) << "\n";
      }
      if (!cmp_error_out.empty()) {
        write_volume(absolute_error_field(truth, test), cmp_error_out);
        session.provenance(volume_stem(cmp_error_out), json::object());
      }
      out << report_table(report);
    };
  });

  // bench
  QueryOptions bench_opts;
  std::vector<double> bench_isos{-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0};
  auto* bench = app.add_subcommand("bench", "Dense vs adaptive sweep over iso-values");
  add_query_options(bench, bench_opts, false);
  bench->add_option("--iso-list", bench_isos, "Iso-values to sweep")->delimiter(',')->capture_default_str();
  bench->callback([&] {
    action = [&] {
      const auto prepared = prepare(read_model(bench_opts.model));
      const GridSpec target = target_grid(prepared->model, bench_opts.dims);
      const QueryConfig base = query_config(bench_opts, 0.0);
      check_depth(target, base);
      session.config = config_json(base, target);
      session.config.erase("iso");
      session.config["command"] = "bench";
      session.config["iso_list"] = bench_isos;
      echo_config(session);

      out << std::left << std::setw(8) << "iso" << std::right << std::setw(10) << "nz_dense"
          << std::setw(10) << "nz_adapt" << std::setw(12) << "rmse" << std::setw(10) << "dense_s"
          << std::setw(10) << "adapt_s" << std::setw(9) << "gp_s" << std::setw(9) << "mc_s"
          << std::setw(9) << "ovh_s" << std::setw(9) << "pct" << "\n";
      for (double iso : bench_isos) {
        const QueryConfig cfg = query_config(bench_opts, iso);
        const auto a = lcp_field_adaptive(prepared, target, cfg);
        const auto d = lcp_field_dense(prepared, target, cfg);
        auto report = compare_fields(d.lcp, a.lcp);
        attach_times(report, d.stats, a.stats);
        out << std::left << std::setw(8) << iso << std::right << std::setw(10)
            << report.nonzero_cells_truth << std::setw(10) << report.nonzero_cells_test
            << std::setw(12) << std::scientific << std::setprecision(2) << report.rmse
            << std::fixed << std::setprecision(2) << std::setw(10) << d.stats.time_total
            << std::setw(10) << a.stats.time_total << std::setw(9) << a.stats.time_gp
            << std::setw(9) << a.stats.time_mc << std::setw(9) << a.stats.time_overhead
            << std::setw(9) << std::setprecision(1) << report.speedup_percent.value_or(0.0)
            << "\n"
            << std::defaultfloat << std::setprecision(6);
      }
    };
  });

  auto fail = [&](const std::string& kind, const std::string& message, int code) {
    if (json_errors)
      err << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << "\n";
    else
      err << "error: " << message << "\n";
    return code;
  };

  std::vector<std::string> argv_store;
  argv_store.push_back("gplcp");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return fail("UsageError", e.what(), kExitUsage);
  }

  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    const int code = e.category() == ErrorCategory::usage       ? kExitUsage
                     : e.category() == ErrorCategory::numerical ? kExitNumerical
                                                                : kExitInput;
    return fail(e.kind(), e.what(), code);
  } catch (const std::exception& e) {
    return fail("InternalError", e.what(), kExitNumerical);
  }
}

}  // namespace gplcp
