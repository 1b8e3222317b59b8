#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <sstream>

#include "soillead/apportion.hpp"
#include "soillead/dataset.hpp"
#include "soillead/diagnostics.hpp"
#include "soillead/estimator.hpp"
#include "soillead/inference.hpp"
#include "soillead/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace soillead;

namespace {

constexpr int kSchemaVersion = 1;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  in >> j;
  return j;
}

struct RunConfig {
  int measurement_year = 0;
  int y_min = 0;
  std::string paint_series;
  std::optional<int> paint_zero_before, paint_zero_after;
  double paint_scale = 1.0;
  std::string gas_series;
  std::optional<int> gas_zero_before, gas_zero_after;
  double gas_scale = 1.0;
  std::string gas_impute_reference;
  std::optional<int> gas_impute_window_first, gas_impute_window_last;
  std::string samples;
  std::vector<SiteType> site_filter;
  int bootstrap_b = 100;
  std::uint64_t seed = 0;
  double profile_level = 0.95;
  std::string output_dir = "out";
};

std::optional<int> opt_int(const json& j, const std::string& key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<int>();
}

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  c.measurement_year = j.at("measurement_year").get<int>();
  c.y_min = j.at("y_min").get<int>();
  c.paint_series = j.at("paint_series").get<std::string>();
  c.paint_zero_before = opt_int(j, "paint_zero_before");
  c.paint_zero_after = opt_int(j, "paint_zero_after");
  c.paint_scale = j.value("paint_scale", 1.0);
  c.gas_series = j.at("gas_series").get<std::string>();
  c.gas_zero_before = opt_int(j, "gas_zero_before");
  c.gas_zero_after = opt_int(j, "gas_zero_after");
  c.gas_scale = j.value("gas_scale", 1.0);
  c.gas_impute_reference = j.value("gas_impute_reference", std::string{});
  c.gas_impute_window_first = opt_int(j, "gas_impute_window_first");
  c.gas_impute_window_last = opt_int(j, "gas_impute_window_last");
  c.samples = j.at("samples").get<std::string>();
  if (j.contains("site_filter") && !j["site_filter"].get<std::string>().empty()) {
    std::stringstream ss(j["site_filter"].get<std::string>());
    std::string item;
    while (std::getline(ss, item, ',')) {
      c.site_filter.push_back(site_type_from_string(item));
    }
  }
  c.bootstrap_b = j.value("bootstrap_b", 100);
  c.seed = j.value("seed", std::uint64_t{0});
  c.profile_level = j.value("profile_level", 0.95);
  c.output_dir = j.value("output_dir", std::string{"out"});
  if (c.measurement_year < c.y_min) {
    throw std::runtime_error("config: measurement_year < y_min");
  }
  if (c.bootstrap_b < 1) throw std::runtime_error("config: bootstrap_b must be >= 1");
  return c;
}

void apply_seed_env(RunConfig& c) {
  if (const char* env = std::getenv("APPORTION_SEED")) {
    c.seed = std::stoull(env);
  }
}

CumulativeExposure build_exposure(const std::string& series_path,
                                  const SeriesPolicy& policy,
                                  const std::string& impute_reference,
                                  std::optional<int> window_first,
                                  std::optional<int> window_last,
                                  int measurement_year, int y_min) {
  YearlySeries series = read_series_csv(series_path);
  if (!impute_reference.empty()) {
    if (!window_first || !window_last) {
      throw std::runtime_error("imputation requires a fit window");
    }
    YearlySeries reference = read_series_csv(impute_reference);
    series = impute_proportional(series, reference, {*window_first, *window_last})
                 .filled;
  }
  series = apply_policy(series, policy);
  if (series.first_year() > y_min || series.last_year() < measurement_year) {
    series = series.extended(std::min(series.first_year(), y_min),
                             std::max(series.last_year(), measurement_year));
  }
  return cumulate(series, measurement_year, y_min);
}

struct LoadedRun {
  CumulativeExposure paint;
  CumulativeExposure gas;
  Dataset dataset;
};

LoadedRun ingest(const RunConfig& c) {
  SeriesPolicy paint_policy{c.paint_zero_before, c.paint_zero_after, c.paint_scale};
  SeriesPolicy gas_policy{c.gas_zero_before, c.gas_zero_after, c.gas_scale};
  CumulativeExposure paint =
      build_exposure(c.paint_series, paint_policy, "", std::nullopt, std::nullopt,
                     c.measurement_year, c.y_min);
  CumulativeExposure gas = build_exposure(
      c.gas_series, gas_policy, c.gas_impute_reference, c.gas_impute_window_first,
      c.gas_impute_window_last, c.measurement_year, c.y_min);
  auto samples = read_samples_csv(c.samples);
  Dataset dataset = join_samples(samples, paint, gas, c.site_filter);
  if (dataset.points.empty()) {
    throw std::runtime_error("ingest: no usable samples after exclusions");
  }
  return LoadedRun{std::move(paint), std::move(gas), std::move(dataset)};
}

// staged output: everything lands as .partial, then renames at commit
class OutputBundle {
 public:
  explicit OutputBundle(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    fs::create_directories(dir_ / "plotdata");
  }
  fs::path stage(const std::string& name) {
    fs::path p = dir_ / (name + ".partial");
    staged_.emplace_back(p, dir_ / name);
    return p;
  }
  void commit() {
    for (const auto& [from, to] : staged_) fs::rename(from, to);
    staged_.clear();
  }
  ~OutputBundle() {
    for (const auto& [from, to] : staged_) {
      std::error_code ec;
      fs::remove(from, ec);
    }
  }

 private:
  fs::path dir_;
  std::vector<std::pair<fs::path, fs::path>> staged_;
};

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

std::string param_name(int k) {
  return k == 0 ? "background" : (k == 1 ? "paint_rate" : "gas_rate");
}

void write_exclusions_csv(const fs::path& path, const Dataset& ds) {
  std::ofstream f(path);
  f << "id,reason\n";
  for (const auto& e : ds.exclusions) f << e.id << "," << e.reason << "\n";
}

void write_fig1_plotdata(OutputBundle& bundle, const LoadedRun& run,
                         const FitResult& fit, const BootstrapResult& boot) {
  // per-sample scatter with lowess(0.7) over year built
  const auto& pts = run.dataset.points;
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pts[a].year_built < pts[b].year_built;
  });
  std::vector<double> xs, ys;
  for (std::size_t i : order) {
    xs.push_back(static_cast<double>(pts[i].year_built));
    ys.push_back(pts[i].log_concentration);
  }
  auto smooth = lowess(xs, ys, 0.7, 3);
  {
    std::ofstream f(bundle.stage("plotdata/concentration_by_year.csv"));
    f.precision(17);
    f << "year,log_concentration,lowess\n";
    for (std::size_t j = 0; j < xs.size(); ++j) {
      f << xs[j] << "," << ys[j] << "," << smooth[j] << "\n";
    }
  }
  // fitted log mean by year with +/- one bootstrap SE
  {
    std::ofstream f(bundle.stage("plotdata/fitted_by_year.csv"));
    f.precision(17);
    f << "year,fitted_log,lower,upper\n";
    int y0 = std::max(run.paint.y_min(), run.gas.y_min());
    int y1 = std::min(run.paint.measurement_year(), run.gas.measurement_year());
    for (int y = y0; y <= y1; ++y) {
      DesignPoint p{run.paint.value(y), run.gas.value(y), 0.0, y};
      double mu = log_mean(fit.theta, p).mu_log;
      double mean = 0.0, m2 = 0.0;
      std::size_t count = 0;
      for (const auto& rep : boot.replicates) {
        double eta = linear_predictor(rep.theta, p);
        if (eta <= 0.0) continue;
        double v = std::log(eta);
        ++count;
        double d = v - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (v - mean);
      }
      double se = count > 1 ? std::sqrt(m2 / static_cast<double>(count - 1)) : 0.0;
      f << y << "," << mu << "," << mu - se << "," << mu + se << "\n";
    }
  }
}

int cmd_run(const RunConfig& config, bool fit_only, bool with_bootstrap,
            bool with_profile, bool with_apportion, bool with_diagnostics) {
  LoadedRun run = ingest(config);
  FitResult fit_result = fit(run.dataset.points);

  std::optional<BootstrapResult> boot;
  if (with_bootstrap || with_apportion || with_diagnostics) {
    BootstrapOptions opts;
    opts.replicates = config.bootstrap_b;
    opts.seed = config.seed;
    boot = residual_bootstrap(fit_result, run.dataset.points, opts);
  }

  OutputBundle bundle{config.output_dir};
  {
    json fj = fit_result.to_json();
    fj["schema_version"] = kSchemaVersion;
    auto se = asymptotic_se(fit_result);
    fj["se"] = {{"background", se.se[0]},
                {"paint_rate", se.se[1]},
                {"gas_rate", se.se[2]}};
    write_json_file(bundle.stage("fit.json"), fj);
  }
  write_exclusions_csv(bundle.stage("exclusions.csv"), run.dataset);

  if (boot) {
    json bj = boot->to_json();
    bj["schema_version"] = kSchemaVersion;
    write_json_file(bundle.stage("bootstrap.json"), bj);
  }

  if (with_profile && !fit_only) {
    json intervals = json::array();
    for (int k = 0; k < 3; ++k) {
      ProfileOptions popts;
      popts.level = config.profile_level;
      ProfileInterval pi = profile_interval(fit_result, run.dataset.points, k, popts);
      json pj = pi.to_json();
      pj["parameter_name"] = param_name(k);
      intervals.push_back(pj);
      write_trace_csv(pi.trace,
                      bundle.stage("profile_" + param_name(k) + ".csv").string(),
                      param_name(k), "profile_loglik");
    }
    write_json_file(bundle.stage("profile.json"),
                    json{{"schema_version", kSchemaVersion},
                         {"intervals", intervals}});
  }

  if (with_apportion && !fit_only) {
    ApportionmentCurve curve =
        efc_curve(fit_result, run.paint, run.gas, boot ? &*boot : nullptr);
    write_curve_csv(curve, bundle.stage("efc_curve.csv").string());
    write_curve_csv(curve, bundle.stage("plotdata/efc_bands.csv").string());
    json cj = curve.to_json();
    cj["schema_version"] = kSchemaVersion;
    json crossings = json::array();
    for (const auto& c : crossing_years(curve)) {
      crossings.push_back({{"component_a", c.component_a},
                           {"component_b", c.component_b},
                           {"year", c.year},
                           {"fraction", c.fraction}});
    }
    cj["crossings"] = crossings;
    write_json_file(bundle.stage("efc_curve.json"), cj);
  }

  if (with_diagnostics && !fit_only) {
    DiagnosticsReport report =
        run_diagnostics(fit_result, run.dataset.points, boot ? &*boot : nullptr);
    json dj = report.to_json();
    dj["schema_version"] = kSchemaVersion;
    write_json_file(bundle.stage("diagnostics.json"), dj);
    std::vector<std::string> ids;
    for (const auto& r : run.dataset.records) ids.push_back(r.id);
    write_diagnostics_csv(report, fit_result, ids,
                          bundle.stage("diagnostics_samples.csv").string());
  }

  if (boot) write_fig1_plotdata(bundle, run, fit_result, *boot);

  bundle.commit();
  std::cout << "theta = (" << fit_result.theta.background << ", "
            << fit_result.theta.paint_rate << ", " << fit_result.theta.gas_rate
            << "), sigma = " << std::sqrt(fit_result.sigma2) << ", n = "
            << run.dataset.points.size() << " (excluded "
            << run.dataset.exclusions.size() << ")\n";
  std::cout << "outputs written to " << config.output_dir << "\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path) {
  json j = load_json(config_path);
  CumulativeExposure paint = read_exposure_csv(j.at("paint_exposure").get<std::string>());
  CumulativeExposure gas = read_exposure_csv(j.at("gas_exposure").get<std::string>());

  std::vector<std::pair<int, double>> weights;
  std::string yw = j.value("year_weights", std::string{"uniform"});
  int y0 = std::max(paint.y_min(), gas.y_min());
  int y1 = std::min(paint.measurement_year(), gas.measurement_year());
  if (yw == "mn-like") {
    for (int y = y0; y <= y1; ++y) weights.emplace_back(y, y <= 1930 ? 1.0 : 0.15);
  } else if (yw == "us-like") {
    for (int y = y0; y <= y1; ++y) weights.emplace_back(y, y <= 1930 ? 0.2 : 1.0);
  } else if (yw == "uniform") {
    for (int y = y0; y <= y1; ++y) weights.emplace_back(y, 1.0);
  } else {
    YearlySeries ws = read_series_csv(yw);
    for (int y = ws.first_year(); y <= ws.last_year(); ++y) {
      if (ws.at(y)) weights.emplace_back(y, *ws.at(y));
    }
  }

  SimConfig sim{
      Theta{j.at("theta_background").get<double>(),
            j.at("theta_paint_rate").get<double>(),
            j.at("theta_gas_rate").get<double>()},
      j.at("sigma").get<double>(),
      paint,
      gas,
      std::move(weights),
      j.at("n").get<int>(),
      j.value("seed", std::uint64_t{0}),
  };
  if (const char* env = std::getenv("APPORTION_SEED")) sim.seed = std::stoull(env);

  std::optional<ErrorConfig> err;
  if (j.value("epsilon_sd", 0.0) > 0.0 || j.value("delta_sd", 0.0) > 0.0 ||
      j.value("epsilon_mean", 1.0) != 1.0) {
    err = ErrorConfig{j.value("epsilon_mean", 1.0), j.value("epsilon_sd", 0.0),
                      j.value("shared", false), j.value("delta_sd", 0.0)};
  }
  auto samples = simulate(sim, err ? &*err : nullptr);
  write_samples_csv(samples, out_path);
  std::cout << "wrote " << samples.size() << " samples to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soil-lead source apportionment: transform-both-sides nonlinear "
               "regression on cumulative lead-exposure predictors"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> b_flag;
  std::optional<std::string> outdir_flag, samples_flag, site_filter_flag;

  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "run config (JSON)")->required();
    cmd->add_option("--seed", seed_flag, "override config seed");
    cmd->add_option("-B,--bootstrap-b", b_flag, "override bootstrap replicate count");
    cmd->add_option("-o,--output-dir", outdir_flag, "override output directory");
    cmd->add_option("--samples", samples_flag, "override samples CSV path");
    cmd->add_option("--site-filter", site_filter_flag,
                    "comma list of site types to keep");
  };

  auto* c_fit = app.add_subcommand("fit", "fit the model and write fit.json");
  add_run_flags(c_fit);
  auto* c_boot = app.add_subcommand("bootstrap", "fit plus residual bootstrap");
  add_run_flags(c_boot);
  auto* c_prof = app.add_subcommand("profile", "profile-likelihood intervals");
  add_run_flags(c_prof);
  auto* c_app = app.add_subcommand("apportion", "fractional-contribution curves");
  add_run_flags(c_app);
  auto* c_diag = app.add_subcommand("diagnose", "regression diagnostics battery");
  add_run_flags(c_diag);
  auto* c_run = app.add_subcommand("run", "full pipeline");
  add_run_flags(c_run);

  auto* c_sim = app.add_subcommand("simulate", "generate a synthetic samples CSV");
  std::string sim_out = "samples.csv";
  c_sim->add_option("-c,--config", config_path, "simulator config (JSON)")->required();
  c_sim->add_option("-o,--out", sim_out, "output samples CSV");

  auto* c_exp = app.add_subcommand("build-exposure",
                                   "cumulate a yearly series into an exposure CSV");
  std::string series_path, impute_ref;
  int exp_year = 0, exp_ymin = 0;
  std::optional<int> zb, za, iw_first, iw_last;
  double scale = 1.0;
  c_exp->add_option("--series", series_path, "yearly series CSV")->required();
  c_exp->add_option("--measurement-year", exp_year)->required();
  c_exp->add_option("--y-min", exp_ymin)->required();
  c_exp->add_option("--zero-before", zb);
  c_exp->add_option("--zero-after", za);
  c_exp->add_option("--scale", scale);
  c_exp->add_option("--impute-reference", impute_ref);
  c_exp->add_option("--impute-window-first", iw_first);
  c_exp->add_option("--impute-window-last", iw_last);
  c_exp->add_option("-o,--out", out_path, "output exposure CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_sim->parsed()) return cmd_simulate(config_path, sim_out);
    if (c_exp->parsed()) {
      SeriesPolicy policy{zb, za, scale};
      CumulativeExposure exposure = build_exposure(
          series_path, policy, impute_ref, iw_first, iw_last, exp_year, exp_ymin);
      write_exposure_csv(exposure, out_path);
      std::cout << "wrote exposure to " << out_path << "\n";
      return 0;
    }
    RunConfig config = parse_run_config(load_json(config_path));
    apply_seed_env(config);
    if (seed_flag) config.seed = *seed_flag;  // flags win over env and config
    if (b_flag) config.bootstrap_b = *b_flag;
    if (outdir_flag) config.output_dir = *outdir_flag;
    if (samples_flag) config.samples = *samples_flag;
    if (site_filter_flag) {
      config.site_filter.clear();
      std::stringstream ss(*site_filter_flag);
      std::string item;
      while (std::getline(ss, item, ',')) {
        config.site_filter.push_back(site_type_from_string(item));
      }
    }

    bool is_run = c_run->parsed();
    return cmd_run(config, c_fit->parsed(),
                   c_boot->parsed() || c_app->parsed() || c_diag->parsed() || is_run,
                   c_prof->parsed() || is_run, c_app->parsed() || is_run,
                   c_diag->parsed() || is_run);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
