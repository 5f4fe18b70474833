// evstudy: simulate, assign, estimate, diagnose, distribution.
//
// Exit codes: 0 ok, 1 unexpected error, 2 configuration/spec error,
// 3 data error, 4 non-convergence, 5 degenerate model or covariance,
// 6 every diagnostic suite failed.

#include "evstudy/codebook.hpp"
#include "evstudy/design.hpp"
#include "evstudy/dgp.hpp"
#include "evstudy/errors.hpp"
#include "evstudy/estimator.hpp"
#include "evstudy/geo.hpp"
#include "evstudy/inference.hpp"
#include "evstudy/panel.hpp"
#include "evstudy/parallel.hpp"
#include "evstudy/treatment.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace evstudy;

namespace {

enum Exit { kOk = 0, kUnexpected = 1, kConfig = 2, kData = 3, kConvergence = 4,
            kDegenerate = 5, kAllSuitesFailed = 6 };

json read_json_file(const std::string &path, const std::string &what) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(what + " not found or unreadable: " + path);
  }
  try {
    return json::parse(in);
  } catch (const json::exception &e) {
    throw ConfigError(what + " " + path + " is not valid JSON: " + e.what());
  }
}

std::ifstream open_input(const std::string &path, const std::string &what) {
  if (path.empty()) {
    throw ConfigError("missing input: " + what);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in || fs::is_directory(path)) {
    throw DataError("cannot read " + what + " file: " + path);
  }
  return in;
}

class Output {
public:
  Output(std::string dir, std::string primary, bool to_stdout)
      : dir_(std::move(dir)), primary_(std::move(primary)), stdout_(to_stdout) {
    if (!dir_.empty()) {
      std::error_code ec;
      fs::create_directories(dir_, ec);
      if (ec) {
        throw ConfigError("cannot create output directory " + dir_ + ": " +
                          ec.message());
      }
    }
  }

  void write(const std::string &name, const std::string &content) const {
    if (stdout_ && name == primary_) {
      std::cout << content;
      std::cout.flush();
    }
    if (dir_.empty()) {
      return;
    }
    const auto path = fs::path(dir_) / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) {
      throw ConfigError("cannot write " + path.string());
    }
  }

  void write_json(const std::string &name, const json &j) const {
    write(name, j.dump(2) + "\n");
  }

private:
  std::string dir_;
  std::string primary_;
  bool stdout_;
};

// Settings shared by commands that read the student panel. Every field can
// come from the config file; flags take precedence.
struct PipelineConfig {
  std::string panel;
  std::string centroids;
  std::string events;
  std::optional<json> codebook; // inline object
  std::string codebook_path;
  design::ModelSpec spec;
  std::optional<std::string> mode;
  double tol = 1e-8;
  int max_iter = 10000;
  std::vector<int> excluded_years{2011, 2012};
  std::string standardize = "per_year";
  std::vector<double> radii{10.0, 25.0, 50.0};

  json to_json() const {
    json j{{"panel", panel},
           {"centroids", centroids},
           {"events", events},
           {"spec", spec.to_json()},
           {"tol", tol},
           {"max_iter", max_iter},
           {"excluded_years", excluded_years},
           {"standardize", standardize},
           {"radii", radii}};
    j["codebook"] = codebook ? *codebook : json(nullptr);
    return j;
  }
};

struct PipelineFlags {
  std::string config;
  std::string panel;
  std::string centroids;
  std::string events;
  std::string codebook;
  std::string spec;
  std::string mode;
  double tol = 0.0;
  int max_iter = 0;
  std::string out;
  bool to_stdout = false;
  CLI::Option *tol_opt = nullptr;
  CLI::Option *max_iter_opt = nullptr;
};

void add_pipeline_flags(CLI::App *cmd, PipelineFlags &f, bool with_spec) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--panel", f.panel, "students.csv");
  cmd->add_option("--centroids", f.centroids, "centroids.csv");
  cmd->add_option("--events", f.events, "events.csv");
  cmd->add_option("--codebook", f.codebook, "codebook JSON (default: built-in)");
  if (with_spec) {
    cmd->add_option("--spec", f.spec, "model spec JSON");
    cmd->add_option("--mode", f.mode, "pretrend|semidynamic|placebo|balance");
    f.tol_opt = cmd->add_option("--tol", f.tol, "absorption tolerance");
    f.max_iter_opt = cmd->add_option("--max-iter", f.max_iter, "absorption sweeps");
  }
  cmd->add_option("--out", f.out, "output directory")->required();
  cmd->add_flag("--stdout", f.to_stdout, "also print the main artifact to stdout");
}

PipelineConfig resolve_pipeline(const PipelineFlags &f) {
  PipelineConfig c;
  json spec_json = json::object();
  if (!f.config.empty()) {
    const json j = read_json_file(f.config, "config file");
    if (!j.is_object()) {
      throw ConfigError("config file must hold a JSON object: " + f.config);
    }
    static const std::set<std::string> keys{
        "panel", "centroids", "events", "codebook", "spec", "mode", "tol",
        "max_iter", "excluded_years", "standardize", "radii"};
    for (const auto &[key, _] : j.items()) {
      if (!keys.count(key)) {
        throw ConfigError("config file: unknown key '" + key + "'");
      }
    }
    try {
      if (j.contains("panel")) c.panel = j["panel"].get<std::string>();
      if (j.contains("centroids")) c.centroids = j["centroids"].get<std::string>();
      if (j.contains("events")) c.events = j["events"].get<std::string>();
      if (j.contains("codebook") && !j["codebook"].is_null()) {
        if (j["codebook"].is_string()) {
          c.codebook_path = j["codebook"].get<std::string>();
        } else {
          c.codebook = j["codebook"];
        }
      }
      if (j.contains("spec")) {
        spec_json = j["spec"].is_string()
                        ? read_json_file(j["spec"].get<std::string>(), "spec file")
                        : j["spec"];
      }
      if (j.contains("mode")) c.mode = j["mode"].get<std::string>();
      if (j.contains("tol")) c.tol = j["tol"].get<double>();
      if (j.contains("max_iter")) c.max_iter = j["max_iter"].get<int>();
      if (j.contains("excluded_years")) {
        c.excluded_years = j["excluded_years"].get<std::vector<int>>();
      }
      if (j.contains("standardize")) c.standardize = j["standardize"].get<std::string>();
      if (j.contains("radii")) c.radii = j["radii"].get<std::vector<double>>();
    } catch (const json::exception &e) {
      throw ConfigError("config file " + f.config + ": " + e.what());
    }
  }
  if (!f.panel.empty()) c.panel = f.panel;
  if (!f.centroids.empty()) c.centroids = f.centroids;
  if (!f.events.empty()) c.events = f.events;
  if (!f.codebook.empty()) {
    c.codebook_path = f.codebook;
    c.codebook.reset();
  }
  if (!f.spec.empty()) {
    spec_json = read_json_file(f.spec, "spec file");
  }
  if (!f.mode.empty()) c.mode = f.mode;
  if (f.tol_opt && f.tol_opt->count()) c.tol = f.tol;
  if (f.max_iter_opt && f.max_iter_opt->count()) c.max_iter = f.max_iter;

  if (!c.codebook_path.empty()) {
    c.codebook = read_json_file(c.codebook_path, "codebook");
  }
  if (c.mode) {
    spec_json["mode"] = *c.mode;
  }
  c.spec = design::ModelSpec::from_json(spec_json);
  if (!(c.tol > 0.0)) {
    throw ConfigError("tol must be positive");
  }
  if (c.max_iter < 1) {
    throw ConfigError("max_iter must be at least 1");
  }
  panel::parse_scope(c.standardize);
  geo::Radii{c.radii}.validate();
  return c;
}

struct Loaded {
  panel::Panel panel;
  geo::EventMap map;
};

Loaded load(const PipelineConfig &c) {
  const Codebook codebook =
      c.codebook ? Codebook::from_json(*c.codebook) : Codebook::defaults();
  const geo::Radii radii{c.radii};

  auto cin = open_input(c.centroids, "centroids");
  const auto centroids = geo::read_centroids(cin, c.centroids);
  auto ein = open_input(c.events, "events");
  const auto events = geo::read_events(ein, c.events);
  auto map = geo::assign_events(centroids, events, radii);

  auto pin = open_input(c.panel, "panel");
  auto records = panel::read_students(pin, c.panel, codebook);
  panel::IngestReport report;
  report.rows_read = records.size();
  panel::FilterConfig filter;
  filter.excluded_years = std::set<int>(c.excluded_years.begin(), c.excluded_years.end());
  records = panel::filter_records(std::move(records), filter, &report);
  if (records.empty()) {
    throw SampleError("no rows left after filtering " + c.panel);
  }
  auto p = panel::build_panel(std::move(records), codebook,
                              panel::parse_scope(c.standardize), report);
  std::cerr << "ingest: " << report.rows_read << " rows read, "
            << p.report.rows_retained << " retained\n";
  return {std::move(p), std::move(map)};
}

estimator::FitOptions fit_options(const PipelineConfig &c) {
  estimator::FitOptions o;
  o.tol = c.tol;
  o.max_iter = c.max_iter;
  return o;
}

void log_fit(const std::string &label, const estimator::FitResult &f) {
  std::cerr << label << ": N = " << f.n_obs << ", clusters = " << f.n_clusters
            << ", sweeps = " << f.iterations << "\n";
  if (!f.dropped_columns.empty()) {
    std::cerr << label << ": dropped as collinear:";
    for (const auto &n : f.dropped_columns) {
      std::cerr << ' ' << n;
    }
    std::cerr << "\n";
  }
  if (f.singletons_dropped) {
    std::cerr << label << ": " << f.singletons_dropped
              << " singleton rows dropped (no peers)\n";
  }
  if (!f.inference_error.empty()) {
    std::cerr << label << ": " << f.inference_error << "\n";
  }
}

std::string table_text(const estimator::FitResult &f, const std::string &header,
                       int report_k_max) {
  std::ostringstream os;
  estimator::write_table(os, {{header, &f}}, estimator::reported_rows(f, report_k_max),
                         f.intercept.has_value());
  return os.str();
}

std::string plot_text(const std::vector<inference::PlotRow> &rows) {
  std::ostringstream os;
  inference::write_plot_csv(os, rows);
  return os.str();
}

int cmd_simulate(const std::string &config_path, CLI::Option *seed_opt,
                 std::uint64_t seed, const std::string &out_dir, bool to_stdout) {
  dgp::DgpConfig cfg;
  if (!config_path.empty()) {
    cfg = dgp::DgpConfig::from_json(read_json_file(config_path, "config file"));
  }
  if (seed_opt->count()) {
    cfg.seed = seed;
  }
  cfg.validate();
  const auto sim = dgp::simulate_panel(cfg);
  Output out(out_dir, "truth.json", to_stdout);
  {
    std::ostringstream os;
    panel::write_students(os, sim.records, sim.codebook);
    out.write("students.csv", os.str());
  }
  {
    std::ostringstream os;
    geo::write_centroids(os, sim.centroids);
    out.write("centroids.csv", os.str());
  }
  {
    std::ostringstream os;
    geo::write_events(os, sim.events);
    out.write("events.csv", os.str());
  }
  out.write_json("truth.json", sim.truth.to_json());
  out.write_json("resolved_config.json", cfg.to_json());
  std::cerr << "simulate: " << sim.records.size() << " student rows, "
            << sim.centroids.size() << " municipalities\n";
  return kOk;
}

int cmd_assign(const PipelineFlags &f) {
  PipelineFlags g = f;
  const auto c = resolve_pipeline(g);
  const geo::Radii radii{c.radii};
  auto cin = open_input(c.centroids, "centroids");
  const auto centroids = geo::read_centroids(cin, c.centroids);
  auto ein = open_input(c.events, "events");
  const auto events = geo::read_events(ein, c.events);
  const auto map = geo::assign_events(centroids, events, radii);
  Output out(f.out, "eventmap.csv", f.to_stdout);
  std::ostringstream os;
  geo::write_eventmap(os, map);
  out.write("eventmap.csv", os.str());
  out.write_json("resolved_config.json",
                 {{"centroids", c.centroids}, {"events", c.events}, {"radii", c.radii}});
  return kOk;
}

int cmd_estimate(const PipelineFlags &f) {
  const auto c = resolve_pipeline(f);
  Output out(f.out,
             c.spec.mode == design::Mode::Balance ? "balance_table.txt" : "table.txt",
             f.to_stdout);
  out.write_json("resolved_config.json", c.to_json());
  const auto data = load(c);
  out.write_json("ingest_report.json", data.panel.report.to_json());
  const auto opt = fit_options(c);

  if (c.spec.mode == design::Mode::Balance) {
    const auto suite = inference::balance_suite(data.panel, data.map, c.spec,
                                                c.spec.balance_covariates, opt);
    json fits = json::array();
    for (const auto &e : suite.entries) {
      if (e.fit) {
        log_fit("balance " + e.covariate, *e.fit);
        fits.push_back({{"covariate", e.covariate}, {"fit", e.fit->to_json()}});
      } else {
        std::cerr << "balance " << e.covariate << ": " << e.error_type << ": "
                  << e.error << "\n";
        fits.push_back({{"covariate", e.covariate},
                        {"error_type", e.error_type},
                        {"error", e.error}});
      }
    }
    out.write_json("fit.json", fits);
    std::ostringstream os;
    inference::write_balance_table(os, suite, c.spec.report_k_max);
    out.write("balance_table.txt", os.str());
    if (suite.succeeded() == 0) {
      throw DegenerateModelError("no balance regression could be estimated");
    }
    return kOk;
  }

  estimator::FitResult fit;
  if (c.spec.mode == design::Mode::Placebo) {
    std::vector<std::string> warnings;
    fit = inference::placebo_run(data.panel, data.map, c.spec, opt, &warnings);
    for (const auto &w : warnings) {
      std::cerr << "warning: " << w << "\n";
    }
  } else {
    const auto d = design::build_design(data.panel, data.map, c.spec);
    out.write_json("design.json", d.sidecar());
    fit = estimator::fit(d, opt);
  }
  log_fit(design::to_string(c.spec.mode), fit);
  out.write_json("fit.json", fit.to_json());
  out.write("table.txt", table_text(fit, "Standardized grade", c.spec.report_k_max));
  const std::optional<int> k_max =
      c.spec.mode == design::Mode::Pretrend ? std::optional<int>(-2)
                                            : std::optional<int>(c.spec.report_k_max);
  out.write("plot.csv", plot_text(inference::plot_rows(fit, c.spec.ci_level, k_max)));
  return kOk;
}

int cmd_diagnose(const PipelineFlags &f) {
  const auto c = resolve_pipeline(f);
  Output out(f.out, "diagnostics.json", f.to_stdout);
  out.write_json("resolved_config.json", c.to_json());
  const auto data = load(c);
  const auto report = inference::run_diagnostics(data.panel, data.map, c.spec,
                                                 fit_options(c));
  if (report.pretrend_fit) {
    log_fit("pretrend", *report.pretrend_fit);
    out.write("pretrend_plot.csv",
              plot_text(inference::plot_rows(*report.pretrend_fit, c.spec.ci_level, -2)));
  }
  if (!report.pretrend_error.empty()) {
    std::cerr << "pretrend: " << report.pretrend_error << "\n";
  }
  if (report.pretrend_wald) {
    std::cerr << "pretrend: joint test statistic " << report.pretrend_wald->statistic
              << ", p = " << report.pretrend_wald->p_value << "\n";
  }
  if (report.placebo_fit) {
    log_fit("placebo", *report.placebo_fit);
    out.write("placebo_plot.csv",
              plot_text(inference::plot_rows(*report.placebo_fit, c.spec.ci_level,
                                             c.spec.report_k_max)));
  } else {
    std::cerr << "placebo: " << report.placebo_error << "\n";
  }
  for (const auto &e : report.balance.entries) {
    if (!e.fit) {
      std::cerr << "balance " << e.covariate << ": " << e.error_type << ": "
                << e.error << "\n";
    }
  }
  if (report.balance.succeeded() > 0) {
    std::ostringstream os;
    inference::write_balance_table(os, report.balance, c.spec.report_k_max);
    out.write("balance_table.txt", os.str());
  }
  for (const auto &w : report.warnings) {
    std::cerr << "warning: " << w << "\n";
  }
  out.write_json("diagnostics.json", report.to_json());
  if (report.suites_succeeded() == 0) {
    std::cerr << "diagnose: every suite failed\n";
    return kAllSuitesFailed;
  }
  return kOk;
}

int cmd_distribution(const PipelineFlags &f) {
  const auto c = resolve_pipeline(f);
  Output out(f.out, "distribution.txt", f.to_stdout);
  out.write_json("resolved_config.json", c.to_json());
  const auto data = load(c);
  const auto ks = treatment::event_times(data.panel, data.map);
  const auto &radii = data.map.radii();
  std::vector<std::string> group_of_row(data.panel.rows.size());
  std::map<int, std::string> present;
  std::vector<std::string> muni_label(data.panel.municipalities.size());
  for (std::size_t m = 0; m < muni_label.size(); ++m) {
    const auto &a = data.map.at(data.panel.municipalities[m]);
    muni_label[m] = geo::buffer_label(a.buffer, radii);
    present.emplace(geo::buffer_rank(a.buffer) * 1000 + static_cast<int>(a.buffer.index),
                    muni_label[m]);
  }
  for (std::size_t i = 0; i < group_of_row.size(); ++i) {
    group_of_row[i] = muni_label[data.panel.rows[i].municipality];
  }
  std::vector<std::string> groups;
  for (const auto &[rank, label] : present) {
    groups.push_back(label);
  }
  const auto dist = treatment::treatment_distribution(ks, group_of_row, groups);
  std::ostringstream csv_out, txt_out;
  treatment::write_distribution_csv(csv_out, dist);
  treatment::write_distribution_text(txt_out, dist);
  out.write("distribution.csv", csv_out.str());
  out.write("distribution.txt", txt_out.str());
  return kOk;
}

int exit_code_for(const std::exception &e) {
  if (dynamic_cast<const ConfigError *>(&e)) return kConfig;
  if (dynamic_cast<const DataError *>(&e)) return kData;
  if (dynamic_cast<const ConvergenceError *>(&e)) return kConvergence;
  if (dynamic_cast<const DegenerateModelError *>(&e)) return kDegenerate;
  if (dynamic_cast<const InferenceError *>(&e)) return kDegenerate;
  return kUnexpected;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Staggered-adoption event-study toolkit"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (default: all cores)")
      ->check(CLI::NonNegativeNumber);

  auto *simulate = app.add_subcommand("simulate", "generate a synthetic panel");
  std::string sim_config, sim_out;
  std::uint64_t sim_seed = 0;
  bool sim_stdout = false;
  simulate->add_option("--config", sim_config, "DGP config JSON");
  auto *seed_opt = simulate->add_option("--seed", sim_seed, "RNG seed");
  simulate->add_option("--out", sim_out, "output directory")->required();
  simulate->add_flag("--stdout", sim_stdout, "also print truth.json to stdout");
  simulate->add_option("--threads", threads, "worker threads");

  PipelineFlags assign_f, estimate_f, diagnose_f, dist_f;
  auto *assign = app.add_subcommand("assign", "assign municipalities to events");
  add_pipeline_flags(assign, assign_f, false);
  assign->add_option("--threads", threads, "worker threads");
  auto *estimate = app.add_subcommand("estimate", "fit one specification");
  add_pipeline_flags(estimate, estimate_f, true);
  estimate->add_option("--threads", threads, "worker threads");
  auto *diagnose = app.add_subcommand("diagnose", "pretrend, placebo, balance");
  add_pipeline_flags(diagnose, diagnose_f, true);
  diagnose->add_option("--threads", threads, "worker threads");
  auto *distribution = app.add_subcommand("distribution", "event-time distribution");
  add_pipeline_flags(distribution, dist_f, false);
  distribution->add_option("--threads", threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  set_thread_count(threads);

  try {
    if (*simulate) {
      return cmd_simulate(sim_config, seed_opt, sim_seed, sim_out, sim_stdout);
    }
    if (*assign) {
      return cmd_assign(assign_f);
    }
    if (*estimate) {
      return cmd_estimate(estimate_f);
    }
    if (*diagnose) {
      return cmd_diagnose(diagnose_f);
    }
    if (*distribution) {
      return cmd_distribution(dist_f);
    }
  } catch (const ConvergenceError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConvergence;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kUnexpected;
}
