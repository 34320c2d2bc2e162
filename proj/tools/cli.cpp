#include "cli.hpp"

#include "config.hpp"

#include "fedmuon/audit.hpp"
#include "fedmuon/csv.hpp"
#include "fedmuon/error.hpp"
#include "fedmuon/parallel.hpp"
#include "fedmuon/suites.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace fedmuon::cli {

namespace fs = std::filesystem;

namespace {

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::InvalidArg:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::EmptyWorkerSet:
    case ErrorCode::InsufficientRuns:
    case ErrorCode::InsufficientPoints:
      return kExitConfig;
    case ErrorCode::NonFiniteInput:
    case ErrorCode::NonFiniteState:
    case ErrorCode::ZeroMatrix:
      return kExitNumerical;
    default:
      return kExitError;
  }
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << body;
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + dir.string() + "': " + ec.message());
}

// `--config` plus one `--key` option per run key; flag values override the file.
struct RunFlags {
  std::string config_path;
  std::map<std::string, std::string> values;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "key = value config or manifest file");
    for (const auto& key : run_keys()) {
      std::string names = "--" + key;
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      if (dashed != key) names += ",--" + dashed;
      app.add_option_function<std::string>(
          names, [this, key](const std::string& v) { values[key] = v; }, "run key '" + key + "'");
    }
  }

  KeyValues merged() const {
    KeyValues kv = config_path.empty() ? KeyValues{} : load_key_values(config_path);
    for (const auto& [k, v] : values) kv[k] = v;
    return kv;
  }
};

struct RunOutcome {
  Trajectory rows;
  NoiseModel noise;
  double seconds = 0.0;
};

RunOutcome execute(const RunSettings& settings) {
  const auto start = std::chrono::steady_clock::now();
  const ProblemInstance problem = build_problem(settings);
  RunOutcome outcome;
  outcome.noise = build_noise(settings);
  outcome.rows = run_federation(settings.federation, problem, outcome.noise);
  outcome.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return outcome;
}

int cmd_run(const RunFlags& flags, std::ostream& out) {
  const RunSettings settings = resolve_run_settings(flags.merged());
  const RunOutcome outcome = execute(settings);
  const fs::path dir(settings.out_dir);
  ensure_dir(dir);
  write_file(dir / "metrics.csv", metrics_csv(outcome.rows));
  write_file(dir / "manifest.txt", manifest_text(settings, outcome.noise, outcome.seconds));
  const FederationConfig& f = settings.federation;
  out << "run: " << outcome.rows.size() << " iterations, eta=" << format_double(f.eta)
      << " beta=" << format_double(f.beta) << " period=" << f.period
      << " avg_grad_norm=" << format_double(time_averaged_grad_norm(outcome.rows)) << "\n"
      << "wrote " << (dir / "metrics.csv").string() << " and "
      << (dir / "manifest.txt").string() << "\n";
  return kExitOk;
}

// --- audit -----------------------------------------------------------------

struct AuditFlags {
  std::string suite;
  std::string out_dir = ".";
  int threads = 0;
  int points = 0;
  int seeds = 0;
  double p = 0.0;
};

AuditReport run_audit_suite(const AuditFlags& flags, int threads) {
  const std::string& s = flags.suite;
  if (s == "consensus_x") {
    const ConsensusXResult r = run_consensus_x_suite(ConsensusXSuite{}, threads);
    AuditReport report = r.consensus;
    report.merge(r.update_norm);
    report.notes.push_back(std::to_string(r.runs) + " runs");
    return report;
  }
  if (s == "consensus_m" || s == "grad_err") {
    BoundSuite suite;
    suite.heavy_p = flags.p;
    if (flags.seeds > 0) suite.seeds = flags.seeds;
    const BoundEnsemble ensemble = run_bound_ensemble(suite, threads);
    return s == "consensus_m" ? consensus_m_report(ensemble) : grad_err_report(ensemble);
  }
  if (s == "rate") {
    RateSuite suite;
    suite.heavy_p = flags.p;
    if (flags.points > 0) suite.points = flags.points;
    if (flags.seeds > 0) suite.seeds = flags.seeds;
    return run_rate_suite(suite, threads).report;
  }
  if (s == "speedup") {
    SpeedupSuite suite;
    if (flags.seeds > 0) suite.seeds = flags.seeds;
    return run_speedup_suite(suite, threads).report;
  }
  if (s == "heavy_tail") {
    HeavyTailSuite suite;
    if (flags.seeds > 0) {
      suite.min_wins = (suite.min_wins * flags.seeds + suite.seeds - 1) / suite.seeds;
      suite.seeds = flags.seeds;
    }
    return run_heavy_tail_suite(suite, threads).report;
  }
  throw Error(ErrorCode::ConfigInvalid,
              "suite: unknown suite '" + s +
                  "' (expected consensus_x|consensus_m|grad_err|rate|speedup|heavy_tail)");
}

int cmd_audit(const AuditFlags& flags, std::ostream& out) {
  const int threads = resolve_threads(flags.threads);
  const AuditReport report = run_audit_suite(flags, threads);
  const fs::path dir(flags.out_dir);
  ensure_dir(dir);
  write_file(dir / "audit.csv", to_csv(report));
  out << report.to_text();
  out << "wrote " << (dir / "audit.csv").string() << "\n";
  return report.passed() ? kExitOk : kExitAuditFailed;
}

// --- sweep -----------------------------------------------------------------

std::string canonical_grid_key(const std::string& key) {
  if (key == "K") return "workers";
  if (key == "T") return "iters";
  if (key == "tau") return "period";
  std::string k = key;
  std::replace(k.begin(), k.end(), '-', '_');
  const auto& known = run_keys();
  if (k == "out" || std::find(known.begin(), known.end(), k) == known.end()) {
    throw Error(ErrorCode::ConfigInvalid, "grid: unknown key '" + key + "'");
  }
  return k;
}

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

GridAxis parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::ConfigInvalid, "grid: expected key=v1,v2,..., got '" + spec + "'");
  }
  GridAxis axis{canonical_grid_key(spec.substr(0, eq)), {}};
  std::stringstream values(spec.substr(eq + 1));
  std::string v;
  while (std::getline(values, v, ',')) {
    if (v.empty()) throw Error(ErrorCode::ConfigInvalid, "grid: empty value in '" + spec + "'");
    axis.values.push_back(v);
  }
  if (axis.values.empty()) {
    throw Error(ErrorCode::ConfigInvalid, "grid: no values for '" + axis.key + "'");
  }
  return axis;
}

struct SweepPoint {
  KeyValues assignment;  // grid keys only
  RunSettings settings;
  std::string status = "ok";
  Trajectory rows;
};

int cmd_sweep(const RunFlags& flags, const std::vector<std::string>& grid_specs,
              const std::string& out_dir, int threads_flag, std::ostream& out) {
  if (grid_specs.empty()) throw Error(ErrorCode::ConfigInvalid, "grid: empty grid");
  std::vector<GridAxis> axes;
  for (const auto& spec : grid_specs) {
    GridAxis axis = parse_axis(spec);
    for (const auto& a : axes) {
      if (a.key == axis.key) throw Error(ErrorCode::ConfigInvalid, "grid: duplicate key '" + axis.key + "'");
    }
    axes.push_back(std::move(axis));
  }

  const KeyValues base = flags.merged();
  std::vector<SweepPoint> points;
  std::vector<std::size_t> index(axes.size(), 0);
  while (true) {
    SweepPoint point;
    KeyValues kv = base;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      point.assignment[axes[a].key] = axes[a].values[index[a]];
      kv[axes[a].key] = axes[a].values[index[a]];
    }
    // Resolve every point up front so a bad grid fails before any work.
    point.settings = resolve_run_settings(kv);
    points.push_back(std::move(point));
    // Last axis varies fastest.
    std::size_t a = axes.size();
    while (a > 0 && ++index[a - 1] == axes[a - 1].values.size()) {
      index[a - 1] = 0;
      --a;
    }
    if (a == 0) break;
  }

  const fs::path root(out_dir);
  ensure_dir(root);
  std::vector<std::string> manifests(points.size());
  parallel_for(points.size(), resolve_threads(threads_flag), [&](std::size_t i) {
    SweepPoint& point = points[i];
    point.settings.federation.threads = 1;
    char name[32];
    std::snprintf(name, sizeof(name), "point_%03zu", i);
    const fs::path dir = root / name;
    ensure_dir(dir);
    try {
      const RunOutcome outcome = execute(point.settings);
      point.rows = outcome.rows;
      write_file(dir / "metrics.csv", metrics_csv(outcome.rows));
      write_file(dir / "manifest.txt",
                 manifest_text(point.settings, outcome.noise, outcome.seconds));
    } catch (const Error& e) {
      if (exit_code_for(e) != kExitNumerical) throw;
      point.status = "nonfinite";
      write_file(dir / "manifest.txt",
                 manifest_text(point.settings, build_noise(point.settings), 0.0));
    }
  });

  std::ostringstream summary;
  summary << "point";
  for (const auto& axis : axes) summary << "," << axis.key;
  summary << ",avg_grad_norm,avg_grad_norm_sq,final_grad_norm,status\n";
  int nonfinite = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const SweepPoint& p = points[i];
    summary << i;
    for (const auto& axis : axes) summary << "," << p.assignment.at(axis.key);
    if (p.status == "ok") {
      summary << "," << format_double(time_averaged_grad_norm(p.rows)) << ","
              << format_double(time_averaged_grad_norm_sq(p.rows)) << ","
              << format_double(p.rows.empty() ? 0.0 : p.rows.back().grad_norm);
    } else {
      ++nonfinite;
      summary << ",nan,nan,nan";
    }
    summary << "," << p.status << "\n";
  }
  write_file(root / "summary.csv", summary.str());
  out << "sweep: " << points.size() << " points (" << nonfinite << " non-finite); wrote "
      << (root / "summary.csv").string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated Muon simulation harness", "fedmuon"};
  app.set_version_flag("--version", std::string(FEDMUON_VERSION_STRING));
  app.require_subcommand(1);

  RunFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "run one federated experiment");
  run_flags.attach(*run);

  AuditFlags audit_flags;
  CLI::App* audit = app.add_subcommand("audit", "run a canned audit suite");
  audit->add_option("suite", audit_flags.suite,
                    "consensus_x|consensus_m|grad_err|rate|speedup|heavy_tail")
      ->required();
  audit->add_option("--out", audit_flags.out_dir, "output directory");
  audit->add_option("--threads", audit_flags.threads, "worker threads (0 = auto)");
  audit->add_option("--points", audit_flags.points, "rate suite: number of K*T points");
  audit->add_option("--seeds", audit_flags.seeds, "override the ensemble size");
  audit->add_option("--p", audit_flags.p,
                    "consensus_m/grad_err/rate: heavy-tail index (0 = Gaussian noise)");

  RunFlags sweep_flags;
  std::vector<std::string> grid;
  int sweep_threads = 0;
  CLI::App* sweep = app.add_subcommand("sweep", "run a grid of experiments");
  sweep_flags.attach(*sweep);
  sweep->get_option("--out")->description("output root directory");
  sweep->add_option("--grid", grid, "key=v1,v2,... (repeatable)")->allow_extra_args(false);
  sweep->add_option("--sweep-threads", sweep_threads, "grid points run in parallel (0 = auto)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_flags, out);
    if (*audit) return cmd_audit(audit_flags, out);
    if (*sweep) {
      const std::string out_dir =
          sweep_flags.values.count("out") ? sweep_flags.values.at("out") : std::string(".");
      sweep_flags.values.erase("out");
      return cmd_sweep(sweep_flags, grid, out_dir, sweep_threads, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace fedmuon::cli
