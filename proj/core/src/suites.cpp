#include "fedmuon/suites.hpp"

#include "fedmuon/csv.hpp"
#include "fedmuon/error.hpp"
#include "fedmuon/parallel.hpp"
#include "fedmuon/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fedmuon {

FederationConfig corollary_config(int workers, std::int64_t iters) {
  const ScheduleSpec spec = schedule_from_kt(workers, iters);
  FederationConfig config;
  config.workers = workers;
  config.iters = static_cast<int>(iters);
  config.period = spec.tau;
  config.eta = spec.eta;
  config.beta = spec.beta;
  return config;
}

ProblemInstance make_testbed_problem(const Testbed& testbed, int workers, double delta) {
  QuadraticOptions options;
  options.center_scale = testbed.center_scale;
  return make_quadratic_align(testbed.m, testbed.n, workers, delta, testbed.problem_seed, options);
}

namespace {

NoiseModel suite_noise(const Testbed& testbed, double sigma, double heavy_p) {
  if (heavy_p > 0.0)
    return make_heavy_tailed_noise(sigma, heavy_p, testbed.m, testbed.n, testbed.calibration_seed);
  return NoiseModel::gaussian(sigma);
}

std::string grid_label(int k, int tau, double sigma, double delta) {
  std::ostringstream out;
  out << "K=" << k << ";tau=" << tau << ";sigma=" << sigma << ";delta=" << delta;
  return out.str();
}

}  // namespace

ConsensusXResult run_consensus_x_suite(const ConsensusXSuite& suite, int threads) {
  struct Point {
    int k;
    int tau;
    double sigma;
    double delta;
  };
  std::vector<Point> grid;
  for (int k : suite.workers)
    for (int tau : suite.periods)
      for (double sigma : suite.sigmas)
        for (double delta : suite.deltas) grid.push_back({k, tau, sigma, delta});

  struct Outcome {
    AuditReport consensus;
    double max_update_dev = 0.0;
  };
  std::vector<Outcome> outcomes(grid.size());

  parallel_for(static_cast<int>(grid.size()), resolve_threads(threads), [&](int i) {
    const Point& pt = grid[static_cast<std::size_t>(i)];
    const ProblemInstance problem = make_testbed_problem(suite.testbed, pt.k, pt.delta);
    const NoiseModel noise = NoiseModel::gaussian(pt.sigma);
    FederationConfig config;
    config.workers = pt.k;
    config.iters = suite.iters;
    config.period = pt.tau;
    config.eta = suite.eta;
    config.beta = suite.beta;
    config.seed = suite.seed;

    double max_dev = 0.0;
    RunObserver observer;
    observer.on_step = [&](const StepEvent& ev) {
      const double expected = ev.eta * std::sqrt(static_cast<double>(ev.report.rank));
      max_dev = std::max(max_dev, std::abs(ev.report.update_norm - expected));
    };
    const Trajectory rows = run_federation(config, problem, noise, observer);

    Outcome& out = outcomes[static_cast<std::size_t>(i)];
    out.consensus = audit_consensus_x(rows, config, problem);
    const std::string label = grid_label(pt.k, pt.tau, pt.sigma, pt.delta);
    for (auto& e : out.consensus.entries) e.audit_name = "consensus_x[" + label + "]";
    out.max_update_dev = max_dev;
  });

  ConsensusXResult result;
  result.runs = static_cast<int>(grid.size());
  result.consensus.name = "consensus_x";
  result.update_norm.name = "update_norm";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point& pt = grid[i];
    result.consensus.entries.insert(result.consensus.entries.end(),
                                    outcomes[i].consensus.entries.begin(),
                                    outcomes[i].consensus.entries.end());
    result.update_norm.add(grid_label(pt.k, pt.tau, pt.sigma, pt.delta),
                           outcomes[i].max_update_dev, kUpdateNormTolerance);
  }
  result.consensus.notes.push_back(std::to_string(grid.size()) + " runs of T=" +
                                   std::to_string(suite.iters) +
                                   "; bound 2 eta tau sqrt(min(m,n))");
  result.update_norm.notes.push_back(
      "observed = max over steps and workers of | ||X_{t+1}-X_t||_F - eta sqrt(rank) |");
  result.consensus.finalize();
  result.update_norm.finalize();
  return result;
}

BoundEnsemble run_bound_ensemble(const BoundSuite& suite, int threads) {
  FederationConfig config = corollary_config(suite.workers, suite.iters);
  ProblemInstance problem = make_testbed_problem(suite.testbed, suite.workers, suite.delta);
  NoiseModel noise = suite_noise(suite.testbed, suite.sigma, suite.heavy_p);
  const auto seeds = seed_range(suite.base_seed, suite.seeds);
  auto runs = run_ensemble(config, problem, noise, seeds, threads);
  return BoundEnsemble{config, std::move(problem), noise, std::move(runs)};
}

AuditReport consensus_m_report(const BoundEnsemble& ensemble) {
  AuditReport report =
      audit_consensus_m(ensemble.runs, ensemble.config, ensemble.problem, ensemble.noise);
  if (report.status == AuditStatus::NotApplicable) return report;
  const int tau = ensemble.config.period;
  int early = 0;
  int late = 0;
  double late_max = 0.0;
  for (std::size_t t = 0; t < report.entries.size(); ++t) {
    const auto& e = report.entries[t];
    if (static_cast<int>(t) < tau) {
      early += !e.pass;
    } else {
      late += !e.pass;
      late_max = std::max(late_max, e.ratio);
    }
  }
  std::ostringstream note;
  note << "violations before the first communication (t < " << tau << "): " << early
       << "; after: " << late << " (max ratio after first communication "
       << format_double(late_max) << ")";
  report.notes.push_back(note.str());
  if (early > 0) {
    report.notes.push_back(
        "initial momenta are independent per-worker stochastic gradients and are not averaged "
        "until the first communication");
  }
  return report;
}

AuditReport grad_err_report(const BoundEnsemble& ensemble) {
  return audit_grad_est_error(ensemble.runs, ensemble.config, ensemble.problem, ensemble.noise);
}

RateResult run_rate_suite(const RateSuite& suite, int threads) {
  if (suite.points < 1) throw Error(ErrorCode::InvalidArg, "rate suite needs >= 1 point");
  RateResult result;
  const ProblemInstance problem = make_testbed_problem(suite.testbed, suite.workers, suite.delta);
  const NoiseModel noise = suite_noise(suite.testbed, suite.sigma, suite.heavy_p);
  const auto seeds = seed_range(suite.base_seed, suite.seeds);

  for (int i = 0; i < suite.points; ++i) {
    const std::int64_t kt = std::int64_t{1} << (suite.first_log2_kt + 2 * i);
    const std::int64_t iters = kt / suite.workers;
    const FederationConfig config = corollary_config(suite.workers, iters);
    const auto runs = run_ensemble(config, problem, noise, seeds, threads);
    double mean = 0.0;
    for (const auto& run : runs) mean += time_averaged_grad_norm(run);
    result.points.push_back({static_cast<double>(kt), mean / static_cast<double>(runs.size())});
  }

  result.report.name = "rate";
  for (const auto& p : result.points) {
    result.report.add_check("KT=" + format_double(p.kt), p.avg_grad_norm, 0.0, true);
  }
  result.fit = fit_rate_exponent(result.points);
  const bool in_band = result.fit.slope >= suite.band_lo && result.fit.slope <= suite.band_hi;
  result.report.add_check("slope", result.fit.slope, suite.band_hi, in_band);
  result.report.add_check("slope_lower_limit", result.fit.slope, suite.band_lo, in_band);
  result.report.notes.push_back("fitted slope " + format_double(result.fit.slope) +
                                ", residual " + format_double(result.fit.residual) + ", band [" +
                                format_double(suite.band_lo) + ", " +
                                format_double(suite.band_hi) + "]");
  result.report.finalize();
  return result;
}

SpeedupResult run_speedup_suite(const SpeedupSuite& suite, int threads) {
  SpeedupResult result;
  const auto seeds = seed_range(suite.base_seed, suite.seeds);
  auto mean_for = [&](int workers) {
    const FederationConfig config = corollary_config(workers, suite.iters);
    const ProblemInstance problem = make_testbed_problem(suite.testbed, workers, 0.0);
    const auto runs = run_ensemble(config, problem, NoiseModel::gaussian(suite.sigma), seeds,
                                   threads);
    double mean = 0.0;
    for (const auto& run : runs) mean += time_averaged_grad_norm(run);
    return mean / static_cast<double>(runs.size());
  };
  result.small_mean = mean_for(suite.small_workers);
  result.large_mean = mean_for(suite.large_workers);

  result.report.name = "speedup";
  result.report.add("K=" + std::to_string(suite.large_workers) + "_vs_" +
                        std::to_string(suite.max_ratio) + "xK=" +
                        std::to_string(suite.small_workers),
                    result.large_mean, suite.max_ratio * result.small_mean);
  result.report.notes.push_back("mean time-averaged grad norm: K=" +
                                std::to_string(suite.small_workers) + " -> " +
                                format_double(result.small_mean) + ", K=" +
                                std::to_string(suite.large_workers) + " -> " +
                                format_double(result.large_mean));
  result.report.finalize();
  return result;
}

HeavyTailResult run_heavy_tail_suite(const HeavyTailSuite& suite, int threads) {
  HeavyTailResult result;
  const FederationConfig muon = corollary_config(suite.workers, suite.iters);
  FederationConfig sgd = muon;
  sgd.optimizer = LocalSgdKind{};
  const ProblemInstance problem = make_testbed_problem(suite.testbed, suite.workers, suite.delta);
  const NoiseModel noise =
      make_heavy_tailed_noise(suite.sigma, suite.p, suite.testbed.m, suite.testbed.n,
                              suite.testbed.calibration_seed);

  const auto seeds = seed_range(suite.base_seed, suite.seeds);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> muon_avg(seeds.size(), inf);
  std::vector<double> sgd_avg(seeds.size(), inf);
  parallel_for(static_cast<int>(seeds.size()), resolve_threads(threads), [&](int r) {
    auto run_one = [&](FederationConfig config) {
      config.seed = seeds[static_cast<std::size_t>(r)];
      config.threads = 1;
      try {
        return time_averaged_grad_norm(run_federation(config, problem, noise));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NonFiniteState) throw;
        return inf;
      }
    };
    muon_avg[static_cast<std::size_t>(r)] = run_one(muon);
    sgd_avg[static_cast<std::size_t>(r)] = run_one(sgd);
  });

  for (std::size_t r = 0; r < seeds.size(); ++r) {
    if (std::isfinite(muon_avg[r])) {
      ++result.finite_runs;
      result.muon_mean += muon_avg[r];
    }
    if (muon_avg[r] < sgd_avg[r]) ++result.wins;
    result.sgd_mean += sgd_avg[r];
  }
  result.muon_mean /= std::max(1, result.finite_runs);
  result.sgd_mean /= static_cast<double>(seeds.size());

  result.report.name = "heavy_tail";
  const double runs = static_cast<double>(seeds.size());
  result.report.add_check("finite_runs", result.finite_runs, runs, result.finite_runs == suite.seeds);
  result.report.add_check("wins_vs_localsgd", result.wins, suite.min_wins,
                          result.wins >= suite.min_wins);
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    result.report.add_check("seed=" + std::to_string(seeds[r]), muon_avg[r], sgd_avg[r],
                            true);
  }
  std::ostringstream note;
  note << "p=" << suite.p << " dof=" << noise.dof << " scale=" << format_double(noise.scale)
       << "; FedMuon mean " << format_double(result.muon_mean) << ", LocalSGD mean "
       << format_double(result.sgd_mean) << "; wins " << result.wins << "/" << suite.seeds
       << " (need " << suite.min_wins << ")";
  result.report.notes.push_back(note.str());
  result.report.notes.push_back(
      "per-seed rows: observed = FedMuon time-averaged grad norm, bound = LocalSGD's (informational)");
  result.report.finalize();
  return result;
}

}  // namespace fedmuon
