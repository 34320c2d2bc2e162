#pragma once

#include "fedmuon/audit.hpp"
#include "fedmuon/federation.hpp"
#include "fedmuon/problems.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fedmuon {

// Canned experiment suites shared by `fedmuon audit` and the acceptance tests.
// Every suite is deterministic given its parameters.

struct Testbed {
  int m = 8;
  int n = 4;
  double center_scale = 1.0;
  std::uint64_t problem_seed = 11;
  std::uint64_t calibration_seed = 5;
};

// --- consensus_x: deterministic grid over K x tau x sigma x delta -----------

struct ConsensusXSuite {
  Testbed testbed{};
  std::vector<int> workers{2, 4, 8};
  std::vector<int> periods{2, 4, 16};
  std::vector<double> sigmas{0.0, 0.5};
  std::vector<double> deltas{0.0, 1.0};
  int iters = 256;
  double eta = 0.05;
  double beta = 0.25;
  std::uint64_t seed = 7;
};

inline constexpr double kUpdateNormTolerance = 1e-8;

struct ConsensusXResult {
  AuditReport consensus;
  // | ||X_{t+1} - X_t||_F - eta sqrt(rank) | <= 1e-8 on every step; one entry per run.
  AuditReport update_norm;
  int runs = 0;
};

ConsensusXResult run_consensus_x_suite(const ConsensusXSuite& suite, int threads);

// --- momentum consensus / gradient error ensembles -------------------------

struct BoundSuite {
  Testbed testbed{};
  int workers = 4;
  // T = 16384 makes the corollary period exactly 4 for K = 4.
  std::int64_t iters = 16384;
  double sigma = 0.5;
  double delta = 0.5;
  // Tail index for the heavy-tailed variant; 0 selects Gaussian noise.
  double heavy_p = 0.0;
  int seeds = kMinEnsembleRuns;
  std::uint64_t base_seed = 100;
};

struct BoundEnsemble {
  FederationConfig config;
  ProblemInstance problem;
  NoiseModel noise;
  std::vector<Trajectory> runs;
};

BoundEnsemble run_bound_ensemble(const BoundSuite& suite, int threads);

// Momentum-consensus audit with a breakdown of violations before and after
// the first communication in the notes.
AuditReport consensus_m_report(const BoundEnsemble& ensemble);
AuditReport grad_err_report(const BoundEnsemble& ensemble);

// --- rate scaling ----------------------------------------------------------

struct RateSuite {
  Testbed testbed{};
  int workers = 4;
  int points = 5;
  // K T = 2^(first_log2_kt + 2 i)
  int first_log2_kt = 8;
  double sigma = 0.5;
  double delta = 0.5;
  double heavy_p = 0.0;
  int seeds = 10;
  std::uint64_t base_seed = 100;
  double band_lo = -0.45;
  double band_hi = -0.10;
};

struct RateResult {
  std::vector<RatePoint> points;
  RateFit fit;
  AuditReport report;
};

RateResult run_rate_suite(const RateSuite& suite, int threads);

// --- linear speedup --------------------------------------------------------

struct SpeedupSuite {
  Testbed testbed{};
  std::int64_t iters = 4096;
  double sigma = 0.5;
  int small_workers = 1;
  int large_workers = 4;
  int seeds = 30;
  std::uint64_t base_seed = 1000;
  double max_ratio = 1.1;
};

struct SpeedupResult {
  double small_mean = 0.0;
  double large_mean = 0.0;
  AuditReport report;
};

SpeedupResult run_speedup_suite(const SpeedupSuite& suite, int threads);

// --- heavy-tailed robustness without clipping -------------------------------

struct HeavyTailSuite {
  Testbed testbed{};
  int workers = 4;
  std::int64_t iters = 4096;
  double sigma = 1.0;
  double p = 1.2;
  double delta = 0.5;
  int seeds = 30;
  std::uint64_t base_seed = 2000;
  int min_wins = 24;
};

struct HeavyTailResult {
  int finite_runs = 0;
  int wins = 0;
  double muon_mean = 0.0;
  double sgd_mean = 0.0;
  AuditReport report;
};

HeavyTailResult run_heavy_tail_suite(const HeavyTailSuite& suite, int threads);

// Shared helpers.
FederationConfig corollary_config(int workers, std::int64_t iters);
ProblemInstance make_testbed_problem(const Testbed& testbed, int workers, double delta);

}  // namespace fedmuon
