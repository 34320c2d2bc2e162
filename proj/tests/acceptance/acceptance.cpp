// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include "cli.hpp"

#include "fedmuon/audit.hpp"
#include "fedmuon/csv.hpp"
#include "fedmuon/ortho.hpp"
#include "fedmuon/parallel.hpp"
#include "fedmuon/suites.hpp"

#include "../support/jacobi_svd.hpp"
#include "../support/random_matrices.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace fedmuon;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;
  std::function<Outcome()> check;
};

std::string fmt(double v, const char* spec = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

int g_threads = 0;

// ---------------------------------------------------------------------------

Outcome polar_factor_correctness() {
  Xoshiro256 rng(mix_key(2024, 1, 0, static_cast<std::uint64_t>(StreamPurpose::TestData)));
  std::uniform_int_distribution<int> rows_dist(1, 32);
  std::uniform_int_distribution<int> cols_dist(1, 16);
  std::uniform_real_distribution<double> log_cond(0.0, 4.0);
  double worst_orth = 0.0;
  double worst_oracle = 0.0;
  double worst_gap = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = rows_dist(rng);
    const int n = cols_dist(rng);
    const double cond = std::pow(10.0, log_cond(rng));
    const Matrix a = testing::conditioned_matrix(m, n, cond, rng) * std::exp(log_cond(rng) - 2.0);
    const OrthoResult r = orthonormalize_exact(a);
    const testing::ReferenceSvd ref = testing::jacobi_svd(a);
    // Retained subspace: right singular vectors of the kept values.
    const Matrix v = ref.v.leftCols(r.rank);
    const Matrix gram = v.transpose() * r.factor.transpose() * r.factor * v;
    worst_orth = std::max(worst_orth, (gram - Matrix::Identity(r.rank, r.rank)).norm());
    const Matrix oracle = testing::reference_polar(a);
    worst_oracle = std::max(worst_oracle, (r.factor - oracle).norm());
    // Optimality: no worse than the oracle's distance to M.
    worst_gap = std::max(worst_gap, (r.factor - a).norm() - (oracle - a).norm());
  }
  Outcome o;
  o.pass = worst_orth < 1e-9 && worst_oracle < 1e-8 && worst_gap < 1e-8;
  o.detail = "max |O^T O - I_r| = " + fmt(worst_orth) + ", max |O - oracle| = " + fmt(worst_oracle) +
             ", max distance excess = " + fmt(worst_gap);
  return o;
}

Outcome newton_schulz_vs_exact() {
  Xoshiro256 rng(mix_key(2024, 2, 0, static_cast<std::uint64_t>(StreamPurpose::TestData)));
  std::uniform_int_distribution<int> rows_dist(2, 32);
  std::uniform_int_distribution<int> cols_dist(2, 16);
  std::uniform_real_distribution<double> log_cond(0.0, 1.0);
  double sv_lo = 1e300;
  double sv_hi = 0.0;
  double worst_angle = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int m = rows_dist(rng);
    const int n = cols_dist(rng);
    const Matrix a = testing::conditioned_matrix(m, n, std::pow(10.0, log_cond(rng)), rng);
    const OrthoResult ns = newton_schulz(a);
    const OrthoResult exact = orthonormalize_exact(a);
    const Vector s = testing::jacobi_svd(ns.factor).s;
    sv_lo = std::min(sv_lo, s.minCoeff());
    sv_hi = std::max(sv_hi, s.maxCoeff());
    // Principal angles between column spaces: sin(theta_max) = ||(I - Q1 Q1^T) Q2||_2.
    const Matrix q1 = testing::jacobi_svd(exact.factor).u.leftCols(exact.rank);
    const Matrix q2 = testing::jacobi_svd(ns.factor).u.leftCols(exact.rank);
    const Matrix residual = q2 - q1 * (q1.transpose() * q2);
    const double sin_theta = std::min(1.0, testing::jacobi_svd(residual).s(0));
    worst_angle = std::max(worst_angle, std::asin(sin_theta));
  }
  Outcome o;
  o.pass = sv_lo >= 0.65 && sv_hi <= 1.35 && worst_angle < 1e-3;
  o.detail = "singular values in [" + fmt(sv_lo) + ", " + fmt(sv_hi) + "], max principal angle " +
             fmt(worst_angle) + " rad";
  return o;
}

ConsensusXResult& consensus_grid() {
  static ConsensusXResult result = run_consensus_x_suite(ConsensusXSuite{}, g_threads);
  return result;
}

Outcome variable_consensus() {
  const ConsensusXResult& r = consensus_grid();
  Outcome o;
  o.pass = r.runs == 36 && r.consensus.status == AuditStatus::Pass && r.consensus.violations() == 0;
  o.detail = std::to_string(r.runs) + " runs, " + std::to_string(r.consensus.entries.size()) +
             " checks, violations " + std::to_string(r.consensus.violations()) + ", max ratio " +
             fmt(r.consensus.max_ratio());
  return o;
}

Outcome update_norm_identity() {
  const ConsensusXResult& r = consensus_grid();
  Outcome o;
  o.pass = r.update_norm.status == AuditStatus::Pass && !r.update_norm.entries.empty();
  double worst = 0.0;
  for (const auto& e : r.update_norm.entries) worst = std::max(worst, e.observed);
  o.detail = std::to_string(r.update_norm.entries.size()) + " runs, max |dX - eta sqrt(rank)| = " +
             fmt(worst) + " (tolerance " + fmt(kUpdateNormTolerance) + ")";
  return o;
}

BoundEnsemble& bound_ensemble() {
  static BoundEnsemble ensemble = run_bound_ensemble(BoundSuite{}, g_threads);
  return ensemble;
}

Outcome momentum_consensus() {
  const AuditReport r = consensus_m_report(bound_ensemble());
  Outcome o;
  o.pass = r.status == AuditStatus::Pass;
  o.detail = "violations " + std::to_string(r.violations()) + "/" + std::to_string(r.entries.size()) +
             ", max ratio " + fmt(r.max_ratio());
  for (const auto& note : r.notes) o.detail += "; " + note;
  return o;
}

Outcome gradient_error() {
  const AuditReport regular = grad_err_report(bound_ensemble());
  BoundSuite heavy_suite;
  heavy_suite.heavy_p = 1.5;
  const AuditReport heavy = grad_err_report(run_bound_ensemble(heavy_suite, g_threads));
  Outcome o;
  o.pass = regular.status == AuditStatus::Pass && heavy.status == AuditStatus::Pass;
  const auto& re = regular.entries.front();
  const auto& he = heavy.entries.front();
  o.detail = "regular " + fmt(re.observed) + " <= " + fmt(re.bound) + "; heavy-tailed (p=1.5) " +
             fmt(he.observed) + " <= " + fmt(he.bound);
  return o;
}

Outcome rate_scaling() {
  const RateResult r = run_rate_suite(RateSuite{}, g_threads);
  Outcome o;
  o.pass = r.report.status == AuditStatus::Pass;
  o.detail = "slope " + fmt(r.fit.slope) + " (band [-0.45, -0.10]), residual " + fmt(r.fit.residual);
  return o;
}

Outcome linear_speedup() {
  const SpeedupResult r = run_speedup_suite(SpeedupSuite{}, g_threads);
  Outcome o;
  o.pass = r.report.status == AuditStatus::Pass;
  o.detail = "K=1 mean " + fmt(r.small_mean) + ", K=4 mean " + fmt(r.large_mean) + ", ratio " +
             fmt(r.large_mean / r.small_mean) + " (limit 1.1)";
  return o;
}

Outcome heavy_tail_robustness() {
  const HeavyTailSuite suite;
  const HeavyTailResult r = run_heavy_tail_suite(suite, g_threads);
  Outcome o;
  o.pass = r.report.status == AuditStatus::Pass;
  o.detail = "finite " + std::to_string(r.finite_runs) + "/" + std::to_string(suite.seeds) +
             ", wins vs LocalSGD " + std::to_string(r.wins) + "/" + std::to_string(suite.seeds) +
             " (need " + std::to_string(suite.min_wins) + "), mean avg grad norm FedMuon " +
             fmt(r.muon_mean) + " vs LocalSGD " + fmt(r.sgd_mean);
  return o;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() /
                        ("fedmuon-acceptance-" + std::to_string(std::random_device{}()));
  fs::create_directories(root);
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) { return cli::run_cli(args, sink, sink); };
  const int first = run({"run", "--workers", "8", "--iters", "512", "--period", "4", "--eta", "0.02",
                         "--beta", "0.2", "--delta", "0.5", "--noise", "heavy", "--sigma", "1", "--p",
                         "1.5", "--seed", "77", "--out", (root / "origin").string()});
  const std::string manifest = (root / "origin" / "manifest.txt").string();
  const int one = run({"run", "--config", manifest, "--threads", "1", "--out", (root / "t1").string()});
  const int eight = run({"run", "--config", manifest, "--threads", "8", "--out", (root / "t8").string()});
  const std::string a = slurp(root / "origin" / "metrics.csv");
  const std::string b = slurp(root / "t1" / "metrics.csv");
  const std::string c = slurp(root / "t8" / "metrics.csv");
  std::error_code ec;
  fs::remove_all(root, ec);
  Outcome o;
  o.pass = first == 0 && one == 0 && eight == 0 && !a.empty() && a == b && b == c;
  o.detail = "exit codes " + std::to_string(first) + "/" + std::to_string(one) + "/" +
             std::to_string(eight) + ", metrics.csv " + std::to_string(a.size()) + " bytes, " +
             (a == b && b == c ? "bitwise identical" : "DIFFERENT");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedmuon acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "run only these criteria");
  app.add_option("--threads", g_threads, "threads for ensembles (0 = auto)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "polar factor matches the reference SVD on 200 matrices", 5, polar_factor_correctness},
      {2, "Newton-Schulz stays close to the exact polar factor", 5, newton_schulz_vs_exact},
      {3, "variable consensus never exceeds 2 eta tau sqrt(min(m,n))", 30, variable_consensus},
      {4, "mean momentum consensus within its bound at every iteration", 120, momentum_consensus},
      {5, "time-averaged gradient-estimation error within its bound", 240, gradient_error},
      {6, "log-log rate slope inside [-0.45, -0.10]", 300, rate_scaling},
      {7, "K=4 average gradient norm <= 1.1x the K=1 value", 300, linear_speedup},
      {8, "heavy tails without clipping: finite and beats LocalSGD", 300, heavy_tail_robustness},
      {9, "update norm equals eta sqrt(rank) on every exact step", 30, update_norm_identity},
      {10, "manifest replay is bitwise identical on 1 and 8 threads", 60, determinism},
  };

  int failed = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs <= c.budget_seconds;
    const bool pass = o.pass && in_budget;
    failed += !pass;
    std::printf("[%s] criterion %2d: %s -- %s; %.2f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL",
                c.id, c.title.c_str(), o.detail.c_str(), secs, c.budget_seconds,
                in_budget ? "" : " OVER BUDGET");
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
