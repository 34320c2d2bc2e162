#pragma once

#include "fedmuon/federation.hpp"
#include "fedmuon/metrics.hpp"
#include "fedmuon/problems.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace fedmuon {

enum class AuditStatus { Pass, Fail, NotApplicable };

std::string_view to_string(AuditStatus status) noexcept;

struct AuditEntry {
  std::string audit_name;
  // Iteration index or an aggregate label such as "mean" or "slope".
  std::string t_or_aggregate;
  double observed = 0.0;
  double bound = 0.0;
  double ratio = 0.0;
  bool pass = true;
};

struct AuditReport {
  std::string name;
  AuditStatus status = AuditStatus::Pass;
  std::vector<AuditEntry> entries;
  std::vector<std::string> notes;

  int violations() const;
  double max_ratio() const;
  bool passed() const { return status != AuditStatus::Fail; }

  void add(std::string t_or_aggregate, double observed, double bound);
  // Entry whose pass flag is decided by the caller (band checks etc.).
  void add_check(std::string t_or_aggregate, double observed, double bound, bool pass);
  // Status becomes Fail if any entry failed, Pass otherwise (unless N/A).
  void finalize();
  void merge(const AuditReport& other);

  std::string to_text() const;
};

// audit_name,t_or_aggregate,observed,bound,ratio,pass
std::string audit_csv_header();
std::string to_csv(const AuditReport& report, bool with_header = true);

// ---------------------------------------------------------------------------
// Theoretical bounds. `dim` is the dimension under the square root; the auditors
// pass min(m, n).

double consensus_x_bound(double eta, int tau, int dim);
double consensus_m_bound_regular(double beta, double eta, int tau, double lipschitz, int dim,
                                 double sigma, double delta);
double consensus_m_bound_heavy(double beta, double eta, int tau, double lipschitz, int dim,
                               double sigma, double delta);
double grad_err_bound_regular(std::int64_t iters, double sigma, double beta, double eta, int dim,
                              double lipschitz, int workers);
double grad_err_bound_heavy(std::int64_t iters, double sigma, double beta, double eta, int dim,
                            double lipschitz, int workers, double p);

// Dimension used in the bounds: min(m, n).
int bound_dim(const ProblemInstance& problem);

// ---------------------------------------------------------------------------
// Auditors

// Deterministic: consensus_x[t] <= 2 eta tau sqrt(min(m, n)) at every t.
// NotApplicable unless the run used FedMuon with the exact orthogonalizer.
AuditReport audit_consensus_x(const Trajectory& rows, const FederationConfig& config,
                              const ProblemInstance& problem);

inline constexpr int kMinEnsembleRuns = 30;

// Across-seed mean of consensus_m[t] against the momentum-consensus bound
// (heavy-tailed constant when the noise is heavy-tailed).
// Throws InsufficientRuns for fewer than 30 runs.
AuditReport audit_consensus_m(const std::vector<Trajectory>& ensemble,
                              const FederationConfig& config, const ProblemInstance& problem,
                              const NoiseModel& noise);

// Across-seed mean of the time-averaged gradient-estimation error against the
// theoretical bound (heavy-tailed variant for heavy-tailed noise).
// Throws InsufficientRuns for fewer than 30 runs.
AuditReport audit_grad_est_error(const std::vector<Trajectory>& ensemble,
                                 const FederationConfig& config, const ProblemInstance& problem,
                                 const NoiseModel& noise);

// ---------------------------------------------------------------------------
// Rate fits

struct RatePoint {
  double kt = 0.0;
  double avg_grad_norm = 0.0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  // Root-mean-square residual of the log-log fit.
  double residual = 0.0;
};

// Least squares of log(avg_grad_norm) on log(K T). Needs >= 4 points spanning
// >= 2 decades of K T; throws InsufficientPoints otherwise.
RateFit fit_rate_exponent(const std::vector<RatePoint>& points);

}  // namespace fedmuon
