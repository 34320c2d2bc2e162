#include "fedmuon/audit.hpp"

#include "fedmuon/csv.hpp"
#include "fedmuon/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace fedmuon {

std::string_view to_string(AuditStatus status) noexcept {
  switch (status) {
    case AuditStatus::Pass: return "pass";
    case AuditStatus::Fail: return "fail";
    case AuditStatus::NotApplicable: return "not_applicable";
  }
  return "unknown";
}

int AuditReport::violations() const {
  return static_cast<int>(
      std::count_if(entries.begin(), entries.end(), [](const AuditEntry& e) { return !e.pass; }));
}

double AuditReport::max_ratio() const {
  double best = 0.0;
  for (const auto& e : entries) best = std::max(best, e.ratio);
  return best;
}

void AuditReport::add(std::string t_or_aggregate, double observed, double bound) {
  add_check(std::move(t_or_aggregate), observed, bound, observed <= bound);
}

void AuditReport::add_check(std::string t_or_aggregate, double observed, double bound,
                            bool pass) {
  AuditEntry e;
  e.audit_name = name;
  e.t_or_aggregate = std::move(t_or_aggregate);
  e.observed = observed;
  e.bound = bound;
  if (bound > 0.0) {
    e.ratio = observed / bound;
  } else {
    e.ratio = observed == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  e.pass = pass;
  entries.push_back(std::move(e));
}

void AuditReport::finalize() {
  if (status == AuditStatus::NotApplicable) return;
  status = violations() == 0 ? AuditStatus::Pass : AuditStatus::Fail;
}

void AuditReport::merge(const AuditReport& other) {
  entries.insert(entries.end(), other.entries.begin(), other.entries.end());
  notes.insert(notes.end(), other.notes.begin(), other.notes.end());
  if (other.status == AuditStatus::Fail) status = AuditStatus::Fail;
}

std::string AuditReport::to_text() const {
  std::ostringstream out;
  out << "audit " << name << ": " << to_string(status) << " (" << entries.size() << " checks, "
      << violations() << " violations, max ratio " << format_double(max_ratio()) << ")\n";
  for (const auto& note : notes) out << "  note: " << note << "\n";
  int shown = 0;
  for (const auto& e : entries) {
    if (e.pass) continue;
    if (++shown > 20) {
      out << "  ...\n";
      break;
    }
    out << "  violation [" << e.audit_name << "] at " << e.t_or_aggregate << ": observed "
        << format_double(e.observed) << " > bound " << format_double(e.bound) << "\n";
  }
  return out.str();
}

std::string audit_csv_header() { return "audit_name,t_or_aggregate,observed,bound,ratio,pass"; }

std::string to_csv(const AuditReport& report, bool with_header) {
  std::ostringstream out;
  if (with_header) out << audit_csv_header() << "\n";
  for (const auto& e : report.entries) {
    out << e.audit_name << "," << e.t_or_aggregate << "," << format_double(e.observed) << ","
        << format_double(e.bound) << "," << format_double(e.ratio) << ","
        << (e.pass ? "true" : "false") << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------

double consensus_x_bound(double eta, int tau, int dim) {
  return 2.0 * eta * tau * std::sqrt(static_cast<double>(dim));
}

double consensus_m_bound_regular(double beta, double eta, int tau, double lipschitz, int dim,
                                 double sigma, double delta) {
  const double t = tau;
  return 4.0 * beta * eta * t * t * lipschitz * std::sqrt(static_cast<double>(dim)) +
         2.0 * beta * t * sigma + beta * t * delta;
}

double consensus_m_bound_heavy(double beta, double eta, int tau, double lipschitz, int dim,
                               double sigma, double delta) {
  const double t = tau;
  return 4.0 * std::numbers::sqrt2 * beta * t * sigma +
         4.0 * eta * beta * t * t * lipschitz * std::sqrt(static_cast<double>(dim)) +
         beta * t * delta;
}

double grad_err_bound_regular(std::int64_t iters, double sigma, double beta, double eta, int dim,
                              double lipschitz, int workers) {
  return sigma / (beta * static_cast<double>(iters)) +
         eta * std::sqrt(static_cast<double>(dim)) * lipschitz / beta +
         std::sqrt(beta) * sigma / std::sqrt(static_cast<double>(workers));
}

double grad_err_bound_heavy(std::int64_t iters, double sigma, double beta, double eta, int dim,
                            double lipschitz, int workers, double p) {
  const double e = 1.0 - 1.0 / p;
  return 2.0 * std::numbers::sqrt2 * sigma / (beta * static_cast<double>(iters)) +
         eta * std::sqrt(static_cast<double>(dim)) * lipschitz / beta +
         2.0 * std::numbers::sqrt2 * std::pow(beta, e) * sigma /
             std::pow(static_cast<double>(workers), e);
}

int bound_dim(const ProblemInstance& problem) {
  return std::min(problem.rows(), problem.cols());
}

namespace {

std::string dim_note(const ProblemInstance& problem) {
  std::ostringstream out;
  out << "bound uses sqrt(min(m,n)) = sqrt(" << bound_dim(problem) << "); literal sqrt(n) = sqrt("
      << problem.cols() << ")";
  return out.str();
}

void require_ensemble(const std::vector<Trajectory>& ensemble, const FederationConfig& config) {
  if (static_cast<int>(ensemble.size()) < kMinEnsembleRuns) {
    throw Error(ErrorCode::InsufficientRuns,
                "expectation audits need >= " + std::to_string(kMinEnsembleRuns) + " runs, got " +
                    std::to_string(ensemble.size()));
  }
  for (const auto& run : ensemble) {
    if (static_cast<int>(run.size()) != config.iters)
      throw Error(ErrorCode::InvalidArg, "ensemble member length differs from config.iters");
  }
}

bool expectation_audit_applicable(AuditReport& report, const FederationConfig& config) {
  if (!is_fedmuon_exact(config.optimizer)) {
    report.status = AuditStatus::NotApplicable;
    report.notes.push_back("bound assumes FedMuon with the exact orthogonalizer");
    return false;
  }
  if (!config.sync_momentum) {
    report.status = AuditStatus::NotApplicable;
    report.notes.push_back("bound assumes momentum is averaged at communication");
    return false;
  }
  if (!(config.beta < 1.0)) {
    report.status = AuditStatus::NotApplicable;
    report.notes.push_back("bound assumes 0 < beta < 1");
    return false;
  }
  return true;
}

}  // namespace

AuditReport audit_consensus_x(const Trajectory& rows, const FederationConfig& config,
                              const ProblemInstance& problem) {
  AuditReport report;
  report.name = "consensus_x";
  if (!is_fedmuon_exact(config.optimizer)) {
    report.status = AuditStatus::NotApplicable;
    report.notes.push_back(std::string("bound requires orthonormalized directions; optimizer is ") +
                           std::string(optimizer_name(config.optimizer)));
    return report;
  }
  // eta_at(t) <= eta for both schedules, so the constant bound covers cosine.
  const double bound = consensus_x_bound(config.eta, config.period, bound_dim(problem));
  for (const auto& row : rows) report.add(std::to_string(row.t), row.consensus_x, bound);
  report.notes.push_back(dim_note(problem));
  report.finalize();
  return report;
}

AuditReport audit_consensus_m(const std::vector<Trajectory>& ensemble,
                              const FederationConfig& config, const ProblemInstance& problem,
                              const NoiseModel& noise) {
  AuditReport report;
  report.name = "consensus_m";
  require_ensemble(ensemble, config);
  if (!expectation_audit_applicable(report, config)) return report;

  const bool heavy = noise.kind == NoiseKind::HeavyTailed;
  const double sigma = noise.kind == NoiseKind::None ? 0.0 : noise.sigma;
  const int dim = bound_dim(problem);
  const double bound =
      heavy ? consensus_m_bound_heavy(config.beta, config.eta, config.period, problem.lipschitz(),
                                      dim, sigma, problem.delta())
            : consensus_m_bound_regular(config.beta, config.eta, config.period,
                                        problem.lipschitz(), dim, sigma, problem.delta());
  const double runs = static_cast<double>(ensemble.size());
  for (int t = 0; t < config.iters; ++t) {
    double mean = 0.0;
    for (const auto& run : ensemble) mean += run[static_cast<std::size_t>(t)].consensus_m;
    report.add(std::to_string(t), mean / runs, bound);
  }
  report.notes.push_back(dim_note(problem));
  report.notes.push_back(std::string(heavy ? "heavy-tailed" : "bounded-variance") +
                         " bound, R = " + std::to_string(ensemble.size()) + " seeds");
  report.finalize();
  return report;
}

AuditReport audit_grad_est_error(const std::vector<Trajectory>& ensemble,
                                 const FederationConfig& config, const ProblemInstance& problem,
                                 const NoiseModel& noise) {
  AuditReport report;
  report.name = "grad_est_err";
  require_ensemble(ensemble, config);
  if (!expectation_audit_applicable(report, config)) return report;

  const bool heavy = noise.kind == NoiseKind::HeavyTailed;
  const double sigma = noise.kind == NoiseKind::None ? 0.0 : noise.sigma;
  const int dim = bound_dim(problem);
  const double bound =
      heavy ? grad_err_bound_heavy(config.iters, sigma, config.beta, config.eta, dim,
                                   problem.lipschitz(), config.workers, noise.p)
            : grad_err_bound_regular(config.iters, sigma, config.beta, config.eta, dim,
                                     problem.lipschitz(), config.workers);
  double mean = 0.0;
  for (const auto& run : ensemble) mean += time_averaged_grad_est_err(run);
  mean /= static_cast<double>(ensemble.size());
  report.add("mean", mean, bound);
  report.notes.push_back(dim_note(problem));
  report.notes.push_back(std::string(heavy ? "heavy-tailed" : "bounded-variance") + " bound");
  report.finalize();
  return report;
}

RateFit fit_rate_exponent(const std::vector<RatePoint>& points) {
  if (points.size() < 4)
    throw Error(ErrorCode::InsufficientPoints, "rate fit needs at least 4 points");
  double lo = points.front().kt;
  double hi = lo;
  for (const auto& p : points) {
    if (!(p.kt > 0.0) || !(p.avg_grad_norm > 0.0))
      throw Error(ErrorCode::InvalidArg, "rate fit needs positive K*T and gradient norms");
    lo = std::min(lo, p.kt);
    hi = std::max(hi, p.kt);
  }
  if (hi < 100.0 * lo)
    throw Error(ErrorCode::InsufficientPoints, "rate fit points must span at least 2 decades");

  const double n = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& p : points) {
    sx += std::log(p.kt);
    sy += std::log(p.avg_grad_norm);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const double dx = std::log(p.kt) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(p.avg_grad_norm) - my);
  }
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (const auto& p : points) {
    const double r = std::log(p.avg_grad_norm) - (fit.intercept + fit.slope * std::log(p.kt));
    rss += r * r;
  }
  fit.residual = std::sqrt(rss / n);
  return fit;
}

}  // namespace fedmuon
