#include "fedmuon/federation.hpp"

#include "fedmuon/error.hpp"
#include "fedmuon/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <numeric>
#include <string>

namespace fedmuon {

int default_thread_count() {
  if (const char* env = std::getenv("FEDMUON_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

int resolve_threads(int requested) {
  return requested > 0 ? requested : default_thread_count();
}

std::string_view to_string(LrSchedule schedule) noexcept {
  return schedule == LrSchedule::Constant ? "constant" : "cosine";
}

double time_averaged_grad_norm(const Trajectory& rows) {
  if (rows.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : rows) sum += r.grad_norm;
  return sum / static_cast<double>(rows.size());
}

double time_averaged_grad_norm_sq(const Trajectory& rows) {
  if (rows.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : rows) sum += r.grad_norm * r.grad_norm;
  return sum / static_cast<double>(rows.size());
}

double time_averaged_grad_est_err(const Trajectory& rows) {
  if (rows.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : rows) sum += r.grad_est_err;
  return sum / static_cast<double>(rows.size());
}

void FederationConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw Error(ErrorCode::ConfigInvalid, key + ": " + why);
  };
  if (workers < 1) fail("workers", "must be >= 1");
  if (iters < 1) fail("iters", "must be >= 1");
  if (period < 1) fail("period", "must be >= 1");
  if (!(eta > 0.0) || !std::isfinite(eta)) fail("eta", "must be a positive finite number");
  if (!(beta > 0.0 && beta <= 1.0)) fail("beta", "must lie in (0, 1]");
  if (theory_mode && beta >= 1.0 && !std::holds_alternative<LocalSgdKind>(optimizer))
    fail("beta", "theory mode requires 0 < beta < 1");
  if (newton_schulz.iters < 1) fail("ns_iters", "must be >= 1");
  if (threads < 0) fail("threads", "must be >= 0");
}

double FederationConfig::eta_at(std::int64_t t) const {
  if (lr_schedule == LrSchedule::Constant) return eta;
  const double frac = static_cast<double>(t) / static_cast<double>(iters);
  return eta * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

std::pair<Matrix, Matrix> average_states(std::span<const WorkerState> states) {
  if (states.empty()) throw Error(ErrorCode::EmptyWorkerSet, "average_states: no workers");
  std::vector<std::size_t> order(states.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return states[a].worker_id < states[b].worker_id;
  });

  const WorkerState& first = states[order.front()];
  Matrix sum_x = Matrix::Zero(first.x.rows(), first.x.cols());
  Matrix sum_m = Matrix::Zero(first.m.rows(), first.m.cols());
  for (std::size_t idx : order) {
    const WorkerState& s = states[idx];
    if (!same_shape(s.x, first.x) || !same_shape(s.m, first.x))
      throw Error(ErrorCode::ShapeMismatch, "average_states: worker " +
                                                std::to_string(s.worker_id) +
                                                " has a different shape");
    sum_x += s.x;
    sum_m += s.m;
  }
  const double k = static_cast<double>(states.size());
  return {sum_x / k, sum_m / k};
}

namespace {

MetricsRow measure(std::int64_t t, const std::vector<WorkerState>& workers,
                   const ProblemInstance& problem) {
  const auto [mean_x, mean_m] = average_states(workers);
  const double k = static_cast<double>(workers.size());

  MetricsRow row;
  row.t = t;
  row.f_mean = problem.loss(mean_x);
  row.grad_norm = problem.gradient(mean_x).norm();

  Matrix mean_local_grad = Matrix::Zero(mean_x.rows(), mean_x.cols());
  for (const auto& w : workers) {
    row.consensus_x += (mean_x - w.x).norm();
    row.consensus_m += (mean_m - w.m).norm();
    mean_local_grad += problem.local_gradient(w.worker_id, w.x);
  }
  row.consensus_x /= k;
  row.consensus_m /= k;
  mean_local_grad /= k;
  row.grad_est_err = (mean_local_grad - mean_m).norm();

  if (!std::isfinite(row.f_mean) || !std::isfinite(row.grad_norm) ||
      !std::isfinite(row.consensus_x) || !std::isfinite(row.consensus_m) ||
      !std::isfinite(row.grad_est_err)) {
    throw Error(ErrorCode::NonFiniteState, "metrics became non-finite at t=" + std::to_string(t));
  }
  return row;
}

}  // namespace

Trajectory run_federation(const FederationConfig& config, const ProblemInstance& problem,
                          const NoiseModel& noise, const RunObserver& observer) {
  config.validate();
  if (problem.workers() != config.workers) {
    throw Error(ErrorCode::ConfigInvalid,
                "workers: config has " + std::to_string(config.workers) +
                    " but the problem was built for " + std::to_string(problem.workers()));
  }

  const int k_workers = config.workers;
  std::vector<GradientOracle> oracles;
  oracles.reserve(k_workers);
  for (int k = 0; k < k_workers; ++k) {
    oracles.emplace_back([&problem, &noise, k](const Matrix& x, Xoshiro256& rng) {
      return stochastic_gradient(problem, k, x, noise, rng);
    });
  }

  std::vector<WorkerState> workers;
  workers.reserve(k_workers);
  for (int k = 0; k < k_workers; ++k)
    workers.push_back(init_worker(k, problem.x0(), oracles[k], config.seed));

  Orthogonalizer ortho;
  if (const auto* muon = std::get_if<FedMuonKind>(&config.optimizer)) {
    ortho.method = muon->ortho;
    ortho.newton_schulz = config.newton_schulz;
  }

  const int threads = std::min(resolve_threads(config.threads), k_workers);
  Trajectory rows;
  rows.reserve(static_cast<std::size_t>(config.iters));
  std::vector<StepReport> reports(static_cast<std::size_t>(k_workers));

  for (std::int64_t t = 0; t < config.iters; ++t) {
    rows.push_back(measure(t, workers, problem));

    const double eta_t = config.eta_at(t);
    parallel_for(k_workers, threads, [&](int k) {
      reports[k] = local_step(config.optimizer, workers[k], oracles[k], eta_t, config.beta, ortho);
    });
    if (observer.on_step) {
      for (int k = 0; k < k_workers; ++k) observer.on_step(StepEvent{t, k, eta_t, reports[k]});
    }

    if ((t + 1) % config.period == 0) {
      auto [mean_x, mean_m] = average_states(workers);
      for (auto& w : workers) {
        w.x = mean_x;
        if (config.sync_momentum) w.m = mean_m;
      }
    }

    if (observer.on_round) {
      RoundLog log;
      log.iteration = t;
      std::tie(log.mean_x, log.mean_m) = average_states(workers);
      log.deviations.reserve(workers.size());
      for (const auto& w : workers) log.deviations.push_back((log.mean_x - w.x).norm());
      observer.on_round(log);
    }
  }
  return rows;
}

std::vector<std::uint64_t> seed_range(std::uint64_t base, int count) {
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(std::max(count, 0)));
  std::iota(seeds.begin(), seeds.end(), base);
  return seeds;
}

std::vector<Trajectory> run_ensemble(const FederationConfig& config,
                                     const ProblemInstance& problem, const NoiseModel& noise,
                                     std::span<const std::uint64_t> seeds, int threads) {
  std::vector<Trajectory> out(seeds.size());
  parallel_for(static_cast<int>(seeds.size()), resolve_threads(threads), [&](int r) {
    FederationConfig member = config;
    member.seed = seeds[static_cast<std::size_t>(r)];
    member.threads = 1;
    out[static_cast<std::size_t>(r)] = run_federation(member, problem, noise);
  });
  return out;
}

}  // namespace fedmuon
