#pragma once

#include "fedmuon/matrix.hpp"
#include "fedmuon/metrics.hpp"
#include "fedmuon/optim.hpp"
#include "fedmuon/problems.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace fedmuon {

enum class LrSchedule { Constant, Cosine };

std::string_view to_string(LrSchedule schedule) noexcept;

struct FederationConfig {
  int workers = 1;
  int iters = 1;
  int period = 2;
  double eta = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = FedMuonKind{};
  bool sync_momentum = true;
  // Requires 0 < beta < 1 (the regime the convergence theory covers).
  bool theory_mode = true;
  LrSchedule lr_schedule = LrSchedule::Constant;
  NewtonSchulzParams newton_schulz{};
  // 0 resolves through default_thread_count().
  int threads = 1;

  // Throws Error(ConfigInvalid) naming the offending field.
  void validate() const;

  // Step size used at iteration t.
  double eta_at(std::int64_t t) const;
};

struct RoundLog {
  std::int64_t iteration = 0;
  Matrix mean_x;
  Matrix mean_m;
  // ||X_bar - X^k||_F per worker, after the communication step (if any).
  std::vector<double> deviations;
};

struct StepEvent {
  std::int64_t t = 0;
  int worker = 0;
  double eta = 0.0;
  StepReport report;
};

// Observers run on the calling thread in worker_id order, so they see the
// same sequence regardless of the thread count.
struct RunObserver {
  std::function<void(const StepEvent&)> on_step;
  std::function<void(const RoundLog&)> on_round;
};

// Means of X and M, accumulated in ascending worker_id order then divided by K.
// Throws EmptyWorkerSet, ShapeMismatch.
std::pair<Matrix, Matrix> average_states(std::span<const WorkerState> states);

// Algorithm driver: K workers, T iterations, averaging of X (and M unless
// sync_momentum is off) whenever (t + 1) % period == 0.
Trajectory run_federation(const FederationConfig& config, const ProblemInstance& problem,
                          const NoiseModel& noise, const RunObserver& observer = {});

// Members differ only in seed; runs execute in parallel on `threads` threads
// with each member single-threaded.
std::vector<Trajectory> run_ensemble(const FederationConfig& config,
                                     const ProblemInstance& problem, const NoiseModel& noise,
                                     std::span<const std::uint64_t> seeds, int threads);

// Seeds base, base + 1, ..., base + count - 1.
std::vector<std::uint64_t> seed_range(std::uint64_t base, int count);

}  // namespace fedmuon
