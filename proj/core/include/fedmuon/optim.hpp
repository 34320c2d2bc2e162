#pragma once

#include "fedmuon/matrix.hpp"
#include "fedmuon/ortho.hpp"
#include "fedmuon/rng.hpp"

#include <cstdint>
#include <functional>
#include <string_view>
#include <variant>

namespace fedmuon {

struct FedMuonKind {
  OrthoMethod ortho = OrthoMethod::Exact;
};
struct LocalSgdKind {};
struct LocalSgdmKind {};

using OptimizerKind = std::variant<FedMuonKind, LocalSgdKind, LocalSgdmKind>;

std::string_view optimizer_name(const OptimizerKind& kind) noexcept;

inline bool is_fedmuon_exact(const OptimizerKind& kind) noexcept {
  const auto* muon = std::get_if<FedMuonKind>(&kind);
  return muon != nullptr && muon->ortho == OrthoMethod::Exact;
}

// Stochastic gradient provider for one worker. The engine is fresh for the
// step being sampled.
using GradientOracle = std::function<Matrix(const Matrix& x, Xoshiro256& rng)>;

struct WorkerState {
  int worker_id = 0;
  Matrix x;
  Matrix m;
  CounterStream rng;
  std::uint64_t step_count = 0;
};

// X <- x0, M <- grad(x0; xi_0) drawn from the stream at step 0.
WorkerState init_worker(int worker_id, const Matrix& x0, const GradientOracle& oracle,
                        std::uint64_t seed);

struct StepReport {
  // Rank of the orthonormalized direction; -1 for the SGD baselines.
  int rank = 0;
  // ||X_{t+1} - X_t||_F
  double update_norm = 0.0;
};

// Algorithm order: O_t = ortho(M_t); X_{t+1} = X_t - eta O_t;
// M_{t+1} = (1 - beta) M_t + beta grad(X_{t+1}; xi_{t+1}).
// Throws ShapeMismatch, NonFiniteState, InvalidArg (eta <= 0, beta outside (0, 1]).
StepReport muon_local_step(WorkerState& state, const GradientOracle& oracle, double eta,
                           double beta, const Orthogonalizer& ortho);

// Same recurrence with the raw momentum as the direction. beta = 1 is LocalSGD.
StepReport local_sgdm_step(WorkerState& state, const GradientOracle& oracle, double eta,
                           double beta);

// Dispatch on the optimizer kind. LocalSGD forces beta = 1.
StepReport local_step(const OptimizerKind& kind, WorkerState& state, const GradientOracle& oracle,
                      double eta, double beta, const Orthogonalizer& exact_or_ns);

}  // namespace fedmuon
