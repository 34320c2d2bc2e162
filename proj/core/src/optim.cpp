#include "fedmuon/optim.hpp"

#include "fedmuon/error.hpp"

#include <cmath>
#include <string>

namespace fedmuon {

namespace {

void validate_rates(double eta, double beta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw Error(ErrorCode::InvalidArg, "eta must be > 0");
  if (!(beta > 0.0 && beta <= 1.0)) throw Error(ErrorCode::InvalidArg, "beta must lie in (0, 1]");
}

Matrix draw_gradient(const WorkerState& state, const GradientOracle& oracle, std::uint64_t step) {
  auto rng = state.rng.at(step);
  Matrix g = oracle(state.x, rng);
  if (!same_shape(g, state.x)) {
    throw Error(ErrorCode::ShapeMismatch,
                "oracle returned " + shape_string(g) + " for iterate " + shape_string(state.x));
  }
  return g;
}

void check_state(const WorkerState& state) {
  if (!all_finite(state.x) || !all_finite(state.m)) {
    throw Error(ErrorCode::NonFiniteState, "worker " + std::to_string(state.worker_id) +
                                               " diverged at step " +
                                               std::to_string(state.step_count));
  }
}

// Shared tail of both steps: refresh momentum at the new iterate.
void refresh_momentum(WorkerState& state, const GradientOracle& oracle, double beta) {
  const std::uint64_t next = state.step_count + 1;
  const Matrix g = draw_gradient(state, oracle, next);
  state.m = (1.0 - beta) * state.m + beta * g;
  state.step_count = next;
  check_state(state);
}

}  // namespace

std::string_view optimizer_name(const OptimizerKind& kind) noexcept {
  struct Visitor {
    std::string_view operator()(const FedMuonKind& k) const {
      return k.ortho == OrthoMethod::Exact ? "fedmuon-svd" : "fedmuon-ns";
    }
    std::string_view operator()(const LocalSgdKind&) const { return "localsgd"; }
    std::string_view operator()(const LocalSgdmKind&) const { return "localsgdm"; }
  };
  return std::visit(Visitor{}, kind);
}

WorkerState init_worker(int worker_id, const Matrix& x0, const GradientOracle& oracle,
                        std::uint64_t seed) {
  WorkerState state;
  state.worker_id = worker_id;
  state.x = x0;
  state.rng = CounterStream(seed, static_cast<std::uint64_t>(worker_id));
  state.m = draw_gradient(state, oracle, 0);
  check_state(state);
  return state;
}

StepReport muon_local_step(WorkerState& state, const GradientOracle& oracle, double eta,
                           double beta, const Orthogonalizer& ortho) {
  validate_rates(eta, beta);
  const OrthoResult dir = ortho(state.m);
  StepReport report;
  report.rank = dir.rank;
  const Matrix before = state.x;
  state.x -= eta * dir.factor;
  report.update_norm = (state.x - before).norm();
  refresh_momentum(state, oracle, beta);
  return report;
}

StepReport local_sgdm_step(WorkerState& state, const GradientOracle& oracle, double eta,
                           double beta) {
  validate_rates(eta, beta);
  StepReport report;
  report.rank = -1;
  const Matrix before = state.x;
  state.x -= eta * state.m;
  report.update_norm = (state.x - before).norm();
  refresh_momentum(state, oracle, beta);
  return report;
}

StepReport local_step(const OptimizerKind& kind, WorkerState& state, const GradientOracle& oracle,
                      double eta, double beta, const Orthogonalizer& ortho) {
  if (std::holds_alternative<FedMuonKind>(kind)) {
    return muon_local_step(state, oracle, eta, beta, ortho);
  }
  if (std::holds_alternative<LocalSgdKind>(kind)) {
    return local_sgdm_step(state, oracle, eta, 1.0);
  }
  return local_sgdm_step(state, oracle, eta, beta);
}

}  // namespace fedmuon
