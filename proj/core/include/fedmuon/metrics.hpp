#pragma once

#include <cstdint>
#include <vector>

namespace fedmuon {

// One row per iteration, measured at the mean iterate before that
// iteration's local steps.
struct MetricsRow {
  std::int64_t t = 0;
  double f_mean = 0.0;        // f(X_bar_t)
  double grad_norm = 0.0;     // ||grad f(X_bar_t)||_F
  double consensus_x = 0.0;   // (1/K) sum_k ||X_bar_t - X_t^k||_F
  double consensus_m = 0.0;   // (1/K) sum_k ||M_bar_t - M_t^k||_F
  double grad_est_err = 0.0;  // ||(1/K) sum_k grad f_k(X_t^k) - M_bar_t||_F
};

using Trajectory = std::vector<MetricsRow>;

// (1/T) sum_t ||grad f(X_bar_t)||_F
double time_averaged_grad_norm(const Trajectory& rows);
// (1/T) sum_t ||grad f(X_bar_t)||_F^2
double time_averaged_grad_norm_sq(const Trajectory& rows);
// (1/T) sum_t grad_est_err
double time_averaged_grad_est_err(const Trajectory& rows);

}  // namespace fedmuon
