#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace fedmuon {

enum class ScheduleDerivation { FromKT, FromEpsilonRegular, FromEpsilonHeavy };

std::string_view to_string(ScheduleDerivation derivation) noexcept;

struct ScheduleSpec {
  double eta = 0.0;
  double beta = 0.0;
  int tau = 2;
  std::int64_t iters = 0;
  ScheduleDerivation derivation = ScheduleDerivation::FromKT;
  // Tail index for FromEpsilonHeavy; 2 otherwise.
  double p = 2.0;
};

// The epsilon schedules are order-of-magnitude statements; these are the
// multiplicative constants used to instantiate them.
struct BigOConstants {
  double iters = 1.0;
  double eta = 1.0;
  double beta = 1.0;
  double tau = 1.0;
};

// Upper clamp applied to beta by the epsilon schedules.
inline constexpr double kMaxScheduleBeta = 0.99;

// Communication periods below 2 are raised to 2.
int round_period(double raw);

// eta = K^{1/4} / T^{3/4}, beta = (K / T)^{1/2}, tau = max(2, round(T^{1/4} / K^{3/4})).
// Throws InvalidArg when beta >= 1 (T <= K) or K, T < 1.
ScheduleSpec schedule_from_kt(int workers, std::int64_t iters);

// Unit-constant instantiation of the epsilon-accuracy settings. With
// q = p / (p - 1) (q = 2 for the regular regime):
//   T = 1 / (K eps^{2q}), eta = K eps^{3q/2}, beta = K eps^q, tau = 1 / (K eps^{q/2}).
// Throws InvalidArg for eps outside (0, 1) or p outside (1, 2].
ScheduleSpec schedule_from_epsilon(int workers, double epsilon,
                                   std::optional<double> heavy_p = std::nullopt,
                                   const BigOConstants& constants = {});

}  // namespace fedmuon
