#include "fedmuon/schedule.hpp"

#include "fedmuon/error.hpp"

#include <algorithm>
#include <cmath>

namespace fedmuon {

std::string_view to_string(ScheduleDerivation derivation) noexcept {
  switch (derivation) {
    case ScheduleDerivation::FromKT: return "from_kt";
    case ScheduleDerivation::FromEpsilonRegular: return "from_epsilon_regular";
    case ScheduleDerivation::FromEpsilonHeavy: return "from_epsilon_heavy";
  }
  return "unknown";
}

int round_period(double raw) {
  return std::max(2, static_cast<int>(std::lround(raw)));
}

ScheduleSpec schedule_from_kt(int workers, std::int64_t iters) {
  if (workers < 1 || iters < 1) throw Error(ErrorCode::InvalidArg, "K and T must be >= 1");
  const double k = workers;
  const double t = static_cast<double>(iters);
  ScheduleSpec spec;
  spec.derivation = ScheduleDerivation::FromKT;
  spec.iters = iters;
  spec.eta = std::pow(k, 0.25) / std::pow(t, 0.75);
  spec.beta = std::sqrt(k / t);
  spec.tau = round_period(std::pow(t, 0.25) / std::pow(k, 0.75));
  if (!(spec.beta < 1.0)) {
    throw Error(ErrorCode::InvalidArg,
                "corollary schedule needs T > K so that beta < 1 (recommended T >= 16 K)");
  }
  return spec;
}

ScheduleSpec schedule_from_epsilon(int workers, double epsilon, std::optional<double> heavy_p,
                                   const BigOConstants& constants) {
  if (workers < 1) throw Error(ErrorCode::InvalidArg, "K must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw Error(ErrorCode::InvalidArg, "epsilon must lie in (0, 1)");
  double q = 2.0;
  ScheduleSpec spec;
  spec.derivation = ScheduleDerivation::FromEpsilonRegular;
  if (heavy_p) {
    const double p = *heavy_p;
    if (!(p > 1.0 && p <= 2.0)) throw Error(ErrorCode::InvalidArg, "p must lie in (1, 2]");
    q = p / (p - 1.0);
    spec.derivation = ScheduleDerivation::FromEpsilonHeavy;
    spec.p = p;
  }
  const double k = workers;
  const double t_raw = constants.iters / (k * std::pow(epsilon, 2.0 * q));
  spec.iters = std::max<std::int64_t>(1, std::llround(t_raw));
  spec.eta = constants.eta * k * std::pow(epsilon, 1.5 * q);
  spec.beta = std::min(constants.beta * k * std::pow(epsilon, q), kMaxScheduleBeta);
  spec.tau = round_period(constants.tau / (k * std::pow(epsilon, 0.5 * q)));
  return spec;
}

}  // namespace fedmuon
