#include "fedmuon/error.hpp"
#include "fedmuon/problems.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace fedmuon {

std::string_view to_string(NoiseKind kind) noexcept {
  switch (kind) {
    case NoiseKind::None: return "none";
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::HeavyTailed: return "heavy";
  }
  return "unknown";
}

NoiseModel NoiseModel::gaussian(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw Error(ErrorCode::InvalidArg, "sigma must be finite and >= 0");
  NoiseModel model;
  model.kind = NoiseKind::Gaussian;
  model.sigma = sigma;
  return model;
}

NoiseModel NoiseModel::heavy_tailed(double sigma, double p, double dof, double scale) {
  if (!(p > 1.0 && p <= 2.0)) throw Error(ErrorCode::InvalidArg, "p must lie in (1, 2]");
  if (!(dof > p)) throw Error(ErrorCode::InvalidArg, "dof must exceed p");
  if (!(sigma >= 0.0) || !(scale >= 0.0))
    throw Error(ErrorCode::InvalidArg, "sigma and scale must be >= 0");
  NoiseModel model;
  model.kind = NoiseKind::HeavyTailed;
  model.sigma = sigma;
  model.p = p;
  model.dof = dof;
  model.scale = scale;
  return model;
}

Matrix NoiseModel::sample(int rows, int cols, Xoshiro256& rng) const {
  Matrix xi = Matrix::Zero(rows, cols);
  switch (kind) {
    case NoiseKind::None:
      break;
    case NoiseKind::Gaussian: {
      if (sigma == 0.0) break;
      std::normal_distribution<double> normal(0.0, sigma / std::sqrt(double(rows) * cols));
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) xi(i, j) = normal(rng);
      break;
    }
    case NoiseKind::HeavyTailed: {
      if (scale == 0.0) break;
      std::student_t_distribution<double> student(dof);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) xi(i, j) = scale * student(rng);
      break;
    }
  }
  return xi;
}

double calibrate_heavy_tail(double sigma, double p, double dof, int trials, int rows, int cols,
                            std::uint64_t seed) {
  if (!(p > 1.0 && p <= 2.0)) throw Error(ErrorCode::InvalidArg, "p must lie in (1, 2]");
  if (!(dof > p)) throw Error(ErrorCode::InvalidArg, "dof must exceed p");
  if (trials < kMinCalibrationTrials)
    throw Error(ErrorCode::InvalidArg,
                "calibration needs at least " + std::to_string(kMinCalibrationTrials) + " trials");
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw Error(ErrorCode::InvalidArg, "sigma must be finite and >= 0");
  if (rows < 1 || cols < 1) throw Error(ErrorCode::InvalidArg, "shape must be positive");
  if (sigma == 0.0) return 0.0;

  // Common random numbers: the same unit-scale draws are reused for every
  // candidate scale, so the moment is monotone in the scale.
  CounterStream stream(seed, 0);
  auto rng = stream.at(0, StreamPurpose::Calibration);
  std::student_t_distribution<double> student(dof);
  std::vector<double> norms(static_cast<std::size_t>(trials));
  for (auto& r : norms) {
    double sq = 0.0;
    for (int e = 0; e < rows * cols; ++e) {
      const double v = student(rng);
      sq += v * v;
    }
    r = std::sqrt(sq);
  }

  auto moment = [&](double s) {
    double acc = 0.0;
    for (double r : norms) acc += std::pow(s * r, p);
    return std::pow(acc / trials, 1.0 / p);
  };

  double lo = 0.0;
  double hi = sigma;
  int grow = 0;
  while (moment(hi) < sigma) {
    hi *= 2.0;
    if (++grow > 200 || !std::isfinite(hi))
      throw Error(ErrorCode::CalibrationFailed, "could not bracket the heavy-tail scale");
  }
  constexpr int kMaxBisections = 60;
  for (int it = 0; it < kMaxBisections; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double value = moment(mid);
    if (!std::isfinite(value))
      throw Error(ErrorCode::CalibrationFailed, "non-finite moment during bisection");
    (value < sigma ? lo : hi) = mid;
    if (hi - lo <= 1e-14 * hi) break;
  }
  const double scale = 0.5 * (lo + hi);
  if (std::abs(moment(scale) - sigma) > 1e-9 * sigma)
    throw Error(ErrorCode::CalibrationFailed, "bisection did not converge in 60 iterations");
  return scale;
}

NoiseModel make_heavy_tailed_noise(double sigma, double p, int rows, int cols, std::uint64_t seed,
                                   int trials) {
  const double dof = p + kDefaultDofOffset;
  const double scale = calibrate_heavy_tail(sigma, p, dof, trials, rows, cols, seed);
  return NoiseModel::heavy_tailed(sigma, p, dof, scale);
}

}  // namespace fedmuon
