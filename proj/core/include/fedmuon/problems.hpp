#pragma once

#include "fedmuon/matrix.hpp"
#include "fedmuon/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

namespace fedmuon {

enum class ProblemFamily : std::uint32_t {
  // f_k(X) = 1/2 ||X - A_k||_F^2
  QuadraticAlign = 0,
  // f_k(X) = 1/4 ||X^T X - A_k^T A_k||_F^2
  RayleighNonconvex = 1,
};

std::string_view to_string(ProblemFamily family) noexcept;

// Federated objective f = (1/K) sum_k f_k with known (or estimated) constants.
// Immutable once built; safe to share across threads.
class ProblemInstance {
 public:
  ProblemInstance(ProblemFamily family, std::vector<Matrix> targets, Matrix x0,
                  double lipschitz, double delta, std::optional<Matrix> x_star,
                  std::optional<double> f_star);

  ProblemFamily family() const noexcept { return family_; }
  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  int workers() const noexcept { return static_cast<int>(targets_.size()); }
  const std::vector<Matrix>& targets() const noexcept { return targets_; }
  const Matrix& target_mean() const noexcept { return target_mean_; }
  const Matrix& x0() const noexcept { return x0_; }
  double lipschitz() const noexcept { return lipschitz_; }
  double delta() const noexcept { return delta_; }
  const std::optional<Matrix>& x_star() const noexcept { return x_star_; }
  const std::optional<double>& f_star() const noexcept { return f_star_; }

  double local_loss(int worker, const Matrix& x) const;
  Matrix local_gradient(int worker, const Matrix& x) const;
  double loss(const Matrix& x) const;
  Matrix gradient(const Matrix& x) const;

  // (1/K) sum_k ||grad f_k(X) - grad f(X)||_F^2
  double heterogeneity(const Matrix& x) const;

 private:
  void check_shape(const Matrix& x) const;
  void check_worker(int worker) const;

  ProblemFamily family_;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Matrix> targets_;
  std::vector<Matrix> grams_;
  Matrix target_mean_;
  Matrix gram_mean_;
  Matrix x0_;
  double lipschitz_ = 1.0;
  double delta_ = 0.0;
  std::optional<Matrix> x_star_;
  std::optional<double> f_star_;
};

struct QuadraticOptions {
  // Entries of the mean target are N(0, center_scale^2).
  double center_scale = 1.0;
  // Entries of X0 are N(0, init_scale^2); zero means X0 = 0.
  double init_scale = 0.0;
};

// A_k = A_bar + delta * B_k with sum_k B_k = 0 and (1/K) sum ||B_k||^2 = 1, so
// the heterogeneity equals delta^2 at every X. Throws InvalidArg for K = 1 with
// delta > 0.
ProblemInstance make_quadratic_align(int m, int n, int workers, double delta,
                                     std::uint64_t seed, const QuadraticOptions& options = {});

struct RayleighOptions {
  double init_scale = 0.3;
  // Box used for the numerical L and delta estimates.
  double radius = 2.0;
  int estimate_samples = 400;
};

// Nonconvex factorization-style objective. L and delta are estimated by
// sampling on the ball ||X||_F <= radius and stored as such.
ProblemInstance make_rayleigh_nonconvex(int m, int n, int workers, double delta,
                                        std::uint64_t seed, const RayleighOptions& options = {});

enum class NoiseKind : std::uint32_t { None = 0, Gaussian = 1, HeavyTailed = 2 };

std::string_view to_string(NoiseKind kind) noexcept;

// Additive gradient noise. Gaussian entries have variance sigma^2/(m n) so that
// E||xi||_F^2 = sigma^2. Heavy-tailed entries are scale * Student-t(dof) with
// scale calibrated so that E||xi||_F^p ~= sigma^p.
struct NoiseModel {
  NoiseKind kind = NoiseKind::None;
  double sigma = 0.0;
  double p = 2.0;
  double dof = 0.0;
  double scale = 0.0;

  static NoiseModel none() { return {}; }
  static NoiseModel gaussian(double sigma);
  static NoiseModel heavy_tailed(double sigma, double p, double dof, double scale);

  Matrix sample(int rows, int cols, Xoshiro256& rng) const;
};

// Monte-Carlo bisection for the Student-t scale. Deterministic in `seed`.
// Throws InvalidArg (dof <= p, p outside (1, 2], trials < 1e5) or
// CalibrationFailed.
double calibrate_heavy_tail(double sigma, double p, double dof, int trials, int rows, int cols,
                            std::uint64_t seed);

inline constexpr int kMinCalibrationTrials = 100000;
inline constexpr double kDefaultDofOffset = 0.3;

// Convenience: dof = p + 0.3 and calibrated scale.
NoiseModel make_heavy_tailed_noise(double sigma, double p, int rows, int cols, std::uint64_t seed,
                                   int trials = kMinCalibrationTrials);

// grad f_k(X) + xi. Throws ShapeMismatch.
Matrix stochastic_gradient(const ProblemInstance& problem, int worker, const Matrix& x,
                           const NoiseModel& noise, Xoshiro256& rng);

// Binary blob, little endian; layout documented in docs/problem_format.md.
void write_problem(std::ostream& out, const ProblemInstance& problem);
ProblemInstance read_problem(std::istream& in);

}  // namespace fedmuon
