#pragma once

#include "fedmuon/matrix.hpp"

#include <optional>

namespace fedmuon {

// Polar factor O = U V^T of a momentum matrix, restricted to the singular
// values that survive the cutoff.
struct OrthoResult {
  Matrix factor;
  int rank = 0;
  // Frobenius distance to the exact polar factor, when it was computed.
  std::optional<double> residual;
};

// Singular values tolerance of the exact path.
inline constexpr double kExactSvTolerance = 1e-10;
// Singular values of the default quintic land roughly in [0.7, 1.3].
inline constexpr double kNewtonSchulzSvTolerance = 0.35;
// Default cutoff is relative to the largest singular value.
inline constexpr double kDefaultRelativeCutoff = 1e-12;

// Exact polar factor via thin SVD. Singular values <= sv_cutoff are dropped;
// the zero matrix maps to the zero factor with rank 0.
// Throws Error(NonFiniteInput) on NaN/Inf.
OrthoResult orthonormalize_exact(const Matrix& m, double sv_cutoff);

// Same, with cutoff = kDefaultRelativeCutoff * sigma_max.
OrthoResult orthonormalize_exact(const Matrix& m);

// Cutoff given as a fraction of sigma_max.
OrthoResult orthonormalize_exact_relative(const Matrix& m, double relative_cutoff);

struct NewtonSchulzParams {
  int iters = 5;
  double a = 3.4445;
  double b = -4.7750;
  double c = 2.0315;
};

// Quintic Newton-Schulz iteration on Z0 = M / ||M||_F:
//   Z <- a Z + b Z (Z^T Z) + c Z (Z^T Z)^2
// Converges (approximately) for singular values in the iteration's basin,
// i.e. sigma_i / ||M||_F not vanishingly small. Tiny singular values are only
// partially lifted after a handful of iterations.
// Throws Error(ZeroMatrix) for M == 0, Error(NonFiniteInput) on NaN/Inf,
// Error(InvalidArg) for iters < 1.
OrthoResult newton_schulz(const Matrix& m, const NewtonSchulzParams& params = {});

enum class OrthoMethod { Exact, NewtonSchulz };

// Orthogonalizer used inside the optimizer. Applies the rank-0 convention for
// zero input regardless of method.
struct Orthogonalizer {
  OrthoMethod method = OrthoMethod::Exact;
  NewtonSchulzParams newton_schulz{};
  double relative_cutoff = kDefaultRelativeCutoff;

  OrthoResult operator()(const Matrix& m) const;
};

// Spectral norm (largest singular value).
double spectral_norm(const Matrix& m);

// Singular values in descending order.
Vector singular_values(const Matrix& m);

}  // namespace fedmuon
