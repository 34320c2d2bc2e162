#include "fedmuon/ortho.hpp"

#include "fedmuon/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <string>

namespace fedmuon {

namespace {

void require_finite(const Matrix& m, const char* where) {
  if (!all_finite(m)) {
    throw Error(ErrorCode::NonFiniteInput, std::string(where) + ": input contains NaN or Inf");
  }
}

OrthoResult exact_impl(const Matrix& m, double sv_cutoff, bool relative) {
  require_finite(m, "orthonormalize_exact");
  if (sv_cutoff < 0.0) {
    throw Error(ErrorCode::InvalidArg, "orthonormalize_exact: sv_cutoff must be >= 0");
  }
  OrthoResult out;
  out.factor = Matrix::Zero(m.rows(), m.cols());
  out.residual = 0.0;
  if (m.size() == 0 || m.isZero(0.0)) return out;

  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double cutoff = relative ? sv_cutoff * sv(0) : sv_cutoff;

  int rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  out.rank = rank;
  if (rank > 0) {
    out.factor.noalias() =
        svd.matrixU().leftCols(rank) * svd.matrixV().leftCols(rank).transpose();
  }
  return out;
}

}  // namespace

OrthoResult orthonormalize_exact(const Matrix& m, double sv_cutoff) {
  return exact_impl(m, sv_cutoff, false);
}

OrthoResult orthonormalize_exact(const Matrix& m) {
  return exact_impl(m, kDefaultRelativeCutoff, true);
}

OrthoResult orthonormalize_exact_relative(const Matrix& m, double relative_cutoff) {
  return exact_impl(m, relative_cutoff, true);
}

OrthoResult newton_schulz(const Matrix& m, const NewtonSchulzParams& params) {
  require_finite(m, "newton_schulz");
  if (params.iters < 1) {
    throw Error(ErrorCode::InvalidArg, "newton_schulz: iters must be >= 1");
  }
  const double norm = m.norm();
  if (norm == 0.0) {
    throw Error(ErrorCode::ZeroMatrix, "newton_schulz: ||M||_F = 0, use the rank-0 convention");
  }

  Matrix z = m / norm;
  Matrix gram(m.cols(), m.cols());
  Matrix poly(m.cols(), m.cols());
  for (int k = 0; k < params.iters; ++k) {
    gram.noalias() = z.transpose() * z;
    poly.noalias() = params.b * gram + params.c * gram * gram;
    z = (params.a * z + z * poly).eval();
  }

  OrthoResult out;
  out.factor = std::move(z);
  out.rank = static_cast<int>(std::min(m.rows(), m.cols()));
  return out;
}

OrthoResult Orthogonalizer::operator()(const Matrix& m) const {
  if (method == OrthoMethod::Exact) return orthonormalize_exact_relative(m, relative_cutoff);
  if (all_finite(m) && m.isZero(0.0)) {
    OrthoResult zero;
    zero.factor = Matrix::Zero(m.rows(), m.cols());
    return zero;
  }
  return fedmuon::newton_schulz(m, newton_schulz);
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return singular_values(m)(0);
}

Vector singular_values(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues();
}

}  // namespace fedmuon
