#include "fedmuon/error.hpp"
#include "fedmuon/ortho.hpp"

#include "../support/jacobi_svd.hpp"
#include "../support/random_matrices.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace fedmuon;
using fedmuon::testing::conditioned_matrix;
using fedmuon::testing::gaussian_matrix;
using fedmuon::testing::reference_polar;

TEST_SUITE("ortho") {
  TEST_CASE("identity is its own polar factor") {
    const OrthoResult r = orthonormalize_exact(Matrix::Identity(2, 2));
    CHECK(r.rank == 2);
    CHECK((r.factor - Matrix::Identity(2, 2)).norm() < 1e-14);
  }

  TEST_CASE("positive diagonal maps to identity") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 2.0;
    m(1, 1) = 3.0;
    const OrthoResult r = orthonormalize_exact(m);
    CHECK(r.rank == 2);
    CHECK((r.factor - Matrix::Identity(2, 2)).norm() < 1e-14);
  }

  TEST_CASE("zero matrix maps to zero factor with rank 0") {
    const OrthoResult r = orthonormalize_exact(Matrix::Zero(3, 2));
    CHECK(r.rank == 0);
    CHECK(r.factor.rows() == 3);
    CHECK(r.factor.cols() == 2);
    CHECK(r.factor.norm() == 0.0);
  }

  TEST_CASE("random 4x3 factor is orthonormal and matches the reference") {
    Xoshiro256 rng(42);
    const Matrix m = gaussian_matrix(4, 3, rng);
    const OrthoResult r = orthonormalize_exact(m);
    CHECK(r.rank == 3);
    CHECK((r.factor.transpose() * r.factor - Matrix::Identity(3, 3)).norm() < 1e-10);
    CHECK((r.factor - reference_polar(m)).norm() < 1e-10);
  }

  TEST_CASE("wide matrices are handled") {
    Xoshiro256 rng(3);
    const Matrix m = gaussian_matrix(3, 7, rng);
    const OrthoResult r = orthonormalize_exact(m);
    CHECK(r.rank == 3);
    CHECK((r.factor * r.factor.transpose() - Matrix::Identity(3, 3)).norm() < 1e-10);
    CHECK((r.factor - reference_polar(m)).norm() < 1e-10);
  }

  TEST_CASE("rank-deficient input keeps only the retained subspace") {
    Xoshiro256 rng(9);
    const Matrix a = gaussian_matrix(6, 1, rng);
    const Matrix b = gaussian_matrix(4, 1, rng);
    const Matrix m = a * b.transpose();
    const OrthoResult r = orthonormalize_exact(m);
    CHECK(r.rank == 1);
    const Matrix expected = (a / a.norm()) * (b / b.norm()).transpose();
    CHECK((r.factor - expected).norm() < 1e-10);
    CHECK(std::abs(r.factor.norm() - 1.0) < 1e-10);
  }

  TEST_CASE("spectral norm is one and Frobenius norm is sqrt(rank)") {
    Xoshiro256 rng(17);
    for (int trial = 0; trial < 25; ++trial) {
      const int rows = 2 + trial % 7;
      const int cols = 1 + (trial * 5) % 6;
      const Matrix m = conditioned_matrix(rows, cols, 1e3, rng);
      const OrthoResult r = orthonormalize_exact(m);
      CHECK(std::abs(spectral_norm(r.factor) - 1.0) < 1e-10);
      CHECK(std::abs(r.factor.norm() - std::sqrt(r.rank)) < 1e-10);
    }
  }

  TEST_CASE("absolute cutoff drops small singular values") {
    Matrix m = Matrix::Zero(3, 3);
    m(0, 0) = 1.0;
    m(1, 1) = 1e-3;
    m(2, 2) = 1e-8;
    CHECK(orthonormalize_exact(m, 1e-6).rank == 2);
    CHECK(orthonormalize_exact(m, 1e-2).rank == 1);
    CHECK(orthonormalize_exact(m).rank == 3);
    CHECK(orthonormalize_exact_relative(m, 1e-5).rank == 2);
  }

  TEST_CASE("non-finite input is rejected") {
    Matrix m = Matrix::Identity(2, 2);
    m(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(orthonormalize_exact(m), Error);
    try {
      newton_schulz(m);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonFiniteInput);
    }
  }

  TEST_CASE("singular values are descending") {
    Xoshiro256 rng(5);
    const Vector s = singular_values(gaussian_matrix(5, 4, rng));
    REQUIRE(s.size() == 4);
    for (int i = 1; i < s.size(); ++i) CHECK(s(i - 1) >= s(i));
  }
}

TEST_SUITE("newton_schulz") {
  TEST_CASE("identity stays near identity") {
    const OrthoResult r = newton_schulz(Matrix::Identity(2, 2));
    CHECK((r.factor - Matrix::Identity(2, 2)).norm() < kNewtonSchulzSvTolerance * std::sqrt(2.0));
  }

  TEST_CASE("random 8x4 lands near the exact factor") {
    Xoshiro256 rng(8);
    const Matrix m = gaussian_matrix(8, 4, rng);
    const OrthoResult ns = newton_schulz(m);
    const OrthoResult exact = orthonormalize_exact(m, 0.0);
    CHECK((ns.factor - exact.factor).norm() < kNewtonSchulzSvTolerance * 2.0);
    CHECK(ns.rank == 4);
  }

  TEST_CASE("tiny singular values are only partially lifted") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 1.0;
    m(1, 1) = 1e-9;
    const OrthoResult r = newton_schulz(m);
    CHECK(all_finite(r.factor));
    CHECK(spectral_norm(r.factor) <= 1.0 + kNewtonSchulzSvTolerance);
    CHECK(r.factor(1, 1) < 0.5);
  }

  TEST_CASE("guards") {
    CHECK_THROWS_AS(newton_schulz(Matrix::Zero(3, 2)), Error);
    NewtonSchulzParams params;
    params.iters = 0;
    CHECK_THROWS_AS(newton_schulz(Matrix::Identity(2, 2), params), Error);
  }

  TEST_CASE("orthogonalizer applies the rank-0 convention for both methods") {
    Orthogonalizer exact;
    Orthogonalizer ns;
    ns.method = OrthoMethod::NewtonSchulz;
    CHECK(exact(Matrix::Zero(4, 2)).rank == 0);
    const OrthoResult r = ns(Matrix::Zero(4, 2));
    CHECK(r.rank == 0);
    CHECK(r.factor.norm() == 0.0);
  }
}

TEST_SUITE("reference oracle") {
  TEST_CASE("jacobi reference reconstructs its input") {
    Xoshiro256 rng(1);
    for (int rows : {3, 6}) {
      for (int cols : {2, 5}) {
        const Matrix m = gaussian_matrix(rows, cols, rng);
        const auto svd = fedmuon::testing::jacobi_svd(m);
        const Matrix back = svd.u * svd.s.asDiagonal() * svd.v.transpose();
        CHECK((back - m).norm() < 1e-12 * m.norm() * 10);
      }
    }
  }
}
