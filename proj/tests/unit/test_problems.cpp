#include "fedmuon/error.hpp"
#include "fedmuon/problems.hpp"

#include "../support/random_matrices.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace fedmuon;
using fedmuon::testing::gaussian_matrix;

namespace {

// Central differences of the global loss, entry by entry.
Matrix numeric_gradient(const ProblemInstance& problem, const Matrix& x, double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  for (int j = 0; j < x.cols(); ++j) {
    for (int i = 0; i < x.rows(); ++i) {
      Matrix plus = x;
      Matrix minus = x;
      plus(i, j) += h;
      minus(i, j) -= h;
      g(i, j) = (problem.loss(plus) - problem.loss(minus)) / (2.0 * h);
    }
  }
  return g;
}

}  // namespace

TEST_SUITE("quadratic_align") {
  TEST_CASE("delta = 0 gives identical targets") {
    const ProblemInstance p = make_quadratic_align(5, 3, 4, 0.0, 1);
    for (int k = 1; k < 4; ++k) CHECK((p.targets()[k] - p.targets()[0]).norm() == 0.0);
    Xoshiro256 rng(2);
    const Matrix x = gaussian_matrix(5, 3, rng);
    for (int k = 1; k < 4; ++k)
      CHECK((p.local_gradient(k, x) - p.local_gradient(0, x)).norm() == 0.0);
  }

  TEST_CASE("two workers: opposite perturbations of unit norm") {
    const double delta = 0.8;
    const ProblemInstance p = make_quadratic_align(4, 4, 2, delta, 3);
    const Matrix b1 = (p.targets()[0] - p.target_mean()) / delta;
    const Matrix b2 = (p.targets()[1] - p.target_mean()) / delta;
    CHECK((b1 + b2).norm() < 1e-12);
    CHECK(b1.norm() == doctest::Approx(1.0).epsilon(1e-12));
    Xoshiro256 rng(4);
    for (int i = 0; i < 3; ++i) {
      const Matrix x = gaussian_matrix(4, 4, rng);
      CHECK((p.local_gradient(0, x) - p.gradient(x)).norm() == doctest::Approx(delta).epsilon(1e-12));
    }
  }

  TEST_CASE("heterogeneity equals delta squared everywhere") {
    const ProblemInstance p = make_quadratic_align(8, 4, 4, 0.7, 5);
    Xoshiro256 rng(6);
    for (int i = 0; i < 5; ++i) {
      const Matrix x = 3.0 * gaussian_matrix(8, 4, rng);
      CHECK(p.heterogeneity(x) == doctest::Approx(0.49).epsilon(1e-12));
    }
  }

  TEST_CASE("full gradient is X minus the mean target and matches finite differences") {
    const ProblemInstance p = make_quadratic_align(6, 3, 3, 0.5, 7);
    Xoshiro256 rng(8);
    for (int i = 0; i < 3; ++i) {
      const Matrix x = gaussian_matrix(6, 3, rng);
      const Matrix g = p.gradient(x);
      CHECK((g - (x - p.target_mean())).norm() < 1e-12);
      const Matrix fd = numeric_gradient(p, x);
      CHECK((fd - g).norm() / g.norm() < 1e-6);
    }
  }

  TEST_CASE("local gradients are 1-Lipschitz with equality") {
    const ProblemInstance p = make_quadratic_align(4, 3, 2, 0.3, 9);
    CHECK(p.lipschitz() == 1.0);
    Xoshiro256 rng(10);
    for (int i = 0; i < 5; ++i) {
      const Matrix x1 = gaussian_matrix(4, 3, rng);
      const Matrix x2 = gaussian_matrix(4, 3, rng);
      const double lhs = (p.local_gradient(1, x1) - p.local_gradient(1, x2)).norm();
      CHECK(lhs == doctest::Approx((x1 - x2).norm()).epsilon(1e-12));
    }
  }

  TEST_CASE("optimum and optimal value are recorded") {
    const ProblemInstance p = make_quadratic_align(3, 2, 3, 0.5, 11);
    REQUIRE(p.x_star().has_value());
    REQUIRE(p.f_star().has_value());
    CHECK(p.gradient(*p.x_star()).norm() < 1e-12);
    CHECK(p.loss(*p.x_star()) == doctest::Approx(*p.f_star()).epsilon(1e-12));
    CHECK(*p.f_star() == doctest::Approx(0.5 * 0.25).epsilon(1e-12));
  }

  TEST_CASE("guards") {
    CHECK_THROWS_AS(make_quadratic_align(3, 2, 1, 0.5, 1), Error);
    CHECK_THROWS_AS(make_quadratic_align(3, 2, 0, 0.0, 1), Error);
    CHECK_THROWS_AS(make_quadratic_align(3, 2, 2, -1.0, 1), Error);
    const ProblemInstance p = make_quadratic_align(3, 2, 2, 0.0, 1);
    CHECK_THROWS_AS(p.gradient(Matrix::Zero(2, 3)), Error);
    CHECK_THROWS_AS(p.local_gradient(2, Matrix::Zero(3, 2)), Error);
  }

  TEST_CASE("seeded construction is reproducible") {
    const ProblemInstance a = make_quadratic_align(4, 3, 3, 0.4, 99);
    const ProblemInstance b = make_quadratic_align(4, 3, 3, 0.4, 99);
    for (int k = 0; k < 3; ++k) CHECK(a.targets()[k] == b.targets()[k]);
  }
}

TEST_SUITE("rayleigh_nonconvex") {
  TEST_CASE("gradient matches finite differences") {
    const ProblemInstance p = make_rayleigh_nonconvex(5, 3, 3, 0.4, 12);
    Xoshiro256 rng(13);
    for (int i = 0; i < 3; ++i) {
      const Matrix x = gaussian_matrix(5, 3, rng);
      const Matrix g = p.gradient(x);
      const Matrix fd = numeric_gradient(p, x);
      CHECK((fd - g).norm() / g.norm() < 1e-6);
    }
  }

  TEST_CASE("local loss matches its definition") {
    const ProblemInstance p = make_rayleigh_nonconvex(4, 2, 2, 0.2, 14);
    Xoshiro256 rng(15);
    const Matrix x = gaussian_matrix(4, 2, rng);
    const Matrix& a = p.targets()[1];
    const Matrix d = x.transpose() * x - a.transpose() * a;
    CHECK(p.local_loss(1, x) == doctest::Approx(0.25 * d.squaredNorm()).epsilon(1e-12));
  }

  TEST_CASE("estimated constants are positive and finite") {
    const ProblemInstance p = make_rayleigh_nonconvex(4, 3, 2, 0.5, 16);
    CHECK(std::isfinite(p.lipschitz()));
    CHECK(p.lipschitz() > 0.0);
    CHECK(p.delta() >= 0.0);
  }
}

TEST_SUITE("noise") {
  TEST_CASE("noiseless gradient vanishes at the worker optimum") {
    const ProblemInstance p = make_quadratic_align(4, 3, 2, 0.5, 17);
    Xoshiro256 rng(1);
    for (int k = 0; k < 2; ++k)
      CHECK(stochastic_gradient(p, k, p.targets()[k], NoiseModel::none(), rng).norm() == 0.0);
  }

  TEST_CASE("gaussian sample mean concentrates") {
    const double sigma = 0.7;
    const NoiseModel noise = NoiseModel::gaussian(sigma);
    Xoshiro256 rng(18);
    const int draws = 100000;
    Matrix mean = Matrix::Zero(4, 3);
    double second = 0.0;
    for (int i = 0; i < draws; ++i) {
      const Matrix xi = noise.sample(4, 3, rng);
      mean += xi;
      second += xi.squaredNorm();
    }
    mean /= draws;
    CHECK(mean.norm() < 5.0 * sigma / std::sqrt(static_cast<double>(draws)));
    CHECK(second / draws == doctest::Approx(sigma * sigma).epsilon(0.02));
  }

  TEST_CASE("heavy-tailed calibration hits the target moment") {
    const double sigma = 1.0;
    const double p = 1.5;
    const double dof = 1.8;
    const double scale = calibrate_heavy_tail(sigma, p, dof, kMinCalibrationTrials, 4, 4, 19);
    // Fresh draws with an unrelated generator.
    std::mt19937_64 gen(2024);
    std::student_t_distribution<double> t(dof);
    const int draws = 200000;
    double moment = 0.0;
    for (int i = 0; i < draws; ++i) {
      double sq = 0.0;
      for (int e = 0; e < 16; ++e) {
        const double v = scale * t(gen);
        sq += v * v;
      }
      moment += std::pow(std::sqrt(sq), p);
    }
    const double root = std::pow(moment / draws, 1.0 / p);
    CHECK(root >= 0.9);
    CHECK(root <= 1.1);
  }

  TEST_CASE("zero sigma calibrates to zero scale") {
    CHECK(calibrate_heavy_tail(0.0, 1.5, 1.8, kMinCalibrationTrials, 4, 4, 1) == 0.0);
  }

  TEST_CASE("near-gaussian tails match the closed-form second moment") {
    const double sigma = 1.0;
    const double dof = 1000.0;
    const int m = 4;
    const int n = 3;
    const double scale = calibrate_heavy_tail(sigma, 2.0, dof, kMinCalibrationTrials, m, n, 20);
    const double expected = sigma / std::sqrt(m * n * dof / (dof - 2.0));
    CHECK(scale == doctest::Approx(expected).epsilon(0.05));
  }

  TEST_CASE("calibration is bitwise reproducible") {
    const double a = calibrate_heavy_tail(1.0, 1.5, 1.8, kMinCalibrationTrials, 4, 4, 21);
    const double b = calibrate_heavy_tail(1.0, 1.5, 1.8, kMinCalibrationTrials, 4, 4, 21);
    CHECK(a == b);
  }

  TEST_CASE("calibration guards") {
    CHECK_THROWS_AS(calibrate_heavy_tail(1.0, 1.5, 1.4, kMinCalibrationTrials, 4, 4, 1), Error);
    CHECK_THROWS_AS(calibrate_heavy_tail(1.0, 2.5, 3.0, kMinCalibrationTrials, 4, 4, 1), Error);
    CHECK_THROWS_AS(calibrate_heavy_tail(1.0, 1.5, 1.8, 1000, 4, 4, 1), Error);
  }

  TEST_CASE("default heavy-tailed model uses dof = p + 0.3") {
    const NoiseModel noise = make_heavy_tailed_noise(1.0, 1.2, 4, 3, 1);
    CHECK(noise.kind == NoiseKind::HeavyTailed);
    CHECK(noise.dof == doctest::Approx(1.5));
    CHECK(noise.scale > 0.0);
  }
}

TEST_SUITE("problem serialization") {
  TEST_CASE("round trip preserves every field") {
    for (auto family : {ProblemFamily::QuadraticAlign, ProblemFamily::RayleighNonconvex}) {
      const ProblemInstance p = family == ProblemFamily::QuadraticAlign
                                    ? make_quadratic_align(5, 3, 3, 0.6, 22)
                                    : make_rayleigh_nonconvex(5, 3, 3, 0.6, 22);
      std::stringstream blob;
      write_problem(blob, p);
      const ProblemInstance q = read_problem(blob);
      CHECK(q.family() == p.family());
      CHECK(q.workers() == p.workers());
      CHECK(q.lipschitz() == p.lipschitz());
      CHECK(q.delta() == p.delta());
      CHECK(q.x0() == p.x0());
      for (int k = 0; k < p.workers(); ++k) CHECK(q.targets()[k] == p.targets()[k]);
      CHECK(q.x_star().has_value() == p.x_star().has_value());
      CHECK(q.f_star().has_value() == p.f_star().has_value());
      if (p.f_star()) CHECK(*q.f_star() == *p.f_star());
    }
  }

  TEST_CASE("bad input is rejected") {
    std::stringstream junk("not a problem");
    CHECK_THROWS_AS(read_problem(junk), Error);
    std::stringstream blob;
    write_problem(blob, make_quadratic_align(3, 2, 2, 0.1, 1));
    const std::string full = blob.str();
    std::stringstream truncated(full.substr(0, full.size() / 2));
    CHECK_THROWS_AS(read_problem(truncated), Error);
  }
}
