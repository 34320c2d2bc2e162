#include "fedmuon/problems.hpp"

#include "fedmuon/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <string>

namespace fedmuon {

namespace {

Matrix gaussian_matrix(int rows, int cols, double stddev, Xoshiro256& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  // Row-major fill so the draw order matches the serialized layout.
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = stddev * normal(rng);
  return out;
}

// Zero-sum directions with (1/K) sum ||B_k||_F^2 = 1.
std::vector<Matrix> zero_sum_directions(int m, int n, int workers, Xoshiro256& rng) {
  std::vector<Matrix> dirs;
  dirs.reserve(workers);
  Matrix mean = Matrix::Zero(m, n);
  for (int k = 0; k < workers; ++k) {
    dirs.push_back(gaussian_matrix(m, n, 1.0, rng));
    mean += dirs.back();
  }
  mean /= workers;
  double sq = 0.0;
  for (auto& d : dirs) {
    d -= mean;
    sq += d.squaredNorm();
  }
  const double rms = std::sqrt(sq / workers);
  for (auto& d : dirs) d /= rms;
  return dirs;
}

void validate_dims(int m, int n, int workers, double delta) {
  if (m < 1 || n < 1) throw Error(ErrorCode::InvalidArg, "problem shape must be positive");
  if (workers < 1) throw Error(ErrorCode::InvalidArg, "K must be >= 1");
  if (!(delta >= 0.0) || !std::isfinite(delta))
    throw Error(ErrorCode::InvalidArg, "delta must be finite and >= 0");
  if (workers == 1 && delta > 0.0)
    throw Error(ErrorCode::InvalidArg, "delta > 0 requires at least two workers");
}

std::vector<Matrix> build_targets(int m, int n, int workers, double delta, double center_scale,
                                  Xoshiro256& rng, Matrix& center) {
  center = gaussian_matrix(m, n, center_scale, rng);
  std::vector<Matrix> targets(workers, center);
  if (delta > 0.0) {
    auto dirs = zero_sum_directions(m, n, workers, rng);
    for (int k = 0; k < workers; ++k) targets[k] += delta * dirs[k];
  }
  return targets;
}

}  // namespace

std::string_view to_string(ProblemFamily family) noexcept {
  switch (family) {
    case ProblemFamily::QuadraticAlign: return "quad";
    case ProblemFamily::RayleighNonconvex: return "rayleigh";
  }
  return "unknown";
}

ProblemInstance::ProblemInstance(ProblemFamily family, std::vector<Matrix> targets, Matrix x0,
                                 double lipschitz, double delta, std::optional<Matrix> x_star,
                                 std::optional<double> f_star)
    : family_(family),
      targets_(std::move(targets)),
      x0_(std::move(x0)),
      lipschitz_(lipschitz),
      delta_(delta),
      x_star_(std::move(x_star)),
      f_star_(f_star) {
  if (targets_.empty()) throw Error(ErrorCode::EmptyWorkerSet, "problem needs at least one target");
  rows_ = static_cast<int>(targets_.front().rows());
  cols_ = static_cast<int>(targets_.front().cols());
  for (const auto& a : targets_) {
    if (!same_shape(a, targets_.front()))
      throw Error(ErrorCode::ShapeMismatch, "targets must share one shape");
  }
  check_shape(x0_);
  if (x_star_) check_shape(*x_star_);

  target_mean_ = Matrix::Zero(rows_, cols_);
  for (const auto& a : targets_) target_mean_ += a;
  target_mean_ /= workers();

  if (family_ == ProblemFamily::RayleighNonconvex) {
    gram_mean_ = Matrix::Zero(cols_, cols_);
    grams_.reserve(targets_.size());
    for (const auto& a : targets_) {
      grams_.push_back(a.transpose() * a);
      gram_mean_ += grams_.back();
    }
    gram_mean_ /= workers();
  }
}

void ProblemInstance::check_shape(const Matrix& x) const {
  if (x.rows() != rows_ || x.cols() != cols_) {
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(rows_) + "x" +
                                              std::to_string(cols_) + ", got " + shape_string(x));
  }
}

void ProblemInstance::check_worker(int worker) const {
  if (worker < 0 || worker >= workers())
    throw Error(ErrorCode::InvalidArg, "worker id out of range: " + std::to_string(worker));
}

double ProblemInstance::local_loss(int worker, const Matrix& x) const {
  check_worker(worker);
  check_shape(x);
  if (family_ == ProblemFamily::QuadraticAlign) return 0.5 * (x - targets_[worker]).squaredNorm();
  return 0.25 * (x.transpose() * x - grams_[worker]).squaredNorm();
}

Matrix ProblemInstance::local_gradient(int worker, const Matrix& x) const {
  check_worker(worker);
  check_shape(x);
  if (family_ == ProblemFamily::QuadraticAlign) return x - targets_[worker];
  return x * (x.transpose() * x - grams_[worker]);
}

double ProblemInstance::loss(const Matrix& x) const {
  double sum = 0.0;
  for (int k = 0; k < workers(); ++k) sum += local_loss(k, x);
  return sum / workers();
}

Matrix ProblemInstance::gradient(const Matrix& x) const {
  check_shape(x);
  if (family_ == ProblemFamily::QuadraticAlign) return x - target_mean_;
  return x * (x.transpose() * x - gram_mean_);
}

double ProblemInstance::heterogeneity(const Matrix& x) const {
  const Matrix full = gradient(x);
  double sum = 0.0;
  for (int k = 0; k < workers(); ++k) sum += (local_gradient(k, x) - full).squaredNorm();
  return sum / workers();
}

ProblemInstance make_quadratic_align(int m, int n, int workers, double delta, std::uint64_t seed,
                                     const QuadraticOptions& options) {
  validate_dims(m, n, workers, delta);
  CounterStream stream(seed, 0);
  auto rng = stream.at(0, StreamPurpose::ProblemSetup);
  Matrix center;
  auto targets = build_targets(m, n, workers, delta, options.center_scale, rng, center);
  Matrix x0 = options.init_scale > 0.0 ? gaussian_matrix(m, n, options.init_scale, rng)
                                       : Matrix::Zero(m, n);

  double f_star = 0.0;
  Matrix mean = Matrix::Zero(m, n);
  for (const auto& a : targets) mean += a;
  mean /= workers;
  for (const auto& a : targets) f_star += 0.5 * (mean - a).squaredNorm();
  f_star /= workers;

  return ProblemInstance(ProblemFamily::QuadraticAlign, std::move(targets), std::move(x0), 1.0,
                         delta, mean, f_star);
}

ProblemInstance make_rayleigh_nonconvex(int m, int n, int workers, double delta,
                                        std::uint64_t seed, const RayleighOptions& options) {
  validate_dims(m, n, workers, delta);
  CounterStream stream(seed, 0);
  auto rng = stream.at(0, StreamPurpose::ProblemSetup);
  Matrix center;
  auto targets =
      build_targets(m, n, workers, delta, 1.0 / std::sqrt(static_cast<double>(m)), rng, center);
  Matrix x0 = gaussian_matrix(m, n, options.init_scale, rng);

  // Provisional instance to evaluate gradients for the estimates.
  ProblemInstance probe(ProblemFamily::RayleighNonconvex, targets, x0, 1.0, delta, std::nullopt,
                        std::nullopt);

  auto est_rng = stream.at(1, StreamPurpose::ProblemSetup);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double lip = 0.0;
  double het = 0.0;
  for (int s = 0; s < options.estimate_samples; ++s) {
    Matrix x = gaussian_matrix(m, n, 1.0, est_rng);
    x *= options.radius * unit(est_rng) / x.norm();
    Matrix dx = gaussian_matrix(m, n, 1.0, est_rng);
    dx *= 1e-4 / dx.norm();
    for (int k = 0; k < workers; ++k) {
      const double ratio =
          (probe.local_gradient(k, x + dx) - probe.local_gradient(k, x)).norm() / dx.norm();
      lip = std::max(lip, ratio);
    }
    het = std::max(het, probe.heterogeneity(x));
  }

  std::optional<Matrix> x_star;
  std::optional<double> f_star;
  Matrix gram_mean = Matrix::Zero(n, n);
  for (const auto& a : targets) gram_mean += a.transpose() * a;
  gram_mean /= workers;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram_mean);
  const Vector evals = eig.eigenvalues().cwiseMax(0.0);
  int positive = 0;
  for (int i = 0; i < evals.size(); ++i) positive += evals(i) > 1e-12 * evals.maxCoeff();
  if (positive <= m) {
    // X* = [S^{1/2} V^T restricted to the top eigenpairs; 0] gives X*^T X* = G_bar.
    Matrix root = evals.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
    Matrix xs = Matrix::Zero(m, n);
    const int take = std::min<int>(m, n);
    xs.topRows(take) = root.bottomRows(take);
    x_star = xs;
    double fs = 0.0;
    for (const auto& a : targets) fs += 0.25 * (a.transpose() * a - gram_mean).squaredNorm();
    f_star = fs / workers;
  }

  return ProblemInstance(ProblemFamily::RayleighNonconvex, std::move(targets), std::move(x0), lip,
                         std::sqrt(het), std::move(x_star), f_star);
}

Matrix stochastic_gradient(const ProblemInstance& problem, int worker, const Matrix& x,
                           const NoiseModel& noise, Xoshiro256& rng) {
  Matrix g = problem.local_gradient(worker, x);
  if (noise.kind != NoiseKind::None) g += noise.sample(problem.rows(), problem.cols(), rng);
  return g;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[4] = {'F', 'M', 'P', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "problem blobs are written in host order and assume little endian");

template <typename T>
void put(std::ostream& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw Error(ErrorCode::Io, "truncated problem blob");
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

void put_matrix(std::ostream& out, const Matrix& a) {
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) put<double>(out, a(i, j));
}

Matrix get_matrix(std::istream& in, int rows, int cols) {
  Matrix a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = get<double>(in);
  return a;
}

}  // namespace

void write_problem(std::ostream& out, const ProblemInstance& problem) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(problem.family()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(problem.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(problem.cols()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(problem.workers()));
  put<double>(out, problem.lipschitz());
  put<double>(out, problem.delta());
  put<double>(out, problem.f_star().value_or(std::numeric_limits<double>::quiet_NaN()));
  put<std::uint8_t>(out, problem.f_star().has_value() ? 1 : 0);
  put<std::uint8_t>(out, problem.x_star().has_value() ? 1 : 0);
  put_matrix(out, problem.x0());
  for (const auto& a : problem.targets()) put_matrix(out, a);
  if (problem.x_star()) put_matrix(out, *problem.x_star());
  if (!out) throw Error(ErrorCode::Io, "failed writing problem blob");
}

ProblemInstance read_problem(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw Error(ErrorCode::Io, "not a problem blob (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != kFormatVersion)
    throw Error(ErrorCode::Io, "unsupported problem blob version " + std::to_string(version));
  const auto family_raw = get<std::uint32_t>(in);
  if (family_raw > 1) throw Error(ErrorCode::Io, "unknown problem family");
  const int m = static_cast<int>(get<std::uint32_t>(in));
  const int n = static_cast<int>(get<std::uint32_t>(in));
  const int workers = static_cast<int>(get<std::uint32_t>(in));
  if (m < 1 || n < 1 || workers < 1) throw Error(ErrorCode::Io, "bad problem blob dimensions");
  const double lip = get<double>(in);
  const double delta = get<double>(in);
  const double f_star_raw = get<double>(in);
  const bool has_f_star = get<std::uint8_t>(in) != 0;
  const bool has_x_star = get<std::uint8_t>(in) != 0;
  Matrix x0 = get_matrix(in, m, n);
  std::vector<Matrix> targets;
  targets.reserve(workers);
  for (int k = 0; k < workers; ++k) targets.push_back(get_matrix(in, m, n));
  std::optional<Matrix> x_star;
  if (has_x_star) x_star = get_matrix(in, m, n);
  std::optional<double> f_star;
  if (has_f_star) f_star = f_star_raw;
  return ProblemInstance(static_cast<ProblemFamily>(family_raw), std::move(targets), std::move(x0),
                         lip, delta, std::move(x_star), f_star);
}

}  // namespace fedmuon
