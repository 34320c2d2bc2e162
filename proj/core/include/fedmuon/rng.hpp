#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace fedmuon {

// Counter-based streams: every draw site is addressed by (seed, worker, step,
// purpose) and gets its own generator, so results do not depend on the order
// in which workers or ensemble members execute.

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

// Mixes a key tuple into a single 64-bit value.
std::uint64_t mix_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                      std::uint64_t c) noexcept;

// xoshiro256**; satisfies UniformRandomBitGenerator.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

 private:
  std::array<std::uint64_t, 4> s_{};
};

enum class StreamPurpose : std::uint64_t {
  Gradient = 1,
  ProblemSetup = 2,
  Calibration = 3,
  TestData = 4,
};

// Per-worker deterministic stream. Draws for step t never depend on whether
// step t-1 was sampled.
class CounterStream {
 public:
  CounterStream() = default;
  CounterStream(std::uint64_t seed, std::uint64_t worker) noexcept
      : seed_(seed), worker_(worker) {}

  Xoshiro256 at(std::uint64_t step,
                StreamPurpose purpose = StreamPurpose::Gradient) const noexcept {
    return Xoshiro256(mix_key(seed_, worker_, step, static_cast<std::uint64_t>(purpose)));
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t worker() const noexcept { return worker_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t worker_ = 0;
};

}  // namespace fedmuon
