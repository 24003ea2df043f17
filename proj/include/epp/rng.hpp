#pragma once

#include <cstdint>
#include <random>

namespace epp {

/// Purposes of the independent random substreams. Each (seed, purpose, index)
/// triple names a stream that does not depend on evaluation order.
enum class StreamPurpose : std::uint64_t {
  PriorDraw = 1,
  Resample = 2,
  ClinicEffect = 3,
  Predictive = 4,
  Synthetic = 5,
};

/// Random stream for one (seed, purpose, index) triple. The engine is
/// std::mt19937_64; the seeding hash decorrelates neighbouring indices.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index);
  RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index, std::uint64_t sub_index);

  /// Uniform on the open interval (0, 1).
  double uniform();

  double normal();

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace epp
