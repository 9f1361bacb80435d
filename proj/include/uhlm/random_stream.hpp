#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace uhlm {

/// Labelled, seeded pseudo-random stream.
///
/// The engine state is a function of (seed, label) only, so two streams
/// constructed with the same pair replay the same values draw for draw.
/// Streams are single-owner; parallel consumers derive children with
/// distinct labels instead of sharing one instance.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string label);

  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& label() const noexcept { return label_; }
  std::uint64_t draws() const noexcept { return draws_; }

  /// Child stream labelled "<label>/<child>".
  RandomStream derive(std::string_view child) const;
  RandomStream derive(std::uint64_t index) const;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1); never returns 0.
  double uniform_open();
  double uniform(double lo, double hi);
  /// Exponential with unit mean.
  double exponential();
  double normal();
  /// Gamma(shape, 1).
  double gamma(double shape);
  std::uint64_t next_u64();

 private:
  std::uint64_t seed_;
  std::string label_;
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
};

/// FNV-1a 64-bit hash; used for label mixing and config hashes.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace uhlm
