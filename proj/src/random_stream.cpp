#include "uhlm/random_stream.hpp"

#include <cmath>

namespace uhlm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

RandomStream::RandomStream(std::uint64_t seed, std::string label)
    : seed_(seed), label_(std::move(label)) {
  std::seed_seq seq{splitmix64(seed_), splitmix64(fnv1a64(label_)),
                    splitmix64(seed_ ^ fnv1a64(label_))};
  engine_.seed(seq);
}

RandomStream RandomStream::derive(std::string_view child) const {
  std::string label = label_;
  label += '/';
  label += child;
  return RandomStream(seed_, std::move(label));
}

RandomStream RandomStream::derive(std::uint64_t index) const {
  return derive(std::to_string(index));
}

std::uint64_t RandomStream::next_u64() {
  ++draws_;
  return engine_();
}

double RandomStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RandomStream::exponential() { return -std::log(uniform_open()); }

double RandomStream::normal() {
  // Box-Muller; the second variate is discarded so each call costs two draws.
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double RandomStream::gamma(double shape) {
  // Marsaglia-Tsang, with the shape < 1 boost.
  if (shape < 1.0) {
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform_open(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace uhlm
