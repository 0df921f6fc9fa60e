#include "groundlab/rng.hpp"

#include <cmath>

namespace groundlab {
namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

// splitmix64 output function
std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace

RandomStream::RandomStream(std::uint64_t raw_identity)
    : identity_(raw_identity), state_(raw_identity) {}

RandomStream::RandomStream(std::uint64_t seed, std::string_view tag)
    : RandomStream(mix64(mix64(seed + kGamma) ^ fnv1a(tag))) {}

std::uint64_t RandomStream::next_u64() {
  state_ += kGamma;
  return mix64(state_);
}

double RandomStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::next_below(std::uint64_t bound) {
  // modulo with rejection of the biased tail
  std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t x = next_u64();
    if (x >= threshold) return x % bound;
  }
}

double RandomStream::next_normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * next_double() - 1.0;
    v = 2.0 * next_double() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double f = std::sqrt(-2.0 * std::log(s) / s);
  cached_normal_ = v * f;
  has_cached_normal_ = true;
  return u * f;
}

RandomStream RandomStream::fork(std::string_view tag) const {
  return RandomStream(mix64(identity_ ^ fnv1a(tag)));
}

RandomStream RandomStream::fork(std::uint64_t index) const {
  return RandomStream(mix64(identity_ + (index + 1) * kGamma));
}

}  // namespace groundlab
