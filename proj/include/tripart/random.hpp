#pragma once

#include <cstdint>

namespace tripart {

/// xoshiro256++ generator with splittable, key-derived substreams.
///
/// A stream is identified by a 64-bit key. `substream(a, b)` derives a new
/// stream from the key (not from the current state), so the draws a
/// consumer sees depend only on the run seed and the labels it passes,
/// never on how much of the parent stream has already been used.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()();

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();

  RandomStream substream(std::uint64_t a, std::uint64_t b = 0) const;

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t s_[4];
};

/// Stateless 64-bit mixer (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x);

}  // namespace tripart
