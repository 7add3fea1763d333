#include "tripart/random.hpp"

namespace tripart {

namespace {

std::uint64_t splitmix_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  return mix64(state);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RandomStream::RandomStream(std::uint64_t seed) : key_(seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix_next(sm);
}

RandomStream::result_type RandomStream::operator()() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RandomStream::uniform() {
  // (k + 0.5) / 2^53 never hits 0 or 1.
  const std::uint64_t k = (*this)() >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

RandomStream RandomStream::substream(std::uint64_t a, std::uint64_t b) const {
  std::uint64_t k = mix64(key_ ^ 0x6a09e667f3bcc909ULL);
  k = mix64(k ^ mix64(a + 0x3c6ef372fe94f82bULL));
  k = mix64(k ^ mix64(b + 0xa54ff53a5f1d36f1ULL));
  return RandomStream(k);
}

}  // namespace tripart
