#ifndef MSP_CORE_RNG_HPP_
#define MSP_CORE_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace msp {

/// 64-bit finalizer used both as the generator step and for key derivation.
inline uint64_t mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline uint64_t hash_str(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Counter-based random stream. Streams are derived hierarchically
/// (run -> epoch -> batch -> sample) by hashing the parent key with a tag
/// and indices, so any worker can reconstruct its stream without shared
/// state. All sampling routines are hand-rolled on top of the raw 64-bit
/// output and therefore produce identical sequences on every platform.
class RngStream {
 public:
  explicit RngStream(uint64_t key = 0) : key_(key) {}

  /// Child stream keyed by a tag plus optional integer indices.
  RngStream derive(std::string_view tag) const {
    return RngStream(mix64(key_ ^ hash_str(tag)));
  }
  template <typename... Ix>
  RngStream derive(std::string_view tag, Ix... index) const {
    uint64_t k = key_ ^ hash_str(tag);
    ((k = mix64(k ^ static_cast<uint64_t>(index))), ...);
    return RngStream(k);
  }

  uint64_t next_u64() {
    counter_ += 1;
    return mix64(key_ ^ (counter_ * 0xD1342543DE82EF95ULL));
  }

  /// Uniform double in [0,1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform_in(double lo, double hi) {
    return lo + (hi - lo) * uniform();
  }

  /// Uniform integer in [0, n). n must be positive.
  uint64_t uniform_int(uint64_t n) {
    // Rejection sampling keeps the distribution exact.
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (no cached spare, fully stateless
  /// aside from the counter).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  uint64_t key() const { return key_; }

 private:
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
};

}  // namespace msp

#endif  // MSP_CORE_RNG_HPP_
