#ifndef DASMC_RNG_HPP
#define DASMC_RNG_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Core>

namespace dasmc {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Deterministic random stream with order-independent forking.
///
/// A stream is identified by a 64-bit key. fork(a, b, c) derives a child
/// stream whose key depends only on the parent key and the path (a, b, c),
/// never on how many draws the parent has produced. Forking the stream for
/// (iteration, particle) therefore yields the same child no matter which
/// thread touches it first. Draws come from xoshiro256++ seeded from the key.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(seed) { reset_state(); }

  std::uint64_t key() const { return key_; }

  RngStream fork(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    std::uint64_t k = detail::splitmix64(key_ ^ 0x8e2f0c5a61d3b947ULL);
    k = detail::splitmix64(k ^ a);
    k = detail::splitmix64(k ^ b);
    k = detail::splitmix64(k ^ c);
    return RngStream(k);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl64(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl64(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53 usable bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::uniform_below: n must be positive");
    // Rejection sampling keeps the draw exact for any n.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  /// Standard normal draw (Box-Muller, two uniforms per call).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    constexpr double kTwoPi = 6.283185307179586;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  Eigen::VectorXd normal_vector(Eigen::Index dim) {
    if (dim < 1) throw std::invalid_argument("RngStream::normal_vector: dim must be >= 1");
    Eigen::VectorXd out(dim);
    for (Eigen::Index i = 0; i < dim; ++i) out[i] = normal();
    return out;
  }

 private:
  void reset_state() {
    std::uint64_t s = key_;
    for (auto& word : state_) {
      s = detail::splitmix64(s);
      word = s;
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t key_;
  std::uint64_t state_[4];
};

/// Fixed purpose tags for fork paths, so distinct uses of the run seed can
/// never collide.
namespace rng_tag {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kProposal = 2;
inline constexpr std::uint64_t kResample = 3;
inline constexpr std::uint64_t kPermutation = 4;
inline constexpr std::uint64_t kSynthetic = 5;
inline constexpr std::uint64_t kRedraw = 6;
}  // namespace rng_tag

}  // namespace dasmc

#endif  // DASMC_RNG_HPP
