#ifndef ELIS_RNG_H_
#define ELIS_RNG_H_

#include <cstdint>
#include <string_view>

namespace elis {

// Mixes two 64-bit words into one well-scrambled word.
std::uint64_t Mix(std::uint64_t a, std::uint64_t b);

// FNV-1a, for deriving seeds from names.
std::uint64_t HashName(std::string_view name);

// SplitMix64 keyed by (seed, stream). Every stream is independent, so a draw
// addressed by (seed, index) does not depend on how many other draws were
// consumed before it.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()();

  // Uniform on the open interval (0, 1).
  double Uniform();
  // Standard normal (Marsaglia polar method).
  double Normal();
  // Signed Laplace draw with the given scale (its mean absolute value).
  double Laplace(double scale);

 private:
  std::uint64_t state_;
};

// Gamma(shape, scale) by Marsaglia-Tsang; shapes below one use the
// G(a) = G(a + 1) * U^(1/a) boost.
double SampleGamma(CounterRng& rng, double shape, double scale);

}  // namespace elis

#endif  // ELIS_RNG_H_
