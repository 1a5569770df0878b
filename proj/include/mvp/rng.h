#ifndef MVP_RNG_H_
#define MVP_RNG_H_

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace mvp {

// SplitMix64 finalizer; used to derive independent sub-seeds.
inline uint64_t MixSeed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t DeriveSeed(uint64_t base, uint64_t a, uint64_t b = 0) {
  return MixSeed(MixSeed(MixSeed(base) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

// Seeded stream with platform-independent distributions (the std::
// distributions are implementation-defined, which would break bitwise
// reproducibility of corpora and runs across toolchains).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(MixSeed(seed)) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1).
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [lo, hi], inclusive, by rejection.
  int64_t UniformInt(int64_t lo, int64_t hi) {
    if (hi < lo) throw std::invalid_argument("UniformInt with hi < lo");
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<int64_t>(engine_());
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return lo + static_cast<int64_t>(r % span);
  }

  double Normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = Uniform();
    } while (u1 <= 0.0);
    const double u2 = Uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }

  bool Bernoulli(double p) { return Uniform() < p; }

  // Independent child stream; does not advance this stream.
  Rng Split(uint64_t tag) const { return Rng(DeriveSeed(seed_hint(), tag)); }

 private:
  uint64_t seed_hint() const {
    std::mt19937_64 copy = engine_;
    return copy();
  }

  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mvp

#endif  // MVP_RNG_H_
