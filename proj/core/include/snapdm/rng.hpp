#pragma once

// Seed streams: master seed -> per-setting / per-replicate generators.
//
// Every consumer derives its generator from the master seed plus a small
// tuple of stream identifiers, so generation and bootstrap never share a
// stream and results do not depend on scheduling order.

#include <cstdint>
#include <initializer_list>
#include <cmath>
#include <random>

namespace snapdm {

// Stream tags. Keep values stable; they are part of the reproducibility
// contract of generated datasets.
enum class Stream : std::uint64_t {
  Tfim = 0x7466696d,
  Ising = 0x6973696e,
  Toy = 0x746f7900,
  Bootstrap = 0x626f6f74,
  KMeans = 0x6b6d6e73,
  Lanczos = 0x6c616e63,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                    std::initializer_list<std::uint64_t> ids = {}) noexcept {
  std::uint64_t h = splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(stream)));
  for (auto id : ids) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

// mt19937_64 with portable uniform helpers (std distributions are
// implementation-defined, which would break byte-identical output across
// standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer on [0, n), rejection sampled.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace snapdm
