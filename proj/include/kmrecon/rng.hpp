#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace kmrecon {

// Seedable random stream on top of std::mt19937_64. The engine is fully
// specified by the standard, so identical seeds give identical bit streams on
// every platform; the distribution transforms below are ours for the same
// reason (libstdc++/libc++ distributions are not interchangeable).
//
// Stream splitting: derive(master, idx) seeds a child engine with
// splitmix64(splitmix64(master) ^ (idx * 0x9E3779B97F4A7C15)), so parallel
// consumers (annealing seeds, Monte Carlo runs) never share a stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  static Rng derive(std::uint64_t master, std::uint64_t stream) {
    return Rng(splitmix64(splitmix64(master) ^
                          (stream * 0x9E3779B97F4A7C15ULL)));
  }

  std::uint64_t next() { return engine_(); }

  // [0, 1), 53-bit resolution
  double uniform01() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // (0, 1), never returns an exact endpoint
  double uniform_open01() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Inverse-CDF sampling; strictly positive results.
  double exponential(double rate) {
    return -std::log(uniform_open01()) / rate;
  }

  // Box-Muller; consumes two engine draws per variate, no cached state.
  double normal() {
    double u1 = uniform_open01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  // Fisher-Yates over an index range
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace kmrecon
