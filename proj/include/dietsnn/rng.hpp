#ifndef DIETSNN_RNG_HPP
#define DIETSNN_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dietsnn {

/// Random streams split off the single experiment seed.
enum class Stream : std::uint64_t {
  init = 1,
  dropout = 2,
  poisson = 3,
  shuffle = 4,
  data = 5,
};

/// Deterministic seed for (root, stream, indices...), e.g. one per
/// (epoch, sample) so results do not depend on thread scheduling.
inline std::uint64_t derive_seed(std::uint64_t root, Stream stream,
                                 std::initializer_list<std::uint64_t> indices = {}) {
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  std::uint64_t h = mix(root ^ mix(static_cast<std::uint64_t>(stream)));
  for (std::uint64_t i : indices) h = mix(h ^ mix(i + 0x632be59bd9b4e019ULL));
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dietsnn

#endif  // DIETSNN_RNG_HPP
