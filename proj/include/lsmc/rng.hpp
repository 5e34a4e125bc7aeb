#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace lsmc {

namespace detail {
// splitmix64 finalizer; used to spread seeds and derive substreams
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

// Seeded generator with deterministic substream derivation: derive(i) depends only
// on the base seed and i, never on how much the parent has consumed. All draws go
// through explicit methods so the byte-for-byte output contract survives compiler
// and libstdc++ changes (std::normal_distribution is implementation-defined).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : base_seed_(seed), engine_(detail::mix64(seed)) {}

    Rng derive(std::uint64_t stream) const {
        return Rng(detail::mix64(base_seed_ ^ detail::mix64(stream + 0x51ed2701a9b4d52bULL)));
    }

    // uniform on [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n); n == 1 consumes nothing, so degenerate choices
    // leave the stream untouched
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
        if (n == 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    int index(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller with cached spare; deterministic given the seed
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t base_seed() const { return base_seed_; }

  private:
    std::uint64_t base_seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace lsmc
