#ifndef REMP_RNG_HPP
#define REMP_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace remp {

// Deterministic random source: std::mt19937_64 with hand-rolled output
// conversions, so that a seed produces bit-identical streams on every
// platform (the std distribution objects are not portable).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; one spare value cached.
    double normal();

    // Uniform index in [0, n) by 128-bit multiply-shift.
    std::size_t uniform_index(std::size_t n);

    // Independent generator for a named substream of this seed.
    Rng split(std::uint64_t stream) const;

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// SplitMix64 finalizer; used to derive substream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace remp

#endif
