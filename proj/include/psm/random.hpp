#ifndef PSM_RANDOM_HPP
#define PSM_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

/**
 * @file random.hpp
 * @brief Seeded random streams with platform-independent draws.
 *
 * `std::mt19937_64` output is fixed by the standard but the standard
 * distributions are not, so the draws used by matching, bootstrapping
 * and generation are implemented here to keep results identical
 * across standard libraries.
 */

namespace psm {

/// SplitMix64 finalizer, used to derive independent substream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(mix_seed(seed)) {}

    /// Stream for replicate/seed `index`; independent of how many draws the parent made.
    static RandomStream substream(std::uint64_t seed, std::uint64_t index) {
        return RandomStream(mix_seed(seed) ^ mix_seed(index + 0x632BE59BD9B4E019ULL));
    }

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound), unbiased by rejection.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = bound == 0 ? 0 : (0 - bound) % bound;
        std::uint64_t r = engine_();
        while (r < limit) {
            r = engine_();
        }
        return r % bound;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    template<typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(order);
        return order;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}

#endif
