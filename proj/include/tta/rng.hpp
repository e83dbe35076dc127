#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace tta {

// Deterministic RNG used everywhere. Wraps mt19937_64 but derives floats and
// ints by hand so results do not depend on libstdc++ distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() { return state_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n >= 1.
    std::uint64_t below(std::uint64_t n) {
        // Rejection sampling keeps the draw unbiased.
        const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    int range_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586;
        spare_ = mag * std::sin(two_pi * u2);
        have_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

    std::string serialize() const {
        std::ostringstream os;
        os << state_ << ' ' << (have_spare_ ? 1 : 0) << ' ' << spare_hex();
        return os.str();
    }

    void deserialize(const std::string& text) {
        std::istringstream is(text);
        is >> state_;
        int spare_flag = 0;
        std::uint64_t bits = 0;
        is >> spare_flag >> std::hex >> bits;
        have_spare_ = spare_flag != 0;
        double d;
        static_assert(sizeof(d) == sizeof(bits));
        __builtin_memcpy(&d, &bits, sizeof(d));
        spare_ = d;
    }

private:
    std::string spare_hex() const {
        std::uint64_t bits;
        __builtin_memcpy(&bits, &spare_, sizeof(bits));
        std::ostringstream os;
        os << std::hex << bits;
        return os.str();
    }

    std::mt19937_64 state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Stateless mixing for per-step / per-item seeds (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace tta
