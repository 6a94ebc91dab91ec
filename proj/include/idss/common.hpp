#pragma once

#include <cctype>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace idss {

/* Base class for all domain errors thrown by the library.  The CLI maps
 * these to exit code 1; anything else escaping is a bug. */
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/* Deterministic RNG used everywhere randomness is needed.
 *
 * Engine is std::mt19937_64, whose output sequence is fixed by the C++
 * standard, so identical seeds give identical traces on every platform.
 * The standard *distributions* are not portable, so bounded ints and
 * unit doubles are derived here by hand. */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    /* Unbiased integer in [0, bound) via rejection sampling. */
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) throw Error("Rng::below: bound must be positive");
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = eng_();
            if (r >= threshold) return r % bound;
        }
    }

    /* Uniform double in [0, 1) with 53 random mantissa bits. */
    double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    bool chance(double p) { return unit() < p; }

private:
    std::mt19937_64 eng_;
};

/* FNV-1a 64-bit; used for content hashes (doc_hash, plan ids) where a
 * stable non-cryptographic digest is enough. */
inline std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string to_hex(std::uint64_t v);

std::string lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
/* Tokens = maximal alphanumeric runs, case-folded. */
std::vector<std::string> tokenize(std::string_view s);

}  // namespace idss
