#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcd {

// Error categories, mapped to CLI exit codes (2/3/4) in tools/pcdforge.cpp.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Tensor-op shape violation; message carries the operation name and shapes.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Deterministic RNG. std::mt19937_64 has a standardized sequence; the
// real-valued mappings below are our own so results do not depend on
// implementation-defined distributions.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // [0,1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0,n)
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
        return static_cast<int>(static_cast<unsigned __int128>(gen_()) * static_cast<unsigned>(n) >> 64);
    }

    // Box-Muller, one value per call.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Fisher-Yates with our own bounded draw.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent stream derived from the original seed and a stream tag,
    // regardless of how many draws this generator has made.
    Rng fork(uint64_t stream) const { return Rng(mix(seed_, stream)); }

    uint64_t seed() const { return seed_; }

    static uint64_t mix(uint64_t a, uint64_t b) {
        uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ULL;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebULL;
        x ^= x >> 31;
        return x;
    }

private:
    uint64_t seed_;
    std::mt19937_64 gen_;
};

// FNV-1a, used for checkpoint provenance hashes and seed derivation.
uint64_t fnv1a64(const void* data, size_t n);
uint64_t fnv1a64_file(const std::string& path);
std::string hex64(uint64_t v);

std::string format_double(double v);  // round-trip text (%.17g)

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char delim);
double parse_double(const std::string& s, const std::string& context);
int64_t parse_int(const std::string& s, const std::string& context);

}  // namespace pcd
