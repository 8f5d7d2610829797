#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace drdg {

// Error hierarchy; the CLI maps these onto exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct ShapeError : DataError {
    using DataError::DataError;
};
struct DivergenceError : Error {
    using Error::Error;
};

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t hash_str(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a64(s.data(), s.size(), h);
}

// Deterministic counter-free RNG. Streams are derived from (seed, tag, indices),
// so any consumer can be re-created exactly from the checkpointed seed alone.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed ^ 0x6a09e667f3bcc908ULL) {
        // warm up so near-zero seeds diverge immediately
        splitmix64(state_);
        splitmix64(state_);
    }

    uint64_t next_u64() { return splitmix64(state_); }

    double uniform() {  // [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; implementation-defined std distributions are avoided on purpose
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    int uniform_int(int lo, int hi) {  // inclusive
        return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = next_u64() % i;
            std::swap(v[i - 1], v[j]);
        }
    }

    uint64_t state() const { return state_; }
    void set_state(uint64_t s) { state_ = s; }

  private:
    uint64_t state_;
};

// Derive an independent stream for (seed, tag, a, b).
inline Rng derive_rng(uint64_t seed, const std::string& tag, uint64_t a = 0, uint64_t b = 0) {
    uint64_t h = hash_str(tag);
    uint64_t s = seed;
    s ^= splitmix64(h);
    uint64_t t = a + 0x9e3779b97f4a7c15ULL;
    s ^= splitmix64(t);
    t = b + 0xc2b2ae3d27d4eb4fULL;
    s ^= splitmix64(t);
    return Rng(s);
}

inline uint64_t checksum_doubles(const std::vector<double>& v) {
    return fnv1a64(v.data(), v.size() * sizeof(double));
}

}  // namespace drdg
