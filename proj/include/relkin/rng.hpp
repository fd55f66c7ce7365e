#pragma once

// Counter-keyed random number generation. Each replica owns an independent
// stream derived from (seed, replica), so ensembles are reproducible and
// independent of scheduling order. Stream algorithm: splitmix64 over a
// double-mixed initial state; normal variates by Box-Muller. The algorithm
// identifier is recorded in run manifests.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace relkin {

inline constexpr const char* kRngAlgorithm = "splitmix64/box-muller";

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class ReplicaRng {
  public:
    ReplicaRng(std::uint64_t seed, std::uint64_t replica) {
        state_ = mix64(seed + 0x9E3779B97F4A7C15ULL * (replica + 1));
        state_ = mix64(state_ ^ 0xD1B54A32D192ED03ULL);
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

    /// Uniform on (0, 1].
    double next_uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal variate.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    std::uint64_t state_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace relkin
