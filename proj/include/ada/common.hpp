#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ada {

using Vector = std::vector<double>;
using ClassId = int;
using RegionId = std::int64_t;
using SampleId = std::int64_t;

enum class Domain { Source, Target };

inline const char* to_string(Domain d) { return d == Domain::Source ? "source" : "target"; }

// Lower bound applied to every log-density so that log-ratios stay finite.
inline constexpr double LOG_FLOOR = -1e6;

class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class NotEstimable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Index of the largest entry, ties to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

// Throws InvalidInput unless p is a nonempty, nonnegative vector summing to 1 within tol.
void check_probability_vector(std::span<const double> p, double tol = 1e-9);

// SplitMix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace ada
