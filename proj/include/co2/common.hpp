#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace co2 {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Thrown for caller mistakes (bad flags, invalid configuration); the CLI maps
// it to exit code 2. Everything else runtime_error-ish maps to exit code 1.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// Counter-based seed fan-out (splitmix64 finalizer). Subsystems draw their
// stream id from a fixed table so sketch, tau simulation and per-trial
// baselines stay independently reproducible under one master seed.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace stream {
constexpr std::uint64_t sketch = 0;
constexpr std::uint64_t tau = 1;
constexpr std::uint64_t baseline = 2;
constexpr std::uint64_t trial_base = 16;
}  // namespace stream

}  // namespace co2
