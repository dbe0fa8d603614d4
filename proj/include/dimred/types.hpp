#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace dimred {

using Matrix = Eigen::MatrixXd;  // rows are observations, columns are variables
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Every randomized decision in the library draws from this generator so runs
/// are reproducible from a single seed.
using Rng = std::mt19937_64;

/// Deterministic child seed for stream `stream` derived from `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Dependence score undefined because the output sample carries no variation.
class DegenerateY : public std::runtime_error {
public:
    DegenerateY() : std::runtime_error("output sample is degenerate (constant)") {}
};

}  // namespace dimred

namespace dimred {

/// Selects the OpenMP kernel or the serial reference it is tested against.
enum class Exec { Serial, Parallel };

}  // namespace dimred
