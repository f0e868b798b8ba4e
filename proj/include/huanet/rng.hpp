#ifndef HUANET_RNG_HPP
#define HUANET_RNG_HPP

#include "huanet/types.hpp"

#include <cstdint>
#include <random>

namespace huanet
{

/// SplitMix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Portable random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The distributions are implemented here rather than taken from
/// <random> because the standard distributions are implementation-defined:
///   uniform()   = (engine() >> 11) * 2^-53           in [0, 1)
///   normal()    = Box-Muller, sqrt(-2 ln(1-u1)) cos(2 pi u2), one draw per pair
/// so the same seed yields the same stream on every conforming platform.
class Rng
{
public:
    explicit Rng(std::uint64_t seed) : m_engine(seed) {}

    /// Stream keyed by (seed, stream id), e.g. (family seed, instance index).
    static Rng keyed(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64() { return m_engine(); }
    Scalar uniform();
    Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }
    Scalar normal();
    /// N(mean, stddev^2).
    Scalar normal(Scalar mean, Scalar stddev) { return mean + stddev * normal(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    Matrix normal_matrix(Index rows, Index cols);
    Vector uniform_vector(Index n, Scalar lo, Scalar hi);

private:
    std::mt19937_64 m_engine;
};

} // namespace huanet

#endif // HUANET_RNG_HPP
