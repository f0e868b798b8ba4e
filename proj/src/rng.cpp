#include "huanet/rng.hpp"

#include <cmath>
#include <numbers>

namespace huanet
{

std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng Rng::keyed(std::uint64_t seed, std::uint64_t stream)
{
    return Rng(mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL)));
}

Scalar Rng::uniform()
{
    return static_cast<Scalar>(m_engine() >> 11) * 0x1.0p-53;
}

Scalar Rng::normal()
{
    const Scalar u1 = 1.0 - uniform(); // (0, 1]
    const Scalar u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n)
{
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = m_engine();
    } while (x >= limit);
    return x % n;
}

Matrix Rng::normal_matrix(Index rows, Index cols)
{
    Matrix m(rows, cols);
    // Row-major fill order so the layout of the draws matches the file format.
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            m(i, j) = normal();
    return m;
}

Vector Rng::uniform_vector(Index n, Scalar lo, Scalar hi)
{
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
    return v;
}

} // namespace huanet
