#ifndef HUANET_GENERATORS_HPP
#define HUANET_GENERATORS_HPP

#include "huanet/problem.hpp"
#include "huanet/rng.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace huanet
{

enum class FamilyKind
{
    Lasso,
    RandomQp,
    Entropy,
};

std::string_view to_string(FamilyKind kind);
FamilyKind family_kind_from_string(std::string_view s);

/// Nominal sizes as reported in result tables (LASSO decision size before the
/// [x; t] reformulation).
struct FamilyDims
{
    Index n_x = 0;
    Index n_eq = 0;
    Index n_in = 0;
};

/// Fixed data of one experiment family. Instances differ only in the
/// right-hand sides and linear objective terms, never in the matrices.
class ProblemFamily
{
public:
    FamilyKind kind() const { return m_kind; }
    FamilyDims dims() const { return m_dims; }
    std::uint64_t seed() const { return m_seed; }
    Index n_lambda() const { return m_n_lambda; }
    const std::shared_ptr<const ProblemStructure>& structure() const { return m_structure; }

    /// Draws one instance from `rng`.
    ProblemInstance sample(Rng& rng) const;

    // Generator internals, exposed for tests.
    const Matrix& qp_inverse() const { return m_q_inverse; }
    const Matrix& lasso_features() const { return m_features; }
    const Vector& lasso_observation() const { return m_observation; }
    const Vector& lasso_sparse_truth() const { return m_truth; }
    Scalar lasso_alpha() const { return m_alpha; }
    const Matrix& raw_A() const { return m_raw_A; }
    const Matrix& raw_C() const { return m_raw_C; }
    const Vector& raw_d() const { return m_raw_d; }

    friend ProblemFamily gen_random_qp(Index, Index, Index, std::uint64_t);
    friend ProblemFamily gen_lasso(Index, Index, Index, std::uint64_t);
    friend ProblemFamily gen_entropy(Index, Index, std::uint64_t);

private:
    FamilyKind m_kind = FamilyKind::RandomQp;
    FamilyDims m_dims;
    std::uint64_t m_seed = 0;
    Index m_n_lambda = 0;
    std::shared_ptr<const ProblemStructure> m_structure;

    Matrix m_raw_A;
    Matrix m_raw_C;
    Vector m_raw_d;
    Matrix m_q_inverse;
    Matrix m_features;
    Vector m_observation;
    Vector m_truth;
    Scalar m_alpha = 0;
};

/// QP family: Q = F'F + I, A and C Gaussian, p = 1 + lambda with lambda ~ U(-1,1)^n_x,
/// b = -A Q^-1 p + eps_b, d = -C Q^-1 p + eps_d, eps ~ U(0, 0.1).
ProblemFamily gen_random_qp(Index n_x, Index n_eq, Index n_in, std::uint64_t seed);

/// LASSO  min ||Fx - p||^2 + alpha ||x||_1  s.t. Ax = lambda, Cx <= d, stored in its
/// QP reformulation over y = [x; t]: f(y) = y'Py + q'y with P = [F'F 0; 0 0],
/// q = [-2F'p; alpha 1], equality [A 0], inequalities [C 0; I -I; -I -I] y <= [d; 0; 0].
ProblemFamily gen_lasso(Index n_x, Index n_eq, Index n_in, std::uint64_t seed);

/// Entropy maximization  min sum x log x  s.t. 1'x = 1, A x <= lambda,
/// lambda = A u + eps, u ~ U(0,1)^n_x, eps ~ N(0, 0.1).
ProblemFamily gen_entropy(Index n_x, Index n_in, std::uint64_t seed);

ProblemFamily make_family(FamilyKind kind, FamilyDims dims, std::uint64_t seed);

struct SplitCounts
{
    Index train = 0;
    Index val = 0;
    Index test = 0;
    Index total() const { return train + val + test; }
};

struct Dataset
{
    FamilyKind family = FamilyKind::RandomQp;
    FamilyDims dims;
    std::uint64_t family_seed = 0;
    std::uint64_t seed = 0;
    SplitCounts counts;
    std::vector<ProblemInstance> instances;

    std::span<const ProblemInstance> train() const;
    std::span<const ProblemInstance> val() const;
    std::span<const ProblemInstance> test() const;
};

/// Instance i is drawn from Rng::keyed(mix(family seed) ^ seed, i); the
/// first counts.train are the training split, then validation, then test.
Dataset sample_dataset(const ProblemFamily& family, SplitCounts counts, std::uint64_t seed);

} // namespace huanet

#endif // HUANET_GENERATORS_HPP
