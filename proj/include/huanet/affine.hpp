#ifndef HUANET_AFFINE_HPP
#define HUANET_AFFINE_HPP

#include "huanet/problem.hpp"

#include <Eigen/Cholesky>

#include <memory>

namespace huanet
{

/// Tolerances used by the correction stages.
struct CorrectionTolerances
{
    /// Feasibility target ||E y - eta||_inf <= feasibility * (1 + ||eta||_inf).
    static constexpr Scalar feasibility = 1e-10;
    /// Positivity floor of the simplex feasibility stage.
    static constexpr Scalar simplex_floor = 1e-6;
    /// Smallest admissible pivot ratio min(L_ii)^2 / max(L_ii)^2 of the Gram factor.
    static constexpr Scalar gram_pivot_ratio = 1e-14;
};

/// The parameter-independent part of the stacked equality system
///   E = [A 0; C I],  E [x; s] = [b; d],
/// with a Cholesky factorization of E E' computed once.
class AffineOperator
{
public:
    explicit AffineOperator(Matrix E);

    const Matrix& E() const { return m_E; }
    const Eigen::LLT<Matrix>& gram() const { return m_gram; }
    const Matrix& factor() const { return m_L; }
    Index rows() const { return m_E.rows(); }
    Index cols() const { return m_E.cols(); }

private:
    Matrix m_E;
    Eigen::LLT<Matrix> m_gram;
    Matrix m_L;
};

/// E = [A 0; C I] for a structure; E = A when there are no inequalities.
Matrix stacked_constraint_matrix(const ProblemStructure& s);
std::shared_ptr<const AffineOperator> make_affine_operator(const ProblemStructure& s);

/// E y = eta for one instance. The operator may be shared across instances of
/// one family.
struct AffineSystem
{
    std::shared_ptr<const AffineOperator> op;
    Vector eta;

    const Matrix& E() const { return op->E(); }
};

AffineSystem assemble_affine(const ProblemInstance& instance);
/// Reuses `op` when it was built for this instance's structure.
AffineSystem assemble_affine(const ProblemInstance& instance, std::shared_ptr<const AffineOperator> op);

Vector stacked_rhs(const ProblemInstance& instance);

/// Closed-form Euclidean projection onto {y : E y = eta}, column by column:
///   y_hat = y_bar - E' (E E')^{-1} (E y_bar - eta).
template<typename DerivedY, typename DerivedEta>
Matrix project_affine(const AffineOperator& op, const Eigen::MatrixBase<DerivedY>& y_bar,
                      const Eigen::MatrixBase<DerivedEta>& eta)
{
    require_dims(y_bar.rows() == op.cols(), "project_affine: len(y_bar) != cols(E)");
    require_dims(eta.rows() == op.rows() && eta.cols() == y_bar.cols(), "project_affine: eta shape");
    if (op.rows() == 0) return y_bar;
    const Matrix nu = op.gram().solve(op.E() * y_bar - eta);
    return y_bar - op.E().transpose() * nu;
}

Vector project_affine(const AffineSystem& sys, const Vector& y_bar);

/// (I - E'(EE')^{-1}E) g without forming the projector. Symmetric, so it is
/// also its own vector-Jacobian product.
template<typename Derived>
Matrix projection_jacobian_apply(const AffineOperator& op, const Eigen::MatrixBase<Derived>& g)
{
    require_dims(g.rows() == op.cols(), "projection_jacobian_apply: len(g) != cols(E)");
    if (op.rows() == 0) return g;
    return g - op.E().transpose() * op.gram().solve(op.E() * g);
}

Vector projection_jacobian_apply(const AffineSystem& sys, const Vector& g);

/// Elementwise max(0, u); negative zero is mapped to +0.
template<typename Derived>
MatrixX<typename Derived::Scalar> project_nonneg(const Eigen::MatrixBase<Derived>& u)
{
    using T = typename Derived::Scalar;
    return (u.derived().array().max(T(0)) + T(0)).matrix();
}

/// Feasibility stage for NegEntropy objectives with the single equality 1'x = 1:
///   a_i   = softplus(x_raw_i) + floor
///   x_hat = floor + (1 - n floor) a / sum(a)
///   s_hat = d - C x_hat
/// so 1'x_hat = 1, x_hat >= floor, and C x_hat + s_hat = d.
struct SimplexStageResult
{
    Vector x_hat;
    Vector s_hat;
};

SimplexStageResult feasibility_stage_simplex(const Vector& x_raw, const ProblemInstance& instance);

/// Column-batched simplex map x_hat = S(x_raw) (the s_hat part is d - C x_hat).
Matrix simplex_map(const Matrix& x_raw);
/// Vector-Jacobian product of simplex_map at x_raw: returns J' g.
Matrix simplex_map_vjp(const Matrix& x_raw, const Matrix& g);

/// Throws DataError unless the instance has exactly the 1'x = 1 equality and a NegEntropy objective.
void require_simplex_structure(const ProblemStructure& s);

Scalar softplus(Scalar x);
Scalar sigmoid(Scalar x);

} // namespace huanet

#endif // HUANET_AFFINE_HPP
