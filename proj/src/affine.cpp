#include "huanet/affine.hpp"

#include <cmath>

namespace huanet
{

AffineOperator::AffineOperator(Matrix E) : m_E(std::move(E))
{
    if (m_E.rows() == 0) return;
    const Matrix gram = m_E * m_E.transpose();
    m_gram.compute(gram);
    if (m_gram.info() != Eigen::Success) throw FactorizationError("E E' is not numerically positive definite");
    m_L = m_gram.matrixL();
    const auto diag = m_L.diagonal().cwiseAbs();
    const Scalar ratio = diag.minCoeff() / diag.maxCoeff();
    if (!(ratio * ratio > CorrectionTolerances::gram_pivot_ratio))
        throw FactorizationError("E E' is numerically singular (E not full row rank)");
}

Matrix stacked_constraint_matrix(const ProblemStructure& s)
{
    const Index n_x = s.n_x(), n_eq = s.n_eq(), n_in = s.n_in();
    Matrix E = Matrix::Zero(n_eq + n_in, n_x + n_in);
    E.topLeftCorner(n_eq, n_x) = s.A;
    E.bottomLeftCorner(n_in, n_x) = s.C;
    E.bottomRightCorner(n_in, n_in).setIdentity();
    return E;
}

std::shared_ptr<const AffineOperator> make_affine_operator(const ProblemStructure& s)
{
    return std::make_shared<const AffineOperator>(stacked_constraint_matrix(s));
}

Vector stacked_rhs(const ProblemInstance& instance)
{
    Vector eta(instance.n_eq() + instance.n_in());
    eta << instance.b(), instance.d();
    return eta;
}

AffineSystem assemble_affine(const ProblemInstance& instance)
{
    return {make_affine_operator(instance.structure()), stacked_rhs(instance)};
}

AffineSystem assemble_affine(const ProblemInstance& instance, std::shared_ptr<const AffineOperator> op)
{
    const auto& s = instance.structure();
    // Per-instance fallback when the cached operator belongs to other matrices.
    if (!op || op->rows() != s.n_eq() + s.n_in() || op->cols() != s.n_x() + s.n_in() ||
        op->E() != stacked_constraint_matrix(s))
        return assemble_affine(instance);
    return {std::move(op), stacked_rhs(instance)};
}

Vector project_affine(const AffineSystem& sys, const Vector& y_bar)
{
    return project_affine(*sys.op, y_bar, sys.eta);
}

Vector projection_jacobian_apply(const AffineSystem& sys, const Vector& g)
{
    return projection_jacobian_apply(*sys.op, g);
}

Scalar softplus(Scalar x)
{
    return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

Scalar sigmoid(Scalar x)
{
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (1.0 + e);
}

void require_simplex_structure(const ProblemStructure& s)
{
    if (s.kind != ObjectiveKind::NegEntropy) throw DataError("simplex feasibility stage needs a NegEntropy objective");
    if (s.n_eq() != 1 || !(s.A.array() == 1.0).all())
        throw DataError("simplex feasibility stage needs the single equality 1'x = 1");
}

Matrix simplex_map(const Matrix& x_raw)
{
    constexpr Scalar floor = CorrectionTolerances::simplex_floor;
    const Scalar n = static_cast<Scalar>(x_raw.rows());
    const Matrix a = x_raw.unaryExpr([](Scalar v) { return softplus(v) + floor; });
    const Eigen::RowVectorXd total = a.colwise().sum();
    Matrix x = a;
    for (Index j = 0; j < x.cols(); ++j) x.col(j) = floor + (1.0 - n * floor) * (a.col(j).array() / total(j));
    return x;
}

Matrix simplex_map_vjp(const Matrix& x_raw, const Matrix& g)
{
    constexpr Scalar floor = CorrectionTolerances::simplex_floor;
    const Scalar n = static_cast<Scalar>(x_raw.rows());
    const Scalar scale = 1.0 - n * floor;
    const Matrix a = x_raw.unaryExpr([](Scalar v) { return softplus(v) + floor; });
    Matrix out(x_raw.rows(), x_raw.cols());
    for (Index j = 0; j < x_raw.cols(); ++j) {
        const Scalar total = a.col(j).sum();
        // d(a_i / S)/d a_k = (delta_ik - a_i / S) / S
        const Scalar mean_g = g.col(j).dot(a.col(j)) / total;
        const Vector g_a = scale * (g.col(j).array() - mean_g) / total;
        out.col(j) = g_a.array() * x_raw.col(j).unaryExpr([](Scalar v) { return sigmoid(v); }).array();
    }
    return out;
}

SimplexStageResult feasibility_stage_simplex(const Vector& x_raw, const ProblemInstance& instance)
{
    require_simplex_structure(instance.structure());
    require_dims(x_raw.size() == instance.n_x(), "feasibility_stage_simplex: len(x_raw) != n_x");
    SimplexStageResult r;
    r.x_hat = simplex_map(x_raw);
    r.s_hat = instance.d() - instance.C() * r.x_hat;
    return r;
}

} // namespace huanet
