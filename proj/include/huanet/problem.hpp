#ifndef HUANET_PROBLEM_HPP
#define HUANET_PROBLEM_HPP

#include "huanet/types.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace huanet
{

/// Objective family of a parametric problem.
///   Quadratic:  f(x) = 1/2 x'Qx + p'x   (Q shared, p per instance)
///   NegEntropy: f(x) = sum_i x_i log x_i on x > 0
enum class ObjectiveKind
{
    Quadratic,
    NegEntropy,
};

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind objective_kind_from_string(std::string_view s);

/// Data shared by every instance of a family: the objective kind, the
/// quadratic term and the constraint matrices. Immutable once created.
struct ProblemStructure
{
    ObjectiveKind kind = ObjectiveKind::Quadratic;
    Matrix Q; // n_x x n_x, empty for NegEntropy
    Matrix A; // n_eq x n_x
    Matrix C; // n_in x n_x

    Index n_x() const { return A.cols(); }
    Index n_eq() const { return A.rows(); }
    Index n_in() const { return C.rows(); }

    /// Validates dimensions, symmetry/PSD of Q and full row rank of A.
    static std::shared_ptr<const ProblemStructure> create(ObjectiveKind kind, Matrix Q, Matrix A, Matrix C);
};

/// One parametric instance:
///   minimize f(x)  s.t.  A x = b,  C x <= d
/// with per-instance p (quadratic linear term), b, d and the raw parameter
/// vector lambda consumed by the networks.
class ProblemInstance
{
public:
    ProblemInstance(std::shared_ptr<const ProblemStructure> structure, Vector p, Vector b, Vector d, Vector lambda);

    const ProblemStructure& structure() const { return *m_structure; }
    const std::shared_ptr<const ProblemStructure>& structure_ptr() const { return m_structure; }

    ObjectiveKind kind() const { return m_structure->kind; }
    const Matrix& Q() const { return m_structure->Q; }
    const Matrix& A() const { return m_structure->A; }
    const Matrix& C() const { return m_structure->C; }
    const Vector& p() const { return m_p; }
    const Vector& b() const { return m_b; }
    const Vector& d() const { return m_d; }
    const Vector& lambda() const { return m_lambda; }

    Index n_x() const { return m_structure->n_x(); }
    Index n_eq() const { return m_structure->n_eq(); }
    Index n_in() const { return m_structure->n_in(); }
    Index n_lambda() const { return m_lambda.size(); }

private:
    std::shared_ptr<const ProblemStructure> m_structure;
    Vector m_p;
    Vector m_b;
    Vector m_d;
    Vector m_lambda;
};

struct ObjectiveEval
{
    Scalar value = 0;
    Vector gradient;
    Matrix hessian;
};

/// Value, gradient and Hessian of f at x.
/// Throws DomainError for NegEntropy outside x > 0, DimensionError on size mismatch.
ObjectiveEval objective_eval(const ProblemInstance& instance, const Vector& x);

Scalar objective_value(const ProblemInstance& instance, const Vector& x);
Vector objective_gradient(const ProblemInstance& instance, const Vector& x);

// Column-batched evaluation over S instances sharing one structure. `linear`
// holds the per-instance p as columns (ignored for NegEntropy).
Eigen::RowVectorXd objective_values(const ProblemStructure& s, const Matrix& X, const Matrix& linear);
Matrix objective_gradients(const ProblemStructure& s, const Matrix& X, const Matrix& linear);
/// Column-wise Hessian-vector products H(x_j) g_j.
Matrix hessian_apply(const ProblemStructure& s, const Matrix& X, const Matrix& G);

/// Numerical rank test with tolerance 1e-10 * max(rows, cols) * ||M||_2.
bool check_full_row_rank(const Matrix& M);
Index numerical_rank(const Matrix& M);

} // namespace huanet

#endif // HUANET_PROBLEM_HPP
