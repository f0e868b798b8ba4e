#include "huanet/problem.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace huanet
{

std::string_view to_string(ObjectiveKind kind)
{
    switch (kind) {
    case ObjectiveKind::Quadratic: return "quadratic";
    case ObjectiveKind::NegEntropy: return "negentropy";
    }
    return "unknown";
}

ObjectiveKind objective_kind_from_string(std::string_view s)
{
    if (s == "quadratic") return ObjectiveKind::Quadratic;
    if (s == "negentropy") return ObjectiveKind::NegEntropy;
    throw FormatError("unknown objective kind '" + std::string(s) + "'");
}

std::shared_ptr<const ProblemStructure> ProblemStructure::create(ObjectiveKind kind, Matrix Q, Matrix A, Matrix C)
{
    require_dims(A.cols() == C.cols() || C.size() == 0, "A and C must have the same number of columns");
    const Index n = A.cols() > 0 ? A.cols() : C.cols();
    if (A.size() == 0) A.resize(0, n);
    if (C.size() == 0) C.resize(0, n);

    if (kind == ObjectiveKind::Quadratic) {
        require_dims(Q.rows() == n && Q.cols() == n, "Q must be n_x x n_x");
        const Scalar qnorm = Q.norm();
        if ((Q - Q.transpose()).norm() > 1e-12 * (1.0 + qnorm))
            throw DataError("Q is not symmetric");
        if (n > 0) {
            Eigen::SelfAdjointEigenSolver<Matrix> eig(Q, Eigen::EigenvaluesOnly);
            if (eig.eigenvalues().minCoeff() < -1e-8 * qnorm)
                throw DataError("Q is not positive semidefinite");
        }
    } else {
        Q.resize(0, 0);
    }
    if (A.rows() > 0 && !check_full_row_rank(A))
        throw RankError("equality matrix A is row-rank deficient");

    auto s = std::make_shared<ProblemStructure>();
    s->kind = kind;
    s->Q = std::move(Q);
    s->A = std::move(A);
    s->C = std::move(C);
    return s;
}

ProblemInstance::ProblemInstance(std::shared_ptr<const ProblemStructure> structure, Vector p, Vector b, Vector d,
                                 Vector lambda)
    : m_structure(std::move(structure)), m_p(std::move(p)), m_b(std::move(b)), m_d(std::move(d)),
      m_lambda(std::move(lambda))
{
    if (!m_structure) throw DataError("instance without structure");
    require_dims(m_b.size() == n_eq(), "len(b) != rows(A)");
    require_dims(m_d.size() == n_in(), "len(d) != rows(C)");
    if (kind() == ObjectiveKind::Quadratic)
        require_dims(m_p.size() == n_x(), "len(p) != n_x");
    else if (m_p.size() != 0)
        throw DimensionError("NegEntropy instances carry no linear term");
}

namespace
{

void check_domain(const ProblemStructure& s, const Matrix& X)
{
    if (s.kind == ObjectiveKind::NegEntropy && X.size() > 0 && !(X.array() > 0).all())
        throw DomainError("negative entropy evaluated outside x > 0");
}

} // namespace

ObjectiveEval objective_eval(const ProblemInstance& instance, const Vector& x)
{
    require_dims(x.size() == instance.n_x(), "objective_eval: len(x) != n_x");
    const auto& s = instance.structure();
    check_domain(s, x);
    ObjectiveEval e;
    if (s.kind == ObjectiveKind::Quadratic) {
        e.gradient = s.Q * x + instance.p();
        e.value = 0.5 * x.dot(s.Q * x) + instance.p().dot(x);
        e.hessian = s.Q;
    } else {
        const auto logx = x.array().log();
        e.value = (x.array() * logx).sum();
        e.gradient = (logx + 1.0).matrix();
        e.hessian = x.cwiseInverse().asDiagonal();
    }
    return e;
}

Scalar objective_value(const ProblemInstance& instance, const Vector& x)
{
    require_dims(x.size() == instance.n_x(), "objective_value: len(x) != n_x");
    Matrix lin = instance.p();
    return objective_values(instance.structure(), x, lin)(0);
}

Vector objective_gradient(const ProblemInstance& instance, const Vector& x)
{
    require_dims(x.size() == instance.n_x(), "objective_gradient: len(x) != n_x");
    Matrix lin = instance.p();
    return objective_gradients(instance.structure(), x, lin);
}

Eigen::RowVectorXd objective_values(const ProblemStructure& s, const Matrix& X, const Matrix& linear)
{
    check_domain(s, X);
    if (s.kind == ObjectiveKind::Quadratic)
        return 0.5 * (X.array() * (s.Q * X).array()).colwise().sum() + (linear.array() * X.array()).colwise().sum();
    return (X.array() * X.array().log()).colwise().sum();
}

Matrix objective_gradients(const ProblemStructure& s, const Matrix& X, const Matrix& linear)
{
    check_domain(s, X);
    if (s.kind == ObjectiveKind::Quadratic) return s.Q * X + linear;
    return (X.array().log() + 1.0).matrix();
}

Matrix hessian_apply(const ProblemStructure& s, const Matrix& X, const Matrix& G)
{
    if (s.kind == ObjectiveKind::Quadratic) return s.Q * G;
    return (G.array() / X.array()).matrix();
}

Index numerical_rank(const Matrix& M)
{
    if (M.size() == 0) return 0;
    // ||M||_2 from the largest eigenvalue of the smaller Gram matrix.
    const Matrix gram = M.rows() <= M.cols() ? Matrix(M * M.transpose()) : Matrix(M.transpose() * M);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    const Scalar norm2 = std::sqrt(std::max<Scalar>(0, eig.eigenvalues().maxCoeff()));
    const Scalar tol = 1e-10 * static_cast<Scalar>(std::max(M.rows(), M.cols())) * norm2;
    if (norm2 == 0) return 0;

    Eigen::ColPivHouseholderQR<Matrix> qr(M);
    const auto diag = qr.matrixQR().diagonal();
    Index rank = 0;
    for (Index i = 0; i < diag.size(); ++i)
        if (std::abs(diag(i)) > tol) ++rank;
    return rank;
}

bool check_full_row_rank(const Matrix& M)
{
    return numerical_rank(M) == M.rows();
}

} // namespace huanet
