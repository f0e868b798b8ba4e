#ifndef HUANET_ADMM_HPP
#define HUANET_ADMM_HPP

#include "huanet/problem.hpp"

#include <Eigen/LU>

#include <optional>
#include <vector>

namespace huanet
{

struct EqualityQpSolution
{
    Vector y;
    Vector mult;
};

/// Factorization of the KKT matrix [H E'; E 0], reusable across right-hand sides.
class EqualityQpSolver
{
public:
    EqualityQpSolver(const Matrix& H, const Matrix& E);

    /// min 1/2 y'Hy + c'y  s.t.  E y = eta.
    EqualityQpSolution solve(const Vector& c, const Vector& eta) const;

private:
    Matrix m_kkt;
    Eigen::PartialPivLU<Matrix> m_lu;
    Index m_n = 0;
    Index m_m = 0;
};

/// One-shot form of EqualityQpSolver. Throws SingularKktError when the KKT
/// matrix is numerically singular.
EqualityQpSolution solve_equality_qp(const Matrix& H, const Vector& c, const Matrix& E, const Vector& eta);

/// Auxiliary/dual pair of the splitting s = w.
struct AdmmState
{
    Vector w;
    Vector v;

    static AdmmState zeros(Index n_in) { return {Vector::Zero(n_in), Vector::Zero(n_in)}; }
    /// q = w - v / rho, the input of the primal update.
    Vector q(Scalar rho) const { return w - v / rho; }
};

/// Exact minimizer of f(x) + rho/2 ||s - q||^2 s.t. Ax = b, Cx + s = d,
/// with multipliers z (for Ax = b) and beta (for Cx + s = d).
struct PrimalUpdateResult
{
    Vector x;
    Vector s;
    Vector z;
    Vector beta;
    int newton_iterations = 0;
};

/// Primal-update solver bound to one instance and rho. Quadratic objectives
/// factor the stacked KKT system once; NegEntropy runs an infeasible-start
/// damped Newton method on the stacked variable [x; s].
class PrimalUpdateSolver
{
public:
    static constexpr int max_newton = 50;
    static constexpr Scalar newton_tol = 1e-10;

    PrimalUpdateSolver(const ProblemInstance& instance, Scalar rho);

    PrimalUpdateResult solve(const Vector& q, const PrimalUpdateResult* warm = nullptr) const;

    const ProblemInstance& instance() const { return m_instance; }
    Scalar rho() const { return m_rho; }

private:
    PrimalUpdateResult solve_quadratic(const Vector& q) const;
    PrimalUpdateResult solve_entropy(const Vector& q, const PrimalUpdateResult* warm) const;

    ProblemInstance m_instance;
    Scalar m_rho;
    Matrix m_E;
    Vector m_eta;
    std::optional<EqualityQpSolver> m_qp;
};

PrimalUpdateResult primal_update(const ProblemInstance& instance, const Vector& q, Scalar rho);

/// Stationarity residual of the primal update with beta eliminated:
///   grad f(x) + A'z + rho C'(q - s).
Vector primal_update_residual(const ProblemInstance& instance, const PrimalUpdateResult& r, const Vector& q, Scalar rho);

struct AdmmOptions
{
    Scalar rho = 1.0;
    Scalar tol = 1e-6;
    int max_iter = 100;
    bool record_history = false;
};

struct AdmmSolveReport
{
    Vector x_star;
    Vector s_star;
    Vector z;
    Vector beta;
    AdmmState state;
    Scalar objective = 0;
    int iterations = 0;
    Scalar primal_residual = 0; // ||s - w||_2
    Scalar dual_residual = 0;   // rho ||w_new - w_old||_2
    double wall_time = 0;
    bool converged = false;
    /// max(primal, dual) residual per iteration when record_history is set.
    std::vector<Scalar> history;
};

/// Classical ADMM on the slack reformulation:
///   (x, s) = primal_update(w - v/rho),  w = max(0, s + v/rho),  v += rho (s - w).
/// Stops when ||s - w|| and rho ||w - w_prev|| are both below
/// tol * sqrt(n_in) * (1 + scale), with scale = max(||s||, ||w||) for the
/// primal and ||v|| for the dual residual.
AdmmSolveReport admm_solve(const ProblemInstance& instance, const AdmmOptions& options);
AdmmSolveReport admm_solve(const ProblemInstance& instance, Scalar rho, Scalar tol, int max_iter);

struct KktCertificate
{
    Scalar stationarity = 0;      // ||grad f + A'z + C'mu||_inf
    Scalar primal_feasibility = 0; // max(||Ax - b||_inf, ||max(0, Cx - d)||_inf)
    Scalar dual_feasibility = 0;   // ||max(0, -mu)||_inf
    Scalar complementarity = 0;    // max_i |mu_i (d - Cx)_i|

    Scalar worst() const;
};

KktCertificate kkt_certificate(const ProblemInstance& instance, const Vector& x, const Vector& z, const Vector& mu);

struct ReferenceSolution
{
    Scalar f_star = 0;
    Vector x_star;
    Vector s_star;
    KktCertificate certificate;
    int iterations = 0;
    Scalar rho = 1;
};

/// Tight-tolerance ADMM (max 10,000 iterations) certified by a KKT check
/// (each residual < 1e-6). Tries rho = 1, 10, 0.1, 100 in turn and throws
/// InfeasibleOrUnconvergedError when none certifies.
ReferenceSolution reference_optimum(const ProblemInstance& instance, Scalar tol = 1e-9);

inline constexpr Scalar certificate_tolerance = 1e-6;

} // namespace huanet

#endif // HUANET_ADMM_HPP
