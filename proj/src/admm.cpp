#include "huanet/admm.hpp"

#include "huanet/affine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace huanet
{

EqualityQpSolver::EqualityQpSolver(const Matrix& H, const Matrix& E) : m_n(H.rows()), m_m(E.rows())
{
    require_dims(H.cols() == m_n, "solve_equality_qp: H must be square");
    require_dims(E.cols() == m_n || m_m == 0, "solve_equality_qp: cols(E) != rows(H)");
    m_kkt = Matrix::Zero(m_n + m_m, m_n + m_m);
    m_kkt.topLeftCorner(m_n, m_n) = H;
    if (m_m > 0) {
        m_kkt.topRightCorner(m_n, m_m) = E.transpose();
        m_kkt.bottomLeftCorner(m_m, m_n) = E;
    }
    m_lu.compute(m_kkt);
    if (m_n + m_m > 0) {
        // rcond() alone misses exactly zero pivots, so check the pivot ratio too.
        const auto piv = m_lu.matrixLU().diagonal().cwiseAbs();
        if (!(piv.minCoeff() > 1e-14 * piv.maxCoeff()) || !(m_lu.rcond() > 1e-14))
            throw SingularKktError("KKT matrix is numerically singular");
    }
}

EqualityQpSolution EqualityQpSolver::solve(const Vector& c, const Vector& eta) const
{
    require_dims(c.size() == m_n && eta.size() == m_m, "solve_equality_qp: rhs dimensions");
    Vector rhs(m_n + m_m);
    rhs << -c, eta;
    Vector sol = m_lu.solve(rhs);
    // One step of iterative refinement.
    sol += m_lu.solve(rhs - m_kkt * sol);
    return {sol.head(m_n), sol.tail(m_m)};
}

EqualityQpSolution solve_equality_qp(const Matrix& H, const Vector& c, const Matrix& E, const Vector& eta)
{
    return EqualityQpSolver(H, E).solve(c, eta);
}

PrimalUpdateSolver::PrimalUpdateSolver(const ProblemInstance& instance, Scalar rho)
    : m_instance(instance), m_rho(rho)
{
    if (!(rho > 0)) throw DataError("rho must be positive");
    m_E = stacked_constraint_matrix(instance.structure());
    m_eta = stacked_rhs(instance);
    if (instance.kind() == ObjectiveKind::Quadratic) {
        const Index n_x = instance.n_x(), n_in = instance.n_in();
        Matrix H = Matrix::Zero(n_x + n_in, n_x + n_in);
        H.topLeftCorner(n_x, n_x) = instance.Q();
        H.bottomRightCorner(n_in, n_in).diagonal().setConstant(rho);
        m_qp.emplace(H, m_E);
    }
}

PrimalUpdateResult PrimalUpdateSolver::solve(const Vector& q, const PrimalUpdateResult* warm) const
{
    require_dims(q.size() == m_instance.n_in(), "primal_update: len(q) != n_in");
    if (m_instance.kind() == ObjectiveKind::Quadratic) return solve_quadratic(q);
    return solve_entropy(q, warm);
}

PrimalUpdateResult PrimalUpdateSolver::solve_quadratic(const Vector& q) const
{
    const Index n_x = m_instance.n_x(), n_in = m_instance.n_in(), n_eq = m_instance.n_eq();
    Vector c(n_x + n_in);
    c << m_instance.p(), -m_rho * q;
    const auto sol = m_qp->solve(c, m_eta);
    return {sol.y.head(n_x), sol.y.tail(n_in), sol.mult.head(n_eq), sol.mult.tail(n_in), 0};
}

PrimalUpdateResult PrimalUpdateSolver::solve_entropy(const Vector& q, const PrimalUpdateResult* warm) const
{
    const Index n_x = m_instance.n_x(), n_in = m_instance.n_in(), n_eq = m_instance.n_eq();
    const Index n = n_x + n_in, m = n_eq + n_in;

    Vector y(n), nu(m);
    if (warm && warm->x.size() == n_x && (warm->x.array() > 0).all()) {
        y << warm->x, warm->s;
        nu << warm->z, warm->beta;
    } else {
        const Vector x0 = Vector::Constant(n_x, 1.0 / static_cast<Scalar>(n_x));
        y << x0, m_instance.d() - m_instance.C() * x0;
        nu.setZero();
    }

    auto residual = [&](const Vector& yy, const Vector& nn) {
        Vector r(n + m);
        r.head(n_x) = yy.head(n_x).array().log() + 1.0;
        r.segment(n_x, n_in) = m_rho * (yy.tail(n_in) - q);
        r.head(n) += m_E.transpose() * nn;
        r.tail(m) = m_E * yy - m_eta;
        return r;
    };

    Matrix kkt = Matrix::Zero(n + m, n + m);
    kkt.topRightCorner(n, m) = m_E.transpose();
    kkt.bottomLeftCorner(m, n) = m_E;
    kkt.block(n_x, n_x, n_in, n_in).diagonal().setConstant(m_rho);

    Vector r = residual(y, nu);
    for (int it = 0; it < max_newton; ++it) {
        if (r.lpNorm<Eigen::Infinity>() <= newton_tol)
            return {y.head(n_x), y.tail(n_in), nu.head(n_eq), nu.tail(n_in), it};

        kkt.topLeftCorner(n_x, n_x).diagonal() = y.head(n_x).cwiseInverse();
        Vector rhs(n + m);
        rhs.head(n) = -(r.head(n) - m_E.transpose() * nu); // -grad F
        rhs.tail(m) = -r.tail(m);
        const Eigen::PartialPivLU<Matrix> lu(kkt);
        const Vector sol = lu.solve(rhs);
        const Vector dy = sol.head(n);
        const Vector dnu = sol.tail(m) - nu;

        // Fraction to boundary: x + t dx >= 0.05 x.
        Scalar t = 1.0;
        for (Index i = 0; i < n_x; ++i)
            if (dy(i) < 0) t = std::min(t, 0.95 * y(i) / -dy(i));

        const Scalar r0 = r.norm();
        Vector y_new, nu_new, r_new;
        for (int ls = 0; ls < 60; ++ls) {
            y_new = y + t * dy;
            nu_new = nu + t * dnu;
            r_new = residual(y_new, nu_new);
            if (r_new.allFinite() && r_new.norm() <= (1.0 - 0.01 * t) * r0) break;
            t *= 0.5;
        }
        y = std::move(y_new);
        nu = std::move(nu_new);
        r = std::move(r_new);
    }
    if (r.lpNorm<Eigen::Infinity>() <= newton_tol)
        return {y.head(n_x), y.tail(n_in), nu.head(n_eq), nu.tail(n_in), max_newton};
    throw NewtonDivergenceError("entropy primal update did not converge within " + std::to_string(max_newton) +
                                " Newton iterations");
}

PrimalUpdateResult primal_update(const ProblemInstance& instance, const Vector& q, Scalar rho)
{
    return PrimalUpdateSolver(instance, rho).solve(q);
}

Vector primal_update_residual(const ProblemInstance& instance, const PrimalUpdateResult& r, const Vector& q, Scalar rho)
{
    return objective_gradient(instance, r.x) + instance.A().transpose() * r.z + rho * instance.C().transpose() * (q - r.s);
}

AdmmSolveReport admm_solve(const ProblemInstance& instance, const AdmmOptions& options)
{
    if (!(options.rho > 0) || !(options.tol > 0)) throw DataError("admm_solve: rho and tol must be positive");
    const auto start = std::chrono::steady_clock::now();
    const Scalar rho = options.rho;
    const Index n_in = instance.n_in();
    const PrimalUpdateSolver solver(instance, rho);

    AdmmSolveReport rep;
    rep.state = AdmmState::zeros(n_in);
    PrimalUpdateResult pu;
    const Scalar sqrt_n = std::sqrt(static_cast<Scalar>(n_in));
    for (int k = 0; k < options.max_iter; ++k) {
        pu = solver.solve(rep.state.q(rho), k > 0 ? &pu : nullptr);
        const Vector w_old = rep.state.w;
        rep.state.w = project_nonneg(pu.s + rep.state.v / rho);
        rep.state.v += rho * (pu.s - rep.state.w);
        rep.iterations = k + 1;

        rep.primal_residual = (pu.s - rep.state.w).norm();
        rep.dual_residual = rho * (rep.state.w - w_old).norm();
        if (options.record_history) rep.history.push_back(std::max(rep.primal_residual, rep.dual_residual));
        const Scalar eps_p = options.tol * sqrt_n * (1.0 + std::max(pu.s.norm(), rep.state.w.norm()));
        const Scalar eps_d = options.tol * sqrt_n * (1.0 + rep.state.v.norm());
        if (rep.primal_residual <= eps_p && rep.dual_residual <= eps_d) {
            rep.converged = true;
            break;
        }
    }
    rep.x_star = pu.x;
    rep.s_star = pu.s;
    rep.z = pu.z;
    rep.beta = pu.beta;
    rep.objective = objective_value(instance, pu.x);
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

AdmmSolveReport admm_solve(const ProblemInstance& instance, Scalar rho, Scalar tol, int max_iter)
{
    AdmmOptions o;
    o.rho = rho;
    o.tol = tol;
    o.max_iter = max_iter;
    return admm_solve(instance, o);
}

Scalar KktCertificate::worst() const
{
    return std::max({stationarity, primal_feasibility, dual_feasibility, complementarity});
}

KktCertificate kkt_certificate(const ProblemInstance& instance, const Vector& x, const Vector& z, const Vector& mu)
{
    KktCertificate c;
    const Vector slack = instance.d() - instance.C() * x;
    c.stationarity = (objective_gradient(instance, x) + instance.A().transpose() * z + instance.C().transpose() * mu)
                         .lpNorm<Eigen::Infinity>();
    const Scalar eq = instance.n_eq() > 0 ? (instance.A() * x - instance.b()).lpNorm<Eigen::Infinity>() : 0.0;
    const Scalar in = instance.n_in() > 0 ? (-slack).cwiseMax(0.0).maxCoeff() : 0.0;
    c.primal_feasibility = std::max(eq, in);
    c.dual_feasibility = instance.n_in() > 0 ? (-mu).cwiseMax(0.0).maxCoeff() : 0.0;
    c.complementarity = instance.n_in() > 0 ? (mu.array() * slack.array()).abs().maxCoeff() : 0.0;
    return c;
}

ReferenceSolution reference_optimum(const ProblemInstance& instance, Scalar tol)
{
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (const Scalar rho : {1.0, 10.0, 0.1, 100.0}) {
        AdmmOptions o;
        o.rho = rho;
        o.tol = tol;
        o.max_iter = 10000;
        AdmmSolveReport rep;
        try {
            rep = admm_solve(instance, o);
        } catch (const NumericalError&) {
            continue;
        }
        const auto cert = kkt_certificate(instance, rep.x_star, rep.z, rep.beta);
        best = std::min(best, cert.worst());
        if (cert.worst() < certificate_tolerance) {
            ReferenceSolution ref;
            ref.x_star = rep.x_star;
            ref.s_star = rep.s_star;
            ref.f_star = rep.objective;
            ref.certificate = cert;
            ref.iterations = rep.iterations;
            ref.rho = rho;
            return ref;
        }
    }
    throw InfeasibleOrUnconvergedError("reference solve failed KKT certification (worst residual " +
                                       std::to_string(best) + ")");
}

} // namespace huanet
