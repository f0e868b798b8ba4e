#include "huanet/problem.hpp"
#include "huanet/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace huanet;

namespace
{

std::shared_ptr<const ProblemStructure> quad(const Matrix& Q, Index n_eq = 0)
{
    const Index n = Q.rows();
    return ProblemStructure::create(ObjectiveKind::Quadratic, Q, Matrix::Identity(n_eq, n), Matrix(0, n));
}

std::shared_ptr<const ProblemStructure> entropy(Index n)
{
    return ProblemStructure::create(ObjectiveKind::NegEntropy, Matrix(), Matrix::Ones(1, n), Matrix(0, n));
}

Matrix random_psd(Rng& rng, Index n)
{
    const Matrix F = rng.normal_matrix(n, n);
    return F.transpose() * F + 0.1 * Matrix::Identity(n, n);
}

} // namespace

TEST_CASE("rng streams are reproducible and keyed")
{
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 10; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        (void)c.next_u64();
    }
    Rng k1 = Rng::keyed(7, 0), k2 = Rng::keyed(7, 1), k3 = Rng::keyed(7, 0);
    const auto v1 = k1.next_u64();
    CHECK(v1 == k3.next_u64());
    CHECK(v1 != k2.next_u64());
}

TEST_CASE("rng uniform and normal moments")
{
    Rng rng(1);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        su += u;
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
    }
    CHECK(std::abs(su / n - 0.5) < 5e-3);
    CHECK(std::abs(sn / n) < 1e-2);
    CHECK(std::abs(sn2 / n - 1.0) < 2e-2);
    const double z = Rng(3).normal(2.0, 0.0);
    CHECK(z == 2.0);
    for (int i = 0; i < 1000; ++i) CHECK(rng.below(7) < 7);
}

TEST_CASE("identity quadratic value, gradient, hessian")
{
    const ProblemInstance inst(quad(Matrix::Identity(2, 2)), Vector::Zero(2), Vector(), Vector(), Vector());
    const auto e = objective_eval(inst, Vector::Ones(2));
    CHECK(e.value == doctest::Approx(1.0));
    CHECK(e.gradient.isApprox(Vector::Ones(2)));
    CHECK(e.hessian.isApprox(Matrix::Identity(2, 2)));
}

TEST_CASE("negative entropy at the uniform point")
{
    const ProblemInstance inst(entropy(4), Vector(), Vector::Ones(1), Vector(), Vector());
    const auto e = objective_eval(inst, Vector::Constant(4, 0.25));
    CHECK(e.value == doctest::Approx(-std::log(4.0)).epsilon(1e-14));
    for (Index i = 0; i < 4; ++i) CHECK(e.gradient(i) == doctest::Approx(std::log(0.25) + 1));
    CHECK((e.hessian - 4 * Matrix::Identity(4, 4)).norm() == 0.0);
    CHECK_THROWS_AS(objective_value(inst, Vector::Constant(4, -0.1)), DomainError);
    CHECK_THROWS_AS(objective_value(inst, Vector::Zero(4)), DomainError);
    CHECK_THROWS_AS(objective_value(inst, Vector::Ones(3)), DimensionError);
}

TEST_CASE("objective gradients and hessians match finite differences")
{
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const bool ent = trial % 2 == 1;
        const Index n = 5;
        const ProblemInstance inst = ent ? ProblemInstance(entropy(n), Vector(), Vector::Ones(1), Vector(), Vector())
                                         : ProblemInstance(quad(random_psd(rng, n)), rng.uniform_vector(n, -1, 1),
                                                           Vector(), Vector(), Vector());
        const Vector x = ent ? rng.uniform_vector(n, 0.2, 2.0) : rng.uniform_vector(n, -2, 2);
        const auto e = objective_eval(inst, x);
        const Vector g = oracle::fd_gradient([&](const Vector& y) { return objective_value(inst, y); }, x);
        CHECK(oracle::rel_err(e.gradient, g) < 1e-6);
        const Matrix H = oracle::fd_jacobian([&](const Vector& y) { return objective_gradient(inst, y); }, x);
        CHECK(oracle::rel_err(e.hessian, H) < 1e-6);
        if (ent) {
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < n; ++j) CHECK(e.hessian(i, j) == (i == j ? 1.0 / x(i) : 0.0));
        }
    }
}

TEST_CASE("batched evaluation agrees with the per-instance path")
{
    Rng rng(9);
    const Index n = 4, S = 6;
    const auto s = quad(random_psd(rng, n));
    const Matrix X = rng.normal_matrix(n, S), P = rng.normal_matrix(n, S), G = rng.normal_matrix(n, S);
    const auto vals = objective_values(*s, X, P);
    const Matrix grads = objective_gradients(*s, X, P);
    const Matrix hv = hessian_apply(*s, X, G);
    for (Index j = 0; j < S; ++j) {
        const ProblemInstance inst(s, P.col(j), Vector(), Vector(), Vector());
        const auto e = objective_eval(inst, X.col(j));
        CHECK(vals(j) == doctest::Approx(e.value).epsilon(1e-13));
        CHECK((grads.col(j) - e.gradient).norm() < 1e-12);
        CHECK((hv.col(j) - e.hessian * G.col(j)).norm() < 1e-12);
    }
}

TEST_CASE("structure validation")
{
    CHECK_THROWS_AS(ProblemStructure::create(ObjectiveKind::Quadratic, Matrix::Identity(3, 3), Matrix::Ones(1, 2),
                                             Matrix(0, 2)),
                    DimensionError);
    Matrix nonsym = Matrix::Identity(2, 2);
    nonsym(0, 1) = 1;
    CHECK_THROWS_AS(ProblemStructure::create(ObjectiveKind::Quadratic, nonsym, Matrix(0, 2), Matrix(0, 2)), DataError);
    Matrix indef = Matrix::Identity(2, 2);
    indef(1, 1) = -1;
    CHECK_THROWS_AS(ProblemStructure::create(ObjectiveKind::Quadratic, indef, Matrix(0, 2), Matrix(0, 2)), DataError);
    Matrix dup(2, 3);
    dup << 1, 2, 3, 1, 2, 3;
    CHECK_THROWS_AS(ProblemStructure::create(ObjectiveKind::Quadratic, Matrix::Identity(3, 3), dup, Matrix(0, 3)),
                    RankError);
    const auto s = quad(Matrix::Identity(2, 2), 1);
    CHECK_THROWS_AS(ProblemInstance(s, Vector::Zero(2), Vector::Zero(2), Vector(), Vector()), DimensionError);
}

TEST_CASE("full row rank against an SVD oracle")
{
    CHECK(check_full_row_rank(Matrix::Identity(3, 3)));
    Matrix dup(2, 3);
    dup << 1, 2, 3, 1, 2, 3;
    CHECK_FALSE(check_full_row_rank(dup));
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix M = rng.normal_matrix(5, 10);
        if (trial % 4 == 0) M.row(4) = M.row(0) - 2 * M.row(1);
        CHECK(numerical_rank(M) == oracle::svd_rank(M));
        CHECK(check_full_row_rank(M) == (oracle::svd_rank(M) == 5));
    }
}
