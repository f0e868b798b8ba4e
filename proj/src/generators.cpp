#include "huanet/generators.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace huanet
{

namespace
{

constexpr int max_rank_retries = 16;

Matrix full_row_rank_gaussian(Rng& rng, Index rows, Index cols)
{
    if (rows > cols) throw RankError("n_eq must not exceed n_x");
    for (int attempt = 0; attempt < max_rank_retries; ++attempt) {
        Matrix M = rng.normal_matrix(rows, cols);
        if (check_full_row_rank(M)) return M;
    }
    throw RankError("could not sample a full-row-rank equality matrix");
}

void require_nonneg(Index a, Index b, Index c)
{
    if (a < 0 || b < 0 || c < 0) throw DimensionError("dimensions must be nonnegative");
}

// Euclidean projection onto the probability simplex (sort-based).
Vector project_simplex(const Vector& y)
{
    Vector u = y;
    std::sort(u.data(), u.data() + u.size(), std::greater<>());
    Scalar cumsum = 0, theta = 0;
    for (Index i = 0; i < u.size(); ++i) {
        cumsum += u(i);
        const Scalar t = (cumsum - 1.0) / static_cast<Scalar>(i + 1);
        if (u(i) - t > 0) theta = t;
    }
    return (y.array() - theta).cwiseMax(0.0).matrix();
}

// True when some simplex point satisfies C x <= d - margin/2. Accelerated
// projected gradient on 1/2 ||max(0, C x - d + margin)||^2.
bool simplex_strictly_feasible(const Matrix& C, const Vector& d, Scalar margin)
{
    const Index n = C.cols();
    if (C.rows() == 0) return true;
    const Scalar lip = std::max<Scalar>((C * C.transpose()).trace(), 1e-12);
    Vector x = Vector::Constant(n, 1.0 / static_cast<Scalar>(n));
    Vector y = x;
    Scalar t = 1;
    for (int it = 0; it < 5000; ++it) {
        const Vector viol = (C * x - d).array() + margin;
        if (viol.maxCoeff() <= 0.5 * margin) return true;
        const Vector grad = C.transpose() * viol.cwiseMax(0.0);
        const Vector x_next = project_simplex(y - grad / lip);
        const Scalar t_next = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
        y = x_next + ((t - 1) / t_next) * (x_next - x);
        x = x_next;
        t = t_next;
    }
    return false;
}

constexpr Scalar entropy_feasibility_margin = 1e-3;
constexpr int entropy_max_redraws = 1000;

} // namespace

std::string_view to_string(FamilyKind kind)
{
    switch (kind) {
    case FamilyKind::Lasso: return "lasso";
    case FamilyKind::RandomQp: return "qp";
    case FamilyKind::Entropy: return "entropy";
    }
    return "unknown";
}

FamilyKind family_kind_from_string(std::string_view s)
{
    if (s == "lasso") return FamilyKind::Lasso;
    if (s == "qp") return FamilyKind::RandomQp;
    if (s == "entropy") return FamilyKind::Entropy;
    throw FormatError("unknown family '" + std::string(s) + "'");
}

ProblemFamily gen_random_qp(Index n_x, Index n_eq, Index n_in, std::uint64_t seed)
{
    require_nonneg(n_x, n_eq, n_in);
    Rng rng = Rng::keyed(seed, 0);
    ProblemFamily fam;
    fam.m_kind = FamilyKind::RandomQp;
    fam.m_dims = {n_x, n_eq, n_in};
    fam.m_seed = seed;
    fam.m_n_lambda = n_x;

    const Matrix F = rng.normal_matrix(n_x, n_x);
    Matrix Q = F.transpose() * F + Matrix::Identity(n_x, n_x);
    Q = 0.5 * (Q + Q.transpose());
    fam.m_raw_A = full_row_rank_gaussian(rng, n_eq, n_x);
    fam.m_raw_C = rng.normal_matrix(n_in, n_x);
    fam.m_q_inverse = Q.llt().solve(Matrix::Identity(n_x, n_x));
    fam.m_structure = ProblemStructure::create(ObjectiveKind::Quadratic, std::move(Q), fam.m_raw_A, fam.m_raw_C);
    return fam;
}

ProblemFamily gen_lasso(Index n_x, Index n_eq, Index n_in, std::uint64_t seed)
{
    require_nonneg(n_x, n_eq, n_in);
    Rng rng = Rng::keyed(seed, 0);
    ProblemFamily fam;
    fam.m_kind = FamilyKind::Lasso;
    fam.m_dims = {n_x, n_eq, n_in};
    fam.m_seed = seed;
    fam.m_n_lambda = n_eq;

    const Index m = 10 * n_x;
    Matrix features = Matrix::Zero(m, n_x);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n_x; ++j)
            if (rng.uniform() < 0.2) features(i, j) = rng.normal();

    Vector truth = Vector::Zero(n_x);
    for (Index j = 0; j < n_x; ++j)
        if (rng.uniform() < 0.5) truth(j) = rng.normal(0.0, 1.0 / static_cast<Scalar>(n_x));

    Vector observation = features * truth;
    for (Index i = 0; i < m; ++i) observation(i) += rng.normal(0.0, 0.1);

    fam.m_raw_A = full_row_rank_gaussian(rng, n_eq, n_x);
    fam.m_raw_C = rng.normal_matrix(n_in, n_x);
    fam.m_raw_d = rng.uniform_vector(n_in, 1.0, 2.0);
    // alpha = ||F'p||_inf / 5 with p the observation vector.
    fam.m_alpha = n_x > 0 ? (features.transpose() * observation).cwiseAbs().maxCoeff() / 5.0 : 0.0;

    const Index n_y = 2 * n_x;
    Matrix P = Matrix::Zero(n_y, n_y);
    P.topLeftCorner(n_x, n_x) = features.transpose() * features;
    P = 0.5 * (P + P.transpose());
    Matrix G = Matrix::Zero(n_eq, n_y);
    G.leftCols(n_x) = fam.m_raw_A;
    Matrix K = Matrix::Zero(n_in + 2 * n_x, n_y);
    K.topLeftCorner(n_in, n_x) = fam.m_raw_C;
    const Matrix I = Matrix::Identity(n_x, n_x);
    K.block(n_in, 0, n_x, n_x) = I;
    K.block(n_in, n_x, n_x, n_x) = -I;
    K.block(n_in + n_x, 0, n_x, n_x) = -I;
    K.block(n_in + n_x, n_x, n_x, n_x) = -I;

    fam.m_features = std::move(features);
    fam.m_observation = std::move(observation);
    fam.m_truth = std::move(truth);
    // f(y) = y'Py + q'y is stored as 1/2 y'(2P)y + q'y.
    fam.m_structure = ProblemStructure::create(ObjectiveKind::Quadratic, 2.0 * P, std::move(G), std::move(K));
    return fam;
}

ProblemFamily gen_entropy(Index n_x, Index n_in, std::uint64_t seed)
{
    require_nonneg(n_x, 1, n_in);
    if (n_x < 1) throw DimensionError("entropy family needs n_x >= 1");
    Rng rng = Rng::keyed(seed, 0);
    ProblemFamily fam;
    fam.m_kind = FamilyKind::Entropy;
    fam.m_dims = {n_x, 1, n_in};
    fam.m_seed = seed;
    fam.m_n_lambda = n_in;
    fam.m_raw_C = rng.normal_matrix(n_in, n_x);
    fam.m_raw_A = Matrix::Ones(1, n_x);
    fam.m_structure = ProblemStructure::create(ObjectiveKind::NegEntropy, Matrix(), fam.m_raw_A, fam.m_raw_C);
    return fam;
}

ProblemFamily make_family(FamilyKind kind, FamilyDims dims, std::uint64_t seed)
{
    switch (kind) {
    case FamilyKind::Lasso: return gen_lasso(dims.n_x, dims.n_eq, dims.n_in, seed);
    case FamilyKind::RandomQp: return gen_random_qp(dims.n_x, dims.n_eq, dims.n_in, seed);
    case FamilyKind::Entropy:
        if (dims.n_eq != 1) throw DimensionError("entropy family has exactly one equality row");
        return gen_entropy(dims.n_x, dims.n_in, seed);
    }
    throw DataError("unknown family kind");
}

ProblemInstance ProblemFamily::sample(Rng& rng) const
{
    const auto& s = *m_structure;
    switch (m_kind) {
    case FamilyKind::RandomQp: {
        const Vector lambda = rng.uniform_vector(m_dims.n_x, -1.0, 1.0);
        Vector p = Vector::Ones(m_dims.n_x) + lambda;
        const Vector x0 = -m_q_inverse * p;
        Vector b = s.A * x0 + rng.uniform_vector(m_dims.n_eq, 0.0, 0.1);
        Vector d = s.C * x0 + rng.uniform_vector(m_dims.n_in, 0.0, 0.1);
        return ProblemInstance(m_structure, std::move(p), std::move(b), std::move(d), lambda);
    }
    case FamilyKind::Lasso: {
        Vector lambda = m_raw_A * m_truth;
        for (Index i = 0; i < lambda.size(); ++i) lambda(i) += rng.normal();
        const Index n = m_dims.n_x;
        Vector q(2 * n);
        q.head(n) = -2.0 * m_features.transpose() * m_observation;
        q.tail(n).setConstant(m_alpha);
        Vector d = Vector::Zero(s.n_in());
        d.head(m_dims.n_in) = m_raw_d;
        return ProblemInstance(m_structure, std::move(q), lambda, std::move(d), lambda);
    }
    case FamilyKind::Entropy: {
        for (int draw = 0; draw < entropy_max_redraws; ++draw) {
            Vector u = rng.uniform_vector(m_dims.n_x, 0.0, 1.0);
            u /= u.sum();
            Vector lambda = m_raw_C * u;
            for (Index i = 0; i < lambda.size(); ++i) lambda(i) += rng.normal(0.0, 0.1);
            if (simplex_strictly_feasible(m_raw_C, lambda, entropy_feasibility_margin))
                return ProblemInstance(m_structure, Vector(), Vector::Ones(1), lambda, lambda);
        }
        throw DataError("entropy family: no feasible parameter draw");
    }
    }
    throw DataError("unknown family kind");
}

std::span<const ProblemInstance> Dataset::train() const
{
    return std::span(instances).subspan(0, static_cast<std::size_t>(counts.train));
}

std::span<const ProblemInstance> Dataset::val() const
{
    return std::span(instances).subspan(static_cast<std::size_t>(counts.train), static_cast<std::size_t>(counts.val));
}

std::span<const ProblemInstance> Dataset::test() const
{
    return std::span(instances).subspan(static_cast<std::size_t>(counts.train + counts.val),
                                        static_cast<std::size_t>(counts.test));
}

Dataset sample_dataset(const ProblemFamily& family, SplitCounts counts, std::uint64_t seed)
{
    if (counts.train < 0 || counts.val < 0 || counts.test < 0) throw DimensionError("split counts must be >= 0");
    Dataset ds;
    ds.family = family.kind();
    ds.dims = family.dims();
    ds.family_seed = family.seed();
    ds.seed = seed;
    ds.counts = counts;
    ds.instances.reserve(static_cast<std::size_t>(counts.total()));
    const std::uint64_t key = mix_seed(family.seed()) ^ seed;
    for (Index i = 0; i < counts.total(); ++i) {
        Rng rng = Rng::keyed(key, static_cast<std::uint64_t>(i));
        ds.instances.push_back(family.sample(rng));
    }
    return ds;
}

} // namespace huanet
