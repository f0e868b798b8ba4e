#include "huanet/dataset_io.hpp"

#include <charconv>
#include <sstream>

namespace huanet
{

namespace
{

long long parse_int(const std::string& s, const char* what)
{
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw FormatError(std::string("bad integer for ") + what + ": '" + s + "'");
    return v;
}

unsigned long long parse_u64(const std::string& s, const char* what)
{
    unsigned long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw FormatError(std::string("bad integer for ") + what + ": '" + s + "'");
    return v;
}

// Stacks one vector per instance as the rows of a matrix.
template<typename Get>
Matrix stack_rows(const std::vector<ProblemInstance>& xs, Index width, Get get)
{
    Matrix m(static_cast<Index>(xs.size()), width);
    for (std::size_t i = 0; i < xs.size(); ++i) m.row(static_cast<Index>(i)) = get(xs[i]).transpose();
    return m;
}

} // namespace

Container dataset_to_container(const Dataset& ds)
{
    Container c;
    c.magic = dataset_magic;
    c.version = dataset_version;
    c.set("family", std::string(to_string(ds.family)));
    c.set("nx", std::to_string(ds.dims.n_x));
    c.set("neq", std::to_string(ds.dims.n_eq));
    c.set("nin", std::to_string(ds.dims.n_in));
    c.set("counts", std::to_string(ds.counts.train) + "," + std::to_string(ds.counts.val) + "," +
                        std::to_string(ds.counts.test));
    c.set("seed", std::to_string(ds.seed));
    c.set("family_seed", std::to_string(ds.family_seed));
    c.set("normal_convention", "stddev");
    if (ds.family == FamilyKind::Lasso) c.set("lasso_alpha_source", "observation");

    if (ds.instances.empty()) throw DataError("cannot save an empty dataset");
    const auto& s = ds.instances.front().structure();
    for (const auto& inst : ds.instances)
        if (inst.structure_ptr().get() != &s) throw DataError("dataset instances must share one structure");
    c.set("objective", std::string(to_string(s.kind)));
    c.set("decision_dim", std::to_string(s.n_x()));
    c.set("eq_rows", std::to_string(s.n_eq()));
    c.set("ineq_rows", std::to_string(s.n_in()));
    const Index n_lambda = ds.instances.front().n_lambda();
    c.set("n_lambda", std::to_string(n_lambda));

    c.add_tensor("Q", s.Q);
    c.add_tensor("A", s.A);
    c.add_tensor("C", s.C);
    const Index n_p = s.kind == ObjectiveKind::Quadratic ? s.n_x() : 0;
    c.add_tensor("p", stack_rows(ds.instances, n_p, [](const ProblemInstance& i) -> const Vector& { return i.p(); }));
    c.add_tensor("b", stack_rows(ds.instances, s.n_eq(), [](const ProblemInstance& i) -> const Vector& { return i.b(); }));
    c.add_tensor("d", stack_rows(ds.instances, s.n_in(), [](const ProblemInstance& i) -> const Vector& { return i.d(); }));
    c.add_tensor("lambda",
                 stack_rows(ds.instances, n_lambda, [](const ProblemInstance& i) -> const Vector& { return i.lambda(); }));
    return c;
}

Dataset dataset_from_container(const Container& c)
{
    Dataset ds;
    ds.family = family_kind_from_string(c.get("family"));
    ds.dims.n_x = parse_int(c.get("nx"), "nx");
    ds.dims.n_eq = parse_int(c.get("neq"), "neq");
    ds.dims.n_in = parse_int(c.get("nin"), "nin");
    ds.seed = parse_u64(c.get("seed"), "seed");
    ds.family_seed = parse_u64(c.get("family_seed"), "family_seed");
    {
        std::istringstream ss(c.get("counts"));
        std::string a, b, d;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, d))
            throw FormatError("bad counts '" + c.get("counts") + "'");
        ds.counts = {parse_int(a, "counts"), parse_int(b, "counts"), parse_int(d, "counts")};
    }
    const auto kind = objective_kind_from_string(c.get("objective"));
    auto structure = ProblemStructure::create(kind, c.tensor("Q"), c.tensor("A"), c.tensor("C"));
    const Matrix& P = c.tensor("p");
    const Matrix& B = c.tensor("b");
    const Matrix& D = c.tensor("d");
    const Matrix& L = c.tensor("lambda");
    const Index count = ds.counts.total();
    if (P.rows() != count || B.rows() != count || D.rows() != count || L.rows() != count)
        throw FormatError("per-instance tensors disagree with declared counts");
    if (L.cols() != parse_int(c.get("n_lambda"), "n_lambda")) throw FormatError("lambda width mismatch");
    ds.instances.reserve(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i)
        ds.instances.emplace_back(structure, P.row(i).transpose(), B.row(i).transpose(), D.row(i).transpose(),
                                  L.row(i).transpose());
    return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds)
{
    write_container(path, dataset_to_container(ds));
}

Dataset load_dataset(const std::filesystem::path& path)
{
    return dataset_from_container(read_container(path, dataset_magic, dataset_version));
}

} // namespace huanet
