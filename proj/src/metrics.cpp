#include "huanet/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace huanet
{

namespace
{

template<typename Get>
Scalar mean_of(const std::vector<InstanceMetrics>& xs, Get get)
{
    if (xs.empty()) return 0;
    Scalar acc = 0;
    for (const auto& m : xs) acc += get(m);
    return acc / static_cast<Scalar>(xs.size());
}

template<typename Get>
Scalar max_of(const std::vector<InstanceMetrics>& xs, Get get)
{
    if (xs.empty()) return 0;
    Scalar best = get(xs.front());
    for (const auto& m : xs) best = std::max(best, get(m));
    return best;
}

std::string num(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

} // namespace

InstanceMetrics instance_metrics(const ProblemInstance& instance, const Vector& x, const Vector& s, Scalar f_star)
{
    require_dims(x.size() == instance.n_x() && s.size() == instance.n_in(), "instance_metrics: solution dims");
    InstanceMetrics m;
    const Scalar f = objective_value(instance, x);
    m.gap = 100.0 * (f - f_star) / std::max(std::abs(f_star), gap_floor);
    Scalar eq = 0;
    if (instance.n_eq() > 0) eq = (instance.A() * x - instance.b()).lpNorm<Eigen::Infinity>();
    if (instance.n_in() > 0) {
        const Vector cx = instance.C() * x;
        eq = std::max(eq, (cx + s - instance.d()).lpNorm<Eigen::Infinity>());
        m.ineq = (cx - instance.d()).cwiseMax(0.0).maxCoeff();
    }
    m.eq = eq;
    return m;
}

Scalar EvalMetrics::gap_mean() const { return mean_of(instances, [](const auto& m) { return m.gap; }); }
Scalar EvalMetrics::gap_max() const { return max_of(instances, [](const auto& m) { return m.gap; }); }
Scalar EvalMetrics::abs_gap_mean() const { return mean_of(instances, [](const auto& m) { return std::abs(m.gap); }); }
Scalar EvalMetrics::eq_mean() const { return mean_of(instances, [](const auto& m) { return m.eq; }); }
Scalar EvalMetrics::eq_max() const { return max_of(instances, [](const auto& m) { return m.eq; }); }
Scalar EvalMetrics::ineq_mean() const { return mean_of(instances, [](const auto& m) { return m.ineq; }); }
Scalar EvalMetrics::ineq_max() const { return max_of(instances, [](const auto& m) { return m.ineq; }); }
double EvalMetrics::time_mean() const { return mean_of(instances, [](const auto& m) { return m.time; }); }
double EvalMetrics::time_max() const { return max_of(instances, [](const auto& m) { return m.time; }); }
Scalar EvalMetrics::converged_fraction() const
{
    return mean_of(instances, [](const auto& m) { return m.converged ? 1.0 : 0.0; });
}

std::string metrics_csv(const std::vector<EvalMetrics>& rows)
{
    std::ostringstream out;
    out << metrics_csv_header << '\n';
    for (const auto& r : rows) {
        out << r.problem << ',' << r.dims.n_x << ',' << r.dims.n_eq << ',' << r.dims.n_in << ',' << r.method << ','
            << num(r.gap_mean()) << ',' << num(r.gap_max()) << ',' << num(r.eq_mean()) << ',' << num(r.eq_max())
            << ',' << num(r.ineq_mean()) << ',' << num(r.ineq_max()) << ',' << num(r.time_mean()) << ','
            << num(r.time_max()) << '\n';
    }
    return out.str();
}

std::string timing_csv(const std::vector<EvalMetrics>& rows)
{
    std::ostringstream out;
    out << "problem,nx,neq,nin,method,instance,time,gap,eq,ineq,converged\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.instances.size(); ++i) {
            const auto& m = r.instances[i];
            out << r.problem << ',' << r.dims.n_x << ',' << r.dims.n_eq << ',' << r.dims.n_in << ',' << r.method
                << ',' << i << ',' << num(m.time) << ',' << num(m.gap) << ',' << num(m.eq) << ',' << num(m.ineq)
                << ',' << (m.converged ? 1 : 0) << '\n';
        }
    }
    return out.str();
}

std::string metrics_json(const EvalMetrics& m, bool include_timing, const std::string& timing_method)
{
    using nlohmann::json;
    json j;
    j["schema"] = "huanet-metrics/1";
    j["problem"] = m.problem;
    j["nx"] = m.dims.n_x;
    j["neq"] = m.dims.n_eq;
    j["nin"] = m.dims.n_in;
    j["method"] = m.method;
    j["count"] = m.instances.size();
    j["summary"] = {{"gap_mean", m.gap_mean()}, {"gap_max", m.gap_max()},   {"abs_gap_mean", m.abs_gap_mean()},
                    {"eq_mean", m.eq_mean()},   {"eq_max", m.eq_max()},     {"ineq_mean", m.ineq_mean()},
                    {"ineq_max", m.ineq_max()}, {"converged_fraction", m.converged_fraction()}};
    json per = json::object();
    per["gap"] = json::array();
    per["eq"] = json::array();
    per["ineq"] = json::array();
    per["converged"] = json::array();
    for (const auto& x : m.instances) {
        per["gap"].push_back(x.gap);
        per["eq"].push_back(x.eq);
        per["ineq"].push_back(x.ineq);
        per["converged"].push_back(x.converged);
    }
    if (include_timing) {
        j["summary"]["time_mean"] = m.time_mean();
        j["summary"]["time_max"] = m.time_max();
        j["timing"] = timing_method;
        per["time"] = json::array();
        for (const auto& x : m.instances) per["time"].push_back(x.time);
    }
    j["instances"] = per;
    return j.dump(2) + "\n";
}

EvalMetrics metrics_from_json(const std::string& text)
{
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("metrics JSON: ") + e.what());
    }
    try {
        if (j.at("schema") != "huanet-metrics/1") throw FormatError("unknown metrics schema");
        EvalMetrics m;
        m.problem = j.at("problem").get<std::string>();
        m.dims = {j.at("nx").get<Index>(), j.at("neq").get<Index>(), j.at("nin").get<Index>()};
        m.method = j.at("method").get<std::string>();
        const auto& per = j.at("instances");
        const std::size_t n = j.at("count").get<std::size_t>();
        const bool timed = per.contains("time");
        m.instances.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto& x = m.instances[i];
            x.gap = per.at("gap").at(i).get<Scalar>();
            x.eq = per.at("eq").at(i).get<Scalar>();
            x.ineq = per.at("ineq").at(i).get<Scalar>();
            x.converged = per.at("converged").at(i).get<bool>();
            if (timed) x.time = per.at("time").at(i).get<double>();
        }
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("metrics JSON: ") + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double median(std::vector<double> xs)
{
    if (xs.empty()) return 0;
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

} // namespace huanet
