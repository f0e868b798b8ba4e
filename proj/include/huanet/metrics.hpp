#ifndef HUANET_METRICS_HPP
#define HUANET_METRICS_HPP

#include "huanet/generators.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace huanet
{

/// Floor of the gap denominator.
inline constexpr Scalar gap_floor = 1e-8;

struct InstanceMetrics
{
    Scalar gap = 0;  // percent, signed
    Scalar eq = 0;   // max(||Ax - b||_inf, ||Cx + s - d||_inf)
    Scalar ineq = 0; // ||max(0, Cx - d)||_inf
    double time = 0; // seconds
    bool converged = true;
};

/// gap = 100 (f(x) - f*) / max(|f*|, gap_floor).
InstanceMetrics instance_metrics(const ProblemInstance& instance, const Vector& x, const Vector& s, Scalar f_star);

/// Per-instance results of one method on one test set.
struct EvalMetrics
{
    std::string problem;
    FamilyDims dims;
    std::string method;
    std::vector<InstanceMetrics> instances;

    Scalar gap_mean() const;
    Scalar gap_max() const;
    /// Mean of |gap|, the quantity the desk-scale targets are checked against.
    Scalar abs_gap_mean() const;
    Scalar eq_mean() const;
    Scalar eq_max() const;
    Scalar ineq_mean() const;
    Scalar ineq_max() const;
    double time_mean() const;
    double time_max() const;
    Scalar converged_fraction() const;
};

inline constexpr const char* metrics_csv_header =
    "problem,nx,neq,nin,method,gap_mean,gap_max,eq_mean,eq_max,ineq_mean,ineq_max,time_mean,time_max";

std::string metrics_csv(const std::vector<EvalMetrics>& rows);
/// Long format: problem,nx,neq,nin,method,instance,time,gap,eq,ineq,converged.
std::string timing_csv(const std::vector<EvalMetrics>& rows);

/// JSON document for one evaluation. Timing fields are left out when
/// `include_timing` is false so that deterministic runs compare byte for byte.
std::string metrics_json(const EvalMetrics& m, bool include_timing, const std::string& timing_method);
EvalMetrics metrics_from_json(const std::string& text);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Median of `reps` timed calls of `fn` after one untimed warm-up call.
template<typename Fn>
double median_time(Fn&& fn, int reps);

double median(std::vector<double> xs);

} // namespace huanet

#include <chrono>

template<typename Fn>
double huanet::median_time(Fn&& fn, int reps)
{
    fn();
    std::vector<double> ts;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        ts.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return median(std::move(ts));
}

#endif // HUANET_METRICS_HPP
