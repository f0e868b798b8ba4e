#ifndef HUANET_TRAINING_HPP
#define HUANET_TRAINING_HPP

#include "huanet/admm.hpp"
#include "huanet/metrics.hpp"
#include "huanet/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace huanet
{

struct TrainConfig
{
    Scalar gamma_s = 10.0;
    Scalar gamma_r = 1.0;
    Scalar rho = 1.0;
    int n_train_layers = 20;
    int n_infer_layers = 30;
    Index batch_size = 128;
    int epochs = 200;
    int patience = 20;
    int val_every = 1;
    std::vector<Index> hidden{512, 512};
    Activation activation = Activation::Tanh;
    AdamWConfig optimizer;
    std::string lr_schedule = "constant";
    std::uint64_t init_seed = 0;
    std::uint64_t shuffle_seed = 0;
    /// Stop after this many seconds of training (0 = no limit). Breaks determinism when hit.
    double max_seconds = 0;

    ModelConfig model_config() const;
    /// Throws DataError when a field is out of range.
    void validate() const;
};

/// Flat JSON object; every key is optional and unknown keys are rejected.
TrainConfig train_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& cfg);

/// Batch-mean loss and its components.
struct LossValue
{
    Scalar loss = 0;
    Scalar objective = 0; // mean f(x_hat^N)
    Scalar penalty = 0;   // mean ||max(0, -s_hat^N)||^2
    Scalar residual = 0;  // mean sum_k ||r^k||^2
};

/// f(x^N) + gamma_s ||max(0, -s^N)||^2 + gamma_r sum_k ||r^k||^2, averaged over
/// the batch. Fills `partials` with the gradient of the mean loss with respect
/// to x^N, s^N and every r^k when it is non-null.
LossValue batch_loss(const Trajectory& trajectory, const InstanceBatch& batch, const TrainConfig& cfg,
                     LossPartials* partials = nullptr);
LossValue loss(const Trajectory& trajectory, const ProblemInstance& instance, const TrainConfig& cfg);

struct EpochRecord
{
    int epoch = 0;
    Scalar loss = 0;
    Scalar objective = 0;
    Scalar residual = 0;
    std::optional<Scalar> val_score;
    Scalar val_objective = 0;
    Scalar val_ineq = 0;
    double wall_time = 0; // seconds since the start of training
};

struct TrainHistory
{
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    Scalar best_score = 0;
    int steps = 0;
    bool stopped_early = false;
    double wall_time = 0;
};

/// Oracle-free validation summary: the K-layer model's mean objective and
/// mean inequality violation over `instances`.
struct ValidationSummary
{
    Scalar objective = 0;
    Scalar ineq = 0;
    Scalar score = 0; // objective + gamma_s * ineq
};

ValidationSummary validate_model(const HuanetModel& model, std::span<const ProblemInstance> instances,
                                 const TrainConfig& cfg);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Self-supervised training of both networks with AdamW. `model` ends up
/// holding the best-validation parameters. The dual network is left untouched
/// when gamma_r = 0, since it then receives no gradient.
TrainHistory train(HuanetModel& model, std::span<const ProblemInstance> train_set,
                   std::span<const ProblemInstance> val_set, const TrainConfig& cfg, const EpochCallback& log = {});

/// Certified optimum of every instance.
std::vector<ReferenceSolution> compute_references(std::span<const ProblemInstance> instances);

/// Metrics of given solutions against reference optima.
EvalMetrics evaluate_solutions(std::span<const ProblemInstance> instances, std::span<const Vector> xs,
                               std::span<const Vector> ss, std::span<const ReferenceSolution> refs);

/// Runs infer() on each instance (median of `timing_reps` timed calls after a
/// warm-up) and scores the result against the reference optima.
EvalMetrics evaluate(const HuanetModel& model, std::span<const ProblemInstance> instances,
                     std::span<const ReferenceSolution> refs, int timing_reps = 3);

} // namespace huanet

#endif // HUANET_TRAINING_HPP
