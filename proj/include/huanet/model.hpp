#ifndef HUANET_MODEL_HPP
#define HUANET_MODEL_HPP

#include "huanet/admm.hpp"
#include "huanet/affine.hpp"
#include "huanet/mlp.hpp"

#include <optional>
#include <span>
#include <vector>

namespace huanet
{

/// How the primal network output is made feasible.
enum class CorrectionMode
{
    AffineProjection,   // closed-form projection onto E y = eta
    SimplexFeasibility, // positive simplex map, s = d - C x
};

std::string_view to_string(CorrectionMode m);
CorrectionMode correction_mode_from_string(std::string_view s);
CorrectionMode default_correction(ObjectiveKind kind);

/// Unrolled ADMM network. One primal network maps [q; lambda] to a prior
/// estimate [x; s] which the correction stage makes feasible; one dual network
/// maps [q; lambda] to the equality multiplier z. Both are shared by every layer.
/// With no inequalities the network is a single layer fed by lambda alone.
struct HuanetModel
{
    MlpParams primal;
    MlpParams dual;
    Scalar rho = 1.0;
    int n_train_layers = 20;
    int n_infer_layers = 30;
    CorrectionMode mode = CorrectionMode::AffineProjection;
    Index n_x = 0;
    Index n_eq = 0;
    Index n_in = 0;
    Index n_lambda = 0;

    Index input_dim() const { return n_in + n_lambda; }
    bool single_layer() const { return n_in == 0; }
    /// Throws DimensionError when network shapes disagree with the problem dims.
    void validate() const;
};

struct ModelConfig
{
    std::vector<Index> hidden{512, 512};
    Activation activation = Activation::Tanh;
    Scalar rho = 1.0;
    int n_train_layers = 20;
    int n_infer_layers = 30;
};

HuanetModel make_model(const ProblemStructure& structure, Index n_lambda, const ModelConfig& config, Rng& rng);
HuanetModel make_model(const ProblemInstance& like, const ModelConfig& config, Rng& rng);

/// S instances of one family stored column-wise.
struct InstanceBatch
{
    std::shared_ptr<const ProblemStructure> structure;
    Matrix linear; // p, n_x x S (0 rows for NegEntropy)
    Matrix d;      // n_in x S
    Matrix eta;    // [b; d], (n_eq + n_in) x S
    Matrix lambda; // n_lambda x S

    Index size() const { return eta.cols(); }

    static InstanceBatch from(std::span<const ProblemInstance> instances);
    static InstanceBatch from(std::span<const ProblemInstance> instances, std::span<const std::size_t> indices);
};

/// ADMM auxiliary and dual variables for a batch (one column per instance).
struct BatchState
{
    Matrix w;
    Matrix v;

    static BatchState zeros(Index n_in, Index batch) { return {Matrix::Zero(n_in, batch), Matrix::Zero(n_in, batch)}; }
    Matrix q(Scalar rho) const { return w - v / rho; }
};

/// Everything one layer computed, kept for the backward pass.
struct LayerTrace
{
    Matrix q;     // w - v / rho
    Matrix y_bar; // primal network output
    Matrix x_hat;
    Matrix s_hat;
    Matrix z_hat; // dual network output (empty when not evaluated)
    Matrix r;     // stationarity residual of the primal update
    Matrix u;     // s_hat + v / rho, argument of the nonnegative projection
    BatchState state_out;
    std::optional<Tape> tape_primal;
    std::optional<Tape> tape_dual;
};

struct Trajectory
{
    BatchState initial;
    std::vector<LayerTrace> layers;
};

/// r = grad f(x_hat) + A' z_hat + rho C' (q - s_hat), column-wise.
Matrix kkt_residual(const ProblemStructure& s, const Matrix& x_hat, const Matrix& s_hat, const Matrix& z_hat,
                    const Matrix& q, const Matrix& linear, Scalar rho);
Vector kkt_residual(const ProblemInstance& instance, const Vector& x_hat, const Vector& s_hat, const Vector& z_hat,
                    const Vector& q, Scalar rho);

/// Network input [q; lambda] (just lambda in the single-layer case).
Matrix network_input(const HuanetModel& model, const Matrix& q, const InstanceBatch& batch);

/// Correction stage, residual and ADMM auxiliary/dual updates for given
/// network outputs y_bar and z_hat (z_hat may be empty to skip the residual).
LayerTrace layer_from_outputs(const HuanetModel& model, const BatchState& state, const InstanceBatch& batch,
                              const AffineOperator& op, Matrix y_bar, Matrix z_hat);

struct LayerOptions
{
    bool keep_tapes = true;
    bool eval_dual = true;
};

LayerTrace layer_forward(const HuanetModel& model, const BatchState& state, const InstanceBatch& batch,
                         const AffineOperator& op, LayerOptions options = {});
LayerTrace layer_forward(const HuanetModel& model, const AdmmState& state, const ProblemInstance& instance,
                         const AffineSystem& sys);

/// Chains `layers` layers from (w, v) = (0, 0). The single-layer model always
/// runs exactly one layer.
Trajectory forward_unrolled(const HuanetModel& model, const InstanceBatch& batch, const AffineOperator& op, int layers,
                            LayerOptions options = {});
Trajectory forward_unrolled(const HuanetModel& model, const ProblemInstance& instance, const AffineSystem& sys,
                            int layers);

struct InferResult
{
    Vector x_hat;
    Vector s_hat;
    double wall_time = 0;
};

struct BatchInferResult
{
    Matrix x_hat;
    Matrix s_hat;
};

/// K-layer inference without tapes and without the dual network.
InferResult infer(const HuanetModel& model, const ProblemInstance& instance, const AffineOperator& op);
BatchInferResult infer_batch(const HuanetModel& model, const InstanceBatch& batch, const AffineOperator& op,
                             int layers);

/// Gradients of the scalar loss with respect to its direct inputs: the
/// terminal x_hat and s_hat and every layer's residual r.
struct LossPartials
{
    Matrix terminal_x;
    Matrix terminal_s;
    std::vector<Matrix> residual;
};

struct HuanetGradients
{
    MlpParams primal;
    MlpParams dual;
};

/// Reverse pass through the unrolled layers. Consumes the tapes of the
/// trajectory; throws MissingTapeError if any is absent.
HuanetGradients backward_unrolled(const HuanetModel& model, Trajectory& trajectory, const InstanceBatch& batch,
                                  const AffineOperator& op, const LossPartials& partials);

} // namespace huanet

#endif // HUANET_MODEL_HPP
