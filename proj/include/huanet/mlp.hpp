#ifndef HUANET_MLP_HPP
#define HUANET_MLP_HPP

#include "huanet/rng.hpp"
#include "huanet/types.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace huanet
{

/// Hidden-layer activation; the output layer is always linear.
enum class Activation
{
    Tanh,
    Softplus,
};

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

/// Dense feed-forward network parameters. Layer l maps sizes[l] -> sizes[l+1]
/// as W_l h + b_l. Also used as the container for parameter gradients and
/// optimizer moments.
struct MlpParams
{
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    Activation activation = Activation::Tanh;

    std::vector<Index> layer_sizes() const;
    Index input_dim() const { return weights.empty() ? 0 : weights.front().cols(); }
    Index output_dim() const { return weights.empty() ? 0 : weights.back().rows(); }
    Index parameter_count() const;
    bool all_finite() const;

    /// Same shapes, all zeros.
    MlpParams zeros_like() const;
    void set_zero();
    MlpParams& operator+=(const MlpParams& other);
    MlpParams& operator*=(Scalar s);
    bool operator==(const MlpParams& other) const;
};

/// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases.
MlpParams init_mlp(std::span<const Index> sizes, Activation activation, Rng& rng);

struct MlpForward;

/// Activations recorded by one forward call; consumed by exactly one backward call.
class Tape
{
public:
    bool consumed() const { return m_consumed; }
    Index batch_size() const { return m_batch; }

private:
    friend MlpForward mlp_forward(const MlpParams&, const Matrix&);
    friend Matrix mlp_backward(const MlpParams&, Tape&, const Matrix&, MlpParams&);

    std::vector<Matrix> m_inputs; // input to each layer
    std::vector<Matrix> m_pre;    // pre-activation of each hidden layer
    Index m_batch = 0;
    bool m_consumed = false;
};

struct MlpForward
{
    Matrix output;
    Tape tape;
};

/// Forward pass over a batch stored as columns.
MlpForward mlp_forward(const MlpParams& params, const Matrix& input);
/// Forward pass without recording a tape (inference).
Matrix mlp_apply(const MlpParams& params, const Matrix& input);

/// Reverse pass of <output_grad, output>: accumulates parameter gradients
/// (summed over the batch) into `grads` and returns the input gradient.
/// Throws TapeReuseError when the tape was already consumed.
Matrix mlp_backward(const MlpParams& params, Tape& tape, const Matrix& output_grad, MlpParams& grads);

struct AdamWConfig
{
    Scalar lr = 1e-3;
    Scalar beta1 = 0.9;
    Scalar beta2 = 0.999;
    Scalar eps = 1e-8;
    Scalar weight_decay = 1e-4;
};

/// AdamW with bias correction and decoupled weight decay:
///   theta *= 1 - lr * wd
///   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
///   theta -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
struct AdamWState
{
    AdamWConfig config;
    MlpParams first_moment;
    MlpParams second_moment;
    long long step = 0;

    static AdamWState for_params(const MlpParams& params, AdamWConfig config);
};

/// Throws ShapeError when the shapes of state, params and grads differ.
void adamw_step(AdamWState& state, MlpParams& params, const MlpParams& grads);

bool same_shape(const MlpParams& a, const MlpParams& b);

} // namespace huanet

#endif // HUANET_MLP_HPP
