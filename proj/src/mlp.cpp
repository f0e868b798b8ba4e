#include "huanet/mlp.hpp"

#include "huanet/affine.hpp"

#include <cmath>
#include <string>

namespace huanet
{

std::string_view to_string(Activation a)
{
    switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Softplus: return "softplus";
    }
    return "unknown";
}

Activation activation_from_string(std::string_view s)
{
    if (s == "tanh") return Activation::Tanh;
    if (s == "softplus") return Activation::Softplus;
    throw FormatError("unknown activation '" + std::string(s) + "'");
}

std::vector<Index> MlpParams::layer_sizes() const
{
    std::vector<Index> sizes;
    if (weights.empty()) return sizes;
    sizes.push_back(weights.front().cols());
    for (const auto& W : weights) sizes.push_back(W.rows());
    return sizes;
}

Index MlpParams::parameter_count() const
{
    Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

bool MlpParams::all_finite() const
{
    for (std::size_t l = 0; l < weights.size(); ++l)
        if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    return true;
}

MlpParams MlpParams::zeros_like() const
{
    MlpParams z;
    z.activation = activation;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        z.weights.push_back(Matrix::Zero(weights[l].rows(), weights[l].cols()));
        z.biases.push_back(Vector::Zero(biases[l].size()));
    }
    return z;
}

void MlpParams::set_zero()
{
    for (auto& W : weights) W.setZero();
    for (auto& b : biases) b.setZero();
}

MlpParams& MlpParams::operator+=(const MlpParams& other)
{
    if (!same_shape(*this, other)) throw ShapeError("MlpParams += with mismatched shapes");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] += other.weights[l];
        biases[l] += other.biases[l];
    }
    return *this;
}

MlpParams& MlpParams::operator*=(Scalar s)
{
    for (auto& W : weights) W *= s;
    for (auto& b : biases) b *= s;
    return *this;
}

bool MlpParams::operator==(const MlpParams& other) const
{
    if (activation != other.activation || !same_shape(*this, other)) return false;
    for (std::size_t l = 0; l < weights.size(); ++l)
        if (weights[l] != other.weights[l] || biases[l] != other.biases[l]) return false;
    return true;
}

bool same_shape(const MlpParams& a, const MlpParams& b)
{
    if (a.weights.size() != b.weights.size() || a.biases.size() != b.biases.size()) return false;
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        if (a.weights[l].rows() != b.weights[l].rows() || a.weights[l].cols() != b.weights[l].cols()) return false;
        if (a.biases[l].size() != b.biases[l].size()) return false;
    }
    return true;
}

MlpParams init_mlp(std::span<const Index> sizes, Activation activation, Rng& rng)
{
    if (sizes.size() < 2) throw DimensionError("an MLP needs at least input and output sizes");
    MlpParams p;
    p.activation = activation;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const Index fan_in = sizes[l], fan_out = sizes[l + 1];
        if (fan_in < 0 || fan_out < 0) throw DimensionError("negative layer size");
        const Scalar bound = fan_in + fan_out > 0 ? std::sqrt(6.0 / static_cast<Scalar>(fan_in + fan_out)) : 0.0;
        Matrix W(fan_out, fan_in);
        for (Index i = 0; i < fan_out; ++i)
            for (Index j = 0; j < fan_in; ++j) W(i, j) = rng.uniform(-bound, bound);
        p.weights.push_back(std::move(W));
        p.biases.push_back(Vector::Zero(fan_out));
    }
    return p;
}

namespace
{

Matrix activate(Activation a, const Matrix& z)
{
    if (a == Activation::Tanh) return z.array().tanh().matrix();
    return z.unaryExpr([](Scalar v) { return softplus(v); });
}

// Derivative of the activation given the pre-activation z and output h.
Matrix activation_derivative(Activation a, const Matrix& z, const Matrix& h)
{
    if (a == Activation::Tanh) return (1.0 - h.array().square()).matrix();
    return z.unaryExpr([](Scalar v) { return sigmoid(v); });
}

void check_input(const MlpParams& params, const Matrix& input)
{
    if (params.weights.empty()) throw DimensionError("empty MLP");
    require_dims(input.rows() == params.input_dim(),
                 "mlp input has " + std::to_string(input.rows()) + " rows, expected " +
                     std::to_string(params.input_dim()));
}

} // namespace

MlpForward mlp_forward(const MlpParams& params, const Matrix& input)
{
    check_input(params, input);
    MlpForward f;
    f.tape.m_batch = input.cols();
    const std::size_t L = params.weights.size();
    Matrix h = input;
    for (std::size_t l = 0; l < L; ++l) {
        Matrix z = params.weights[l] * h;
        z.colwise() += params.biases[l];
        f.tape.m_inputs.push_back(std::move(h));
        if (l + 1 < L) {
            h = activate(params.activation, z);
            f.tape.m_pre.push_back(std::move(z));
        } else {
            f.output = std::move(z);
        }
    }
    return f;
}

Matrix mlp_apply(const MlpParams& params, const Matrix& input)
{
    check_input(params, input);
    const std::size_t L = params.weights.size();
    Matrix h = input;
    for (std::size_t l = 0; l < L; ++l) {
        Matrix z = params.weights[l] * h;
        z.colwise() += params.biases[l];
        h = l + 1 < L ? activate(params.activation, z) : std::move(z);
    }
    return h;
}

Matrix mlp_backward(const MlpParams& params, Tape& tape, const Matrix& output_grad, MlpParams& grads)
{
    if (tape.m_consumed) throw TapeReuseError("tape already consumed by a backward pass");
    const std::size_t L = params.weights.size();
    if (tape.m_inputs.size() != L) throw MissingTapeError("tape does not match the network");
    if (!same_shape(params, grads)) throw ShapeError("gradient container shape mismatch");
    require_dims(output_grad.rows() == params.output_dim() && output_grad.cols() == tape.m_batch,
                 "mlp_backward: output_grad shape");
    tape.m_consumed = true;

    Matrix g = output_grad; // gradient w.r.t. the pre-activation of layer l
    for (std::size_t l = L; l-- > 0;) {
        grads.weights[l].noalias() += g * tape.m_inputs[l].transpose();
        grads.biases[l] += g.rowwise().sum();
        Matrix g_in = params.weights[l].transpose() * g;
        if (l > 0) {
            const Matrix& z = tape.m_pre[l - 1];
            const Matrix& h = tape.m_inputs[l];
            g = (g_in.array() * activation_derivative(params.activation, z, h).array()).matrix();
        } else {
            g = std::move(g_in);
        }
    }
    tape.m_inputs.clear();
    tape.m_pre.clear();
    return g;
}

AdamWState AdamWState::for_params(const MlpParams& params, AdamWConfig config)
{
    AdamWState s;
    s.config = config;
    s.first_moment = params.zeros_like();
    s.second_moment = params.zeros_like();
    return s;
}

namespace
{

template<typename Block>
void adamw_block(const AdamWConfig& c, Scalar bc1, Scalar bc2, Block& theta, const Block& g, Block& m, Block& v)
{
    theta *= 1.0 - c.lr * c.weight_decay;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseAbs2();
    theta.array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
}

} // namespace

void adamw_step(AdamWState& state, MlpParams& params, const MlpParams& grads)
{
    if (!same_shape(params, grads) || !same_shape(params, state.first_moment) ||
        !same_shape(params, state.second_moment))
        throw ShapeError("adamw_step: shape mismatch");
    state.step += 1;
    const auto& c = state.config;
    const Scalar bc1 = 1.0 - std::pow(c.beta1, static_cast<Scalar>(state.step));
    const Scalar bc2 = 1.0 - std::pow(c.beta2, static_cast<Scalar>(state.step));
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        adamw_block(c, bc1, bc2, params.weights[l], grads.weights[l], state.first_moment.weights[l],
                    state.second_moment.weights[l]);
        adamw_block(c, bc1, bc2, params.biases[l], grads.biases[l], state.first_moment.biases[l],
                    state.second_moment.biases[l]);
    }
}

} // namespace huanet
