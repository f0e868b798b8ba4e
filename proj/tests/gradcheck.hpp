// Finite-difference check of the full unrolled training loss.
#ifndef HUANET_TESTS_GRADCHECK_HPP
#define HUANET_TESTS_GRADCHECK_HPP

#include "huanet/generators.hpp"
#include "huanet/training.hpp"

#include <cmath>
#include <string>

namespace gradcheck
{

using namespace huanet;

/// |analytic - fd| <= rel * max(|analytic|, |fd|) + abs_floor
struct Result
{
    long checked = 0;
    long failed = 0;
    Scalar worst_rel = 0;
    std::string worst_name;
};

inline Scalar loss_of(const HuanetModel& m, const InstanceBatch& batch, const AffineOperator& op,
                      const TrainConfig& cfg)
{
    const Trajectory t = forward_unrolled(m, batch, op, m.n_train_layers, LayerOptions{false, true});
    return batch_loss(t, batch, cfg).loss;
}

inline void check_block(HuanetModel& model, MlpParams& net, const MlpParams& grad, const std::string& label,
                        const InstanceBatch& batch, const AffineOperator& op, const TrainConfig& cfg, Result& res,
                        Scalar rel, Scalar abs_floor, Scalar h)
{
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (int which = 0; which < 2; ++which) {
            Scalar* data = which == 0 ? net.weights[l].data() : net.biases[l].data();
            const Scalar* g = which == 0 ? grad.weights[l].data() : grad.biases[l].data();
            const Index size = which == 0 ? net.weights[l].size() : net.biases[l].size();
            for (Index i = 0; i < size; ++i) {
                const Scalar orig = data[i];
                data[i] = orig + h;
                const Scalar up = loss_of(model, batch, op, cfg);
                data[i] = orig - h;
                const Scalar dn = loss_of(model, batch, op, cfg);
                data[i] = orig;
                const Scalar fd = (up - dn) / (2 * h);
                const Scalar diff = std::abs(fd - g[i]);
                const Scalar scale = std::max(std::abs(fd), std::abs(g[i]));
                ++res.checked;
                if (diff > rel * scale + abs_floor) ++res.failed;
                const Scalar r = diff / std::max(scale, abs_floor / rel);
                if (r > res.worst_rel) {
                    res.worst_rel = r;
                    res.worst_name = label + (which == 0 ? ".W" : ".b") + std::to_string(l) + "[" +
                                     std::to_string(i) + "]";
                }
            }
        }
    }
}

/// Compares backward_unrolled with central differences of the batch loss
/// for every parameter of both networks.
inline Result check_model(HuanetModel& model, std::span<const ProblemInstance> instances, const TrainConfig& cfg,
                          Scalar rel = 1e-5, Scalar abs_floor = 1e-8, Scalar h = 1e-6)
{
    const InstanceBatch batch = InstanceBatch::from(instances);
    const auto op = make_affine_operator(instances.front().structure());
    Trajectory t = forward_unrolled(model, batch, *op, model.n_train_layers);
    LossPartials partials;
    batch_loss(t, batch, cfg, &partials);
    const HuanetGradients g = backward_unrolled(model, t, batch, *op, partials);
    Result res;
    check_block(model, model.primal, g.primal, "primal", batch, *op, cfg, res, rel, abs_floor, h);
    check_block(model, model.dual, g.dual, "dual", batch, *op, cfg, res, rel, abs_floor, h);
    return res;
}

/// Tiny model with randomized biases so that every layer is exercised.
inline HuanetModel tiny_model(const ProblemInstance& like, Index width, int layers, Scalar rho, std::uint64_t seed)
{
    Rng rng(seed);
    ModelConfig mc;
    mc.hidden = {width, width};
    mc.rho = rho;
    mc.n_train_layers = layers;
    mc.n_infer_layers = layers;
    HuanetModel m = make_model(like, mc, rng);
    for (auto* net : {&m.primal, &m.dual})
        for (auto& b : net->biases) b = 0.5 * rng.normal_matrix(b.size(), 1).col(0);
    return m;
}

} // namespace gradcheck

#endif // HUANET_TESTS_GRADCHECK_HPP
