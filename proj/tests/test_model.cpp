#include "huanet/model.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <chrono>

using namespace huanet;

namespace
{

Dataset qp_data(Index n_x, Index n_eq, Index n_in, Index count, std::uint64_t seed = 1)
{
    return sample_dataset(gen_random_qp(n_x, n_eq, n_in, seed), {count, 0, 0}, seed + 1);
}

Dataset entropy_data(Index n_x, Index n_in, Index count, std::uint64_t seed = 1)
{
    return sample_dataset(gen_entropy(n_x, n_in, seed), {count, 0, 0}, seed + 1);
}

TrainConfig loss_config(Scalar gamma_s, Scalar gamma_r)
{
    TrainConfig c;
    c.gamma_s = gamma_s;
    c.gamma_r = gamma_r;
    return c;
}

} // namespace

TEST_CASE("model dims and modes")
{
    Rng rng(1);
    const auto qp = qp_data(4, 2, 3, 1);
    ModelConfig mc;
    mc.hidden = {8};
    const HuanetModel m = make_model(qp.instances[0], mc, rng);
    CHECK(m.primal.input_dim() == 3 + 4);
    CHECK(m.primal.output_dim() == 4 + 3);
    CHECK(m.dual.output_dim() == 2);
    CHECK(m.mode == CorrectionMode::AffineProjection);
    CHECK(m.n_train_layers == 20);
    CHECK(m.n_infer_layers == 30);
    const auto ent = entropy_data(5, 2, 1);
    CHECK(make_model(ent.instances[0], mc, rng).mode == CorrectionMode::SimplexFeasibility);
    HuanetModel bad = m;
    bad.n_train_layers = 0;
    CHECK_THROWS_AS(bad.validate(), DimensionError);
}

TEST_CASE("kkt residual identities")
{
    const auto ds = qp_data(5, 2, 3, 1);
    const auto& inst = ds.instances[0];
    Rng rng(2);
    const Vector x = rng.normal_matrix(5, 1).col(0), s = rng.normal_matrix(3, 1).col(0), z = rng.normal_matrix(2, 1).col(0),
                 q = rng.normal_matrix(3, 1).col(0), delta = rng.normal_matrix(2, 1).col(0);
    const Vector r0 = kkt_residual(inst, x, s, z, q, 1.3);
    const Vector r1 = kkt_residual(inst, x, s, Vector(z + delta), q, 1.3);
    CHECK((r1 - r0 - inst.A().transpose() * delta).norm() < 1e-12);

    const auto plain = ProblemStructure::create(ObjectiveKind::Quadratic, Matrix::Identity(3, 3), Matrix(0, 3),
                                                Matrix::Zero(2, 3));
    const ProblemInstance pi(plain, Vector::Zero(3), Vector(), Vector::Zero(2), Vector::Zero(1));
    const Vector xh = rng.normal_matrix(3, 1).col(0);
    CHECK((kkt_residual(pi, xh, Vector::Ones(2), Vector(), Vector::Zero(2), 1.0) - xh).norm() < 1e-15);
}

TEST_CASE("layer wired to the exact primal update reproduces one ADMM step")
{
    const auto ds = qp_data(6, 2, 4, 10, 3);
    Rng rng(4);
    for (const auto& inst : ds.instances) {
        const Scalar rho = 0.5 + rng.uniform();
        HuanetModel m = gradcheck::tiny_model(inst, 4, 1, rho, 5);
        const InstanceBatch batch = InstanceBatch::from(std::span(&inst, 1));
        const auto op = make_affine_operator(inst.structure());
        const PrimalUpdateSolver solver(inst, rho);
        // Run a few exact ADMM iterations, feeding each layer the true subproblem solution.
        AdmmState st = AdmmState::zeros(4);
        st.w = rng.uniform_vector(4, 0, 1);
        st.v = rng.normal_matrix(4, 1).col(0);
        for (int k = 0; k < 5; ++k) {
            const auto pu = solver.solve(st.q(rho));
            Matrix y(10, 1);
            y << pu.x, pu.s;
            const LayerTrace t = layer_from_outputs(m, BatchState{st.w, st.v}, batch, *op, y, Matrix(pu.z));
            CHECK(t.r.norm() < 1e-8);
            CHECK((t.x_hat.col(0) - pu.x).norm() < 1e-10);
            const Vector w = project_nonneg(pu.s + st.v / rho);
            const Vector v = st.v + rho * (pu.s - w);
            CHECK((t.state_out.w.col(0) - w).norm() < 1e-10);
            CHECK((t.state_out.v.col(0) - v).norm() < 1e-10);
            st.w = w;
            st.v = v;
        }
    }
}

TEST_CASE("hard equality feasibility at every layer, any weights")
{
    const auto ds = qp_data(5, 2, 3, 6, 7);
    Rng rng(8);
    for (int trial = 0; trial < 3; ++trial) {
        HuanetModel m = gradcheck::tiny_model(ds.instances[0], 6, 7, 1.0, 10 + trial);
        if (trial == 0)
            for (auto& w : m.primal.weights) w.setZero();
        const InstanceBatch batch = InstanceBatch::from(ds.instances);
        const auto op = make_affine_operator(ds.instances[0].structure());
        const Trajectory t = forward_unrolled(m, batch, *op, 7);
        CHECK(t.layers.size() == 7);
        for (const auto& tr : t.layers) {
            Matrix y(8, batch.size());
            y << tr.x_hat, tr.s_hat;
            const Matrix res = op->E() * y - batch.eta;
            for (Index j = 0; j < batch.size(); ++j)
                CHECK(res.col(j).lpNorm<Eigen::Infinity>() <= 1e-10 * (1 + batch.eta.col(j).lpNorm<Eigen::Infinity>()));
            CHECK(tr.state_out.w.minCoeff() >= 0);
        }
    }
}

TEST_CASE("simplex mode keeps every iterate on the simplex and positive")
{
    const auto ds = entropy_data(6, 3, 5, 2);
    HuanetModel m = gradcheck::tiny_model(ds.instances[0], 6, 6, 1.0, 3);
    const InstanceBatch batch = InstanceBatch::from(ds.instances);
    const auto op = make_affine_operator(ds.instances[0].structure());
    const Trajectory t = forward_unrolled(m, batch, *op, 6);
    for (const auto& tr : t.layers) {
        CHECK(tr.x_hat.minCoeff() > 0);
        CHECK((tr.x_hat.colwise().sum().array() - 1).abs().maxCoeff() <= 1e-12);
        CHECK((ds.instances[0].C() * tr.x_hat + tr.s_hat - batch.d).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("single layer without inequalities")
{
    const auto ds = qp_data(5, 2, 0, 4, 9);
    HuanetModel m = gradcheck::tiny_model(ds.instances[0], 6, 20, 1.0, 3);
    CHECK(m.single_layer());
    CHECK(m.input_dim() == 5);
    const auto sys = assemble_affine(ds.instances[0]);
    const Trajectory t = forward_unrolled(m, ds.instances[0], sys, 20);
    CHECK(t.layers.size() == 1);
    const Vector expect = project_affine(*sys.op, mlp_apply(m.primal, ds.instances[0].lambda()), sys.eta);
    CHECK((t.layers[0].x_hat.col(0) - expect).norm() < 1e-14);
    for (const auto& inst : ds.instances) {
        const auto r = infer(m, inst, *sys.op);
        CHECK((inst.A() * r.x_hat - inst.b()).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
}

TEST_CASE("forward pass is deterministic and time-invariant")
{
    const auto ds = qp_data(4, 2, 2, 3, 2);
    HuanetModel m = gradcheck::tiny_model(ds.instances[0], 5, 4, 1.0, 4);
    const InstanceBatch batch = InstanceBatch::from(ds.instances);
    const auto op = make_affine_operator(ds.instances[0].structure());
    const Trajectory a = forward_unrolled(m, batch, *op, 4);
    const Trajectory b = forward_unrolled(m, batch, *op, 4);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(a.layers[k].x_hat == b.layers[k].x_hat);
        CHECK(a.layers[k].state_out.v == b.layers[k].state_out.v);
    }
    // The same input state gives the same output regardless of where in the chain it is applied.
    const LayerTrace again = layer_forward(m, a.layers[1].state_out, batch, *op);
    CHECK(again.x_hat == a.layers[2].x_hat);
    CHECK(again.state_out.w == a.layers[2].state_out.w);
    // Batched and per-instance paths agree.
    const auto sys = assemble_affine(ds.instances[1]);
    const Trajectory single = forward_unrolled(m, ds.instances[1], sys, 4);
    CHECK((single.layers[3].x_hat.col(0) - a.layers[3].x_hat.col(1)).norm() < 1e-13);
}

TEST_CASE("unrolled gradient matches finite differences: QP")
{
    const auto ds = qp_data(4, 2, 2, 3, 5);
    HuanetModel m = gradcheck::tiny_model(ds.instances[0], 8, 3, 0.8, 6);
    const auto res = gradcheck::check_model(m, ds.instances, loss_config(10, 1));
    INFO("worst " << res.worst_name << " rel " << res.worst_rel);
    CHECK(res.checked == m.primal.parameter_count() + m.dual.parameter_count());
    CHECK(res.failed == 0);
}

TEST_CASE("unrolled gradient matches finite differences: entropy")
{
    const auto ds = entropy_data(4, 2, 3, 5);
    HuanetModel m = gradcheck::tiny_model(ds.instances[0], 8, 3, 1.2, 7);
    const auto res = gradcheck::check_model(m, ds.instances, loss_config(10, 1));
    INFO("worst " << res.worst_name << " rel " << res.worst_rel);
    CHECK(res.failed == 0);
}

TEST_CASE("unrolled gradient matches finite differences: single layer and softplus")
{
    const auto ds = qp_data(5, 2, 0, 3, 8);
    HuanetModel m = gradcheck::tiny_model(ds.instances[0], 6, 1, 1.0, 9);
    CHECK(gradcheck::check_model(m, ds.instances, loss_config(10, 1)).failed == 0);

    const auto ds2 = qp_data(4, 1, 3, 2, 4);
    Rng rng(1);
    ModelConfig mc;
    mc.hidden = {6};
    mc.activation = Activation::Softplus;
    mc.n_train_layers = 4;
    HuanetModel sp = make_model(ds2.instances[0], mc, rng);
    CHECK(gradcheck::check_model(sp, ds2.instances, loss_config(3, 0.5)).failed == 0);
}

TEST_CASE("gamma_r = 0 gives an exactly zero dual gradient; zero partials give zero gradients")
{
    const auto ds = qp_data(4, 2, 2, 3, 5);
    HuanetModel m = gradcheck::tiny_model(ds.instances[0], 8, 3, 1.0, 6);
    const InstanceBatch batch = InstanceBatch::from(ds.instances);
    const auto op = make_affine_operator(ds.instances[0].structure());
    Trajectory t = forward_unrolled(m, batch, *op, 3);
    LossPartials p;
    batch_loss(t, batch, loss_config(10, 0), &p);
    const auto g = backward_unrolled(m, t, batch, *op, p);
    for (std::size_t l = 0; l < g.dual.weights.size(); ++l) {
        CHECK(g.dual.weights[l].cwiseAbs().maxCoeff() == 0.0);
        CHECK(g.dual.biases[l].cwiseAbs().maxCoeff() == 0.0);
    }

    Trajectory t2 = forward_unrolled(m, batch, *op, 3);
    LossPartials zero;
    zero.terminal_x = Matrix::Zero(4, 3);
    zero.terminal_s = Matrix::Zero(2, 3);
    zero.residual.assign(3, Matrix::Zero(4, 3));
    const auto g0 = backward_unrolled(m, t2, batch, *op, zero);
    CHECK(g0.primal == m.primal.zeros_like());
    CHECK_THROWS_AS(backward_unrolled(m, t2, batch, *op, zero), TapeReuseError);

    Trajectory no_tapes = forward_unrolled(m, batch, *op, 3, LayerOptions{false, true});
    CHECK_THROWS_AS(backward_unrolled(m, no_tapes, batch, *op, zero), MissingTapeError);
}

TEST_CASE("inference cost scales linearly with depth")
{
    const auto ds = qp_data(20, 5, 10, 1, 3);
    Rng rng(2);
    ModelConfig mc;
    mc.hidden = {128, 128};
    HuanetModel m = make_model(ds.instances[0], mc, rng);
    const auto op = make_affine_operator(ds.instances[0].structure());
    auto time_at = [&](int K) {
        m.n_infer_layers = K;
        return median_time([&] { (void)infer(m, ds.instances[0], *op); }, 31);
    };
    const double t20 = time_at(20), t40 = time_at(40);
    const double ratio = t40 / t20;
    INFO("t20 " << t20 << " t40 " << t40);
    CHECK(ratio > 1.4);
    CHECK(ratio < 2.6);
}
