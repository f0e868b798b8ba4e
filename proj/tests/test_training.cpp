#include "huanet/training.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace huanet;

namespace
{

/// Small QP family whose inequalities are slack at the optimum, so that
/// loss - f* >= 0 and the excess can be driven to zero.
std::vector<ProblemInstance> slack_qp(Index count, std::uint64_t seed, std::vector<Scalar>* f_star)
{
    Rng rng(seed);
    const Matrix F = rng.normal_matrix(4, 4);
    const auto s = ProblemStructure::create(ObjectiveKind::Quadratic, F.transpose() * F + Matrix::Identity(4, 4),
                                            rng.normal_matrix(1, 4), rng.normal_matrix(2, 4));
    std::vector<ProblemInstance> out;
    for (Index i = 0; i < count; ++i) {
        const Vector lambda = rng.uniform_vector(4, -1, 1);
        const Vector b = s->A * rng.uniform_vector(4, -1, 1);
        const auto [x, mult] = oracle::equality_qp(s->Q, lambda, s->A, b);
        const Vector d = s->C * x + Vector::Ones(2);
        out.emplace_back(s, lambda, b, d, lambda);
        if (f_star) f_star->push_back(0.5 * x.dot(s->Q * x) + lambda.dot(x));
    }
    return out;
}

TrainConfig small_config()
{
    TrainConfig c;
    c.hidden = {16, 16};
    c.n_train_layers = 5;
    c.n_infer_layers = 5;
    c.batch_size = 8;
    c.epochs = 10;
    c.patience = 1000;
    c.init_seed = 3;
    c.shuffle_seed = 4;
    return c;
}

} // namespace

TEST_CASE("loss reduces to the terminal objective when both weights vanish")
{
    const auto ds = sample_dataset(gen_random_qp(4, 2, 2, 1), {3, 0, 0}, 1);
    HuanetModel m = gradcheck::tiny_model(ds.instances[0], 6, 3, 1.0, 2);
    const InstanceBatch batch = InstanceBatch::from(ds.instances);
    const auto op = make_affine_operator(ds.instances[0].structure());
    const Trajectory t = forward_unrolled(m, batch, *op, 3);
    TrainConfig cfg;
    cfg.gamma_s = 0;
    cfg.gamma_r = 0;
    const LossValue lv = batch_loss(t, batch, cfg);
    Scalar f = 0;
    for (Index j = 0; j < 3; ++j)
        f += objective_value(ds.instances[static_cast<std::size_t>(j)], t.layers.back().x_hat.col(j));
    CHECK(lv.loss == doctest::Approx(f / 3).epsilon(1e-14));
}

TEST_CASE("loss on a hand-built trajectory")
{
    // f(x) = 1/2 (2 x1^2 + x2^2) + (1, -1)'x, one inequality row.
    Matrix Q(2, 2);
    Q << 2, 0, 0, 1;
    const auto s = ProblemStructure::create(ObjectiveKind::Quadratic, Q, Matrix(0, 2), Matrix::Ones(1, 2));
    Vector p(2);
    p << 1, -1;
    const ProblemInstance inst(s, p, Vector(), Vector::Constant(1, 3.0), Vector::Zero(1));
    Trajectory t;
    for (int k = 0; k < 2; ++k) {
        LayerTrace tr;
        tr.x_hat = Matrix(2, 1);
        tr.s_hat = Matrix(1, 1);
        tr.r = Matrix(2, 1);
        t.layers.push_back(tr);
    }
    t.layers[0].r << 0.5, -1.0;
    t.layers[1].r << 2.0, 0.25;
    t.layers[1].x_hat << 1.0, 2.0;
    t.layers[1].s_hat << -0.5;
    TrainConfig cfg;
    cfg.gamma_s = 3;
    cfg.gamma_r = 0.1;
    // f = 0.5 * (2 + 4) + (1 - 2) = 2; penalty = 0.25; residuals = 1.25 + 4.0625.
    const Scalar expect = 2.0 + 3 * 0.25 + 0.1 * (1.25 + 4.0625);
    CHECK(loss(t, inst, cfg).loss == doctest::Approx(expect).epsilon(1e-12));
    t.layers[1].s_hat << 0.5;
    CHECK(loss(t, inst, cfg).penalty == 0.0);
}

TEST_CASE("overfitting eight instances drives the excess loss down by 100x")
{
    std::vector<Scalar> f_star;
    const auto inst = slack_qp(8, 11, &f_star);
    Scalar mean_f_star = 0;
    for (Scalar f : f_star) mean_f_star += f / 8;
    TrainConfig cfg = small_config();
    cfg.optimizer.lr = 3e-3;
    Rng init(cfg.init_seed);
    HuanetModel m = make_model(inst[0], cfg.model_config(), init);
    const InstanceBatch batch = InstanceBatch::from(inst);
    const auto op = make_affine_operator(inst[0].structure());
    auto excess = [&] {
        const Trajectory t = forward_unrolled(m, batch, *op, cfg.n_train_layers, LayerOptions{false, true});
        return batch_loss(t, batch, cfg).loss - mean_f_star;
    };
    const Scalar before = excess();
    cfg.epochs = 2000;
    cfg.val_every = 100;
    const auto hist = train(m, inst, {}, cfg);
    CHECK(hist.steps == 2000);
    const Scalar after = excess();
    INFO("excess before " << before << " after " << after);
    CHECK(after >= -1e-9);
    CHECK(after * 100 <= before);
}

TEST_CASE("training is deterministic and leaves the dual network alone when gamma_r = 0")
{
    const auto ds = sample_dataset(gen_random_qp(4, 2, 2, 3), {24, 8, 0}, 2);
    TrainConfig cfg = small_config();
    auto run = [&](const TrainConfig& c, HuanetModel* out) {
        Rng init(c.init_seed);
        HuanetModel m = make_model(ds.instances[0], c.model_config(), init);
        const auto h = train(m, ds.train(), ds.val(), c);
        if (out) *out = m;
        return h;
    };
    HuanetModel m1, m2;
    const auto h1 = run(cfg, &m1);
    const auto h2 = run(cfg, &m2);
    REQUIRE(h1.epochs.size() == h2.epochs.size());
    for (std::size_t i = 0; i < h1.epochs.size(); ++i) {
        CHECK(h1.epochs[i].loss == h2.epochs[i].loss);
        CHECK(h1.epochs[i].val_score == h2.epochs[i].val_score);
    }
    CHECK(m1.primal == m2.primal);
    CHECK(m1.dual == m2.dual);

    cfg.gamma_r = 0;
    Rng init(cfg.init_seed);
    const HuanetModel fresh = make_model(ds.instances[0], cfg.model_config(), init);
    HuanetModel m0;
    run(cfg, &m0);
    CHECK(m0.dual == fresh.dual);
    CHECK_FALSE(m0.primal == fresh.primal);
}

TEST_CASE("non-finite losses abort training")
{
    const auto ds = sample_dataset(gen_random_qp(3, 1, 1, 3), {4, 0, 0}, 2);
    std::vector<ProblemInstance> bad(ds.instances.begin(), ds.instances.end());
    Vector p = bad[1].p();
    p(0) = std::numeric_limits<Scalar>::quiet_NaN();
    bad[1] = ProblemInstance(bad[1].structure_ptr(), p, bad[1].b(), bad[1].d(), bad[1].lambda());
    TrainConfig cfg = small_config();
    Rng init(1);
    HuanetModel m = make_model(bad[0], cfg.model_config(), init);
    CHECK_THROWS_AS(train(m, bad, {}, cfg), NonFiniteLossError);
}

TEST_CASE("evaluation: oracle passthrough and architectural equality feasibility")
{
    const auto ds = sample_dataset(gen_random_qp(6, 3, 3, 5), {0, 0, 10}, 2);
    const auto refs = compute_references(ds.test());
    std::vector<Vector> xs, ss;
    for (const auto& r : refs) {
        xs.push_back(r.x_star);
        ss.push_back(r.s_star);
    }
    const auto m = evaluate_solutions(ds.test(), xs, ss, refs);
    CHECK(m.gap_max() == 0.0);
    CHECK(m.eq_max() <= 1e-6);
    CHECK(m.ineq_max() <= 1e-6);

    Rng init(4);
    ModelConfig mc;
    mc.hidden = {8};
    const HuanetModel untrained = make_model(ds.instances[0], mc, init);
    const auto e = evaluate(untrained, ds.test(), refs, 3);
    CHECK(e.eq_max() <= 1e-10);
    CHECK(e.instances.size() == 10);
    CHECK(e.time_max() >= e.time_mean());
    CHECK(e.time_mean() > 0);
    CHECK(e.gap_max() >= e.gap_mean());
    CHECK(e.ineq_max() >= e.ineq_mean());
}

TEST_CASE("instance metrics: gap definition and floor")
{
    const auto s = ProblemStructure::create(ObjectiveKind::Quadratic, Matrix::Identity(1, 1), Matrix(0, 1),
                                            Matrix::Ones(1, 1));
    const ProblemInstance inst(s, Vector::Zero(1), Vector(), Vector::Ones(1), Vector());
    const Vector x = Vector::Constant(1, 2.0);
    const auto m = instance_metrics(inst, x, Vector::Constant(1, -1.0), 1.0);
    CHECK(m.gap == doctest::Approx(100.0));
    CHECK(m.ineq == doctest::Approx(1.0));
    CHECK(m.eq == 0.0);
    const auto z = instance_metrics(inst, Vector::Constant(1, 1e-5), Vector::Constant(1, 1.0), 0.0);
    CHECK(z.gap == doctest::Approx(100.0 * 0.5e-10 / gap_floor));
}

TEST_CASE("metrics CSV and JSON")
{
    EvalMetrics m;
    m.problem = "qp";
    m.dims = {10, 5, 5};
    m.method = "huanet";
    m.instances = {{0.5, 1e-16, 0, 1e-3, true}, {-0.25, 2e-16, 1e-9, 2e-3, false}};
    const std::string csv = metrics_csv({m});
    CHECK(csv.rfind("problem,nx,neq,nin,method,gap_mean,gap_max,eq_mean,eq_max,ineq_mean,ineq_max,time_mean,time_max\n",
                    0) == 0);
    CHECK(csv.find("qp,10,5,5,huanet,0.125,0.5,") != std::string::npos);
    CHECK(m.abs_gap_mean() == doctest::Approx(0.375));
    CHECK(m.converged_fraction() == doctest::Approx(0.5));
    const auto back = metrics_from_json(metrics_json(m, true, "median"));
    CHECK(back.instances.size() == 2);
    CHECK(back.instances[1].gap == m.instances[1].gap);
    CHECK(back.instances[1].time == m.instances[1].time);
    CHECK_FALSE(back.instances[1].converged);
    CHECK(metrics_json(back, true, "median") == metrics_json(m, true, "median"));
    CHECK(metrics_json(m, false, "").find("time") == std::string::npos);
    CHECK(timing_csv({m}).find("qp,10,5,5,huanet,1,0.002,-0.25,") != std::string::npos);
    CHECK_THROWS_AS(metrics_from_json("{}"), FormatError);
}

TEST_CASE("train config JSON")
{
    const auto c = train_config_from_json(R"({"gamma_s": 5, "hidden": [32, 16], "lr": 0.01, "N": 7})");
    CHECK(c.gamma_s == 5);
    CHECK(c.hidden == std::vector<Index>{32, 16});
    CHECK(c.optimizer.lr == 0.01);
    CHECK(c.n_train_layers == 7);
    CHECK(c.gamma_r == 1);
    const auto again = train_config_from_json(train_config_to_json(c));
    CHECK(train_config_to_json(again) == train_config_to_json(c));
    CHECK_THROWS_AS(train_config_from_json(R"({"gama_s": 5})"), FormatError);
    CHECK_THROWS_AS(train_config_from_json(R"({"rho": -1})"), DataError);
    CHECK_THROWS_AS(train_config_from_json(R"({"lr_schedule": "cosine"})"), DataError);
    CHECK_THROWS_AS(train_config_from_json("[1]"), FormatError);
    const TrainConfig d;
    CHECK(d.gamma_s == 10);
    CHECK(d.gamma_r == 1);
    CHECK(d.batch_size == 128);
    CHECK(d.epochs == 200);
    CHECK(d.patience == 20);
}
