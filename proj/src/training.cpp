#include "huanet/training.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <numeric>

namespace huanet
{

ModelConfig TrainConfig::model_config() const
{
    ModelConfig m;
    m.hidden = hidden;
    m.activation = activation;
    m.rho = rho;
    m.n_train_layers = n_train_layers;
    m.n_infer_layers = n_infer_layers;
    return m;
}

void TrainConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw DataError("train config: " + msg); };
    if (!(gamma_s >= 0) || !(gamma_r >= 0)) fail("gamma_s and gamma_r must be >= 0");
    if (!(rho > 0)) fail("rho must be > 0");
    if (n_train_layers < 1 || n_infer_layers < 1) fail("N and K must be >= 1");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (epochs < 0) fail("epochs must be >= 0");
    if (patience < 1) fail("patience must be >= 1");
    if (val_every < 1) fail("val_every must be >= 1");
    for (Index h : hidden)
        if (h < 1) fail("hidden widths must be >= 1");
    if (!(optimizer.lr > 0) || !(optimizer.eps > 0) || optimizer.weight_decay < 0) fail("bad optimizer settings");
    if (!(optimizer.beta1 >= 0 && optimizer.beta1 < 1 && optimizer.beta2 >= 0 && optimizer.beta2 < 1))
        fail("betas must lie in [0, 1)");
    if (lr_schedule != "constant") fail("only the constant lr_schedule is implemented");
    if (max_seconds < 0) fail("max_seconds must be >= 0");
}

TrainConfig train_config_from_json(const std::string& text)
{
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("train config: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("train config must be a JSON object");
    TrainConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "gamma_s") c.gamma_s = v.get<Scalar>();
            else if (key == "gamma_r") c.gamma_r = v.get<Scalar>();
            else if (key == "rho") c.rho = v.get<Scalar>();
            else if (key == "N") c.n_train_layers = v.get<int>();
            else if (key == "K") c.n_infer_layers = v.get<int>();
            else if (key == "batch_size") c.batch_size = v.get<Index>();
            else if (key == "epochs") c.epochs = v.get<int>();
            else if (key == "patience") c.patience = v.get<int>();
            else if (key == "val_every") c.val_every = v.get<int>();
            else if (key == "hidden") c.hidden = v.get<std::vector<Index>>();
            else if (key == "activation") c.activation = activation_from_string(v.get<std::string>());
            else if (key == "lr") c.optimizer.lr = v.get<Scalar>();
            else if (key == "beta1") c.optimizer.beta1 = v.get<Scalar>();
            else if (key == "beta2") c.optimizer.beta2 = v.get<Scalar>();
            else if (key == "eps") c.optimizer.eps = v.get<Scalar>();
            else if (key == "weight_decay") c.optimizer.weight_decay = v.get<Scalar>();
            else if (key == "lr_schedule") c.lr_schedule = v.get<std::string>();
            else if (key == "init_seed") c.init_seed = v.get<std::uint64_t>();
            else if (key == "shuffle_seed") c.shuffle_seed = v.get<std::uint64_t>();
            else if (key == "max_seconds") c.max_seconds = v.get<double>();
            else throw FormatError("train config: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string train_config_to_json(const TrainConfig& c)
{
    nlohmann::ordered_json j;
    j["gamma_s"] = c.gamma_s;
    j["gamma_r"] = c.gamma_r;
    j["rho"] = c.rho;
    j["N"] = c.n_train_layers;
    j["K"] = c.n_infer_layers;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["patience"] = c.patience;
    j["val_every"] = c.val_every;
    j["hidden"] = c.hidden;
    j["activation"] = std::string(to_string(c.activation));
    j["lr"] = c.optimizer.lr;
    j["beta1"] = c.optimizer.beta1;
    j["beta2"] = c.optimizer.beta2;
    j["eps"] = c.optimizer.eps;
    j["weight_decay"] = c.optimizer.weight_decay;
    j["lr_schedule"] = c.lr_schedule;
    j["init_seed"] = c.init_seed;
    j["shuffle_seed"] = c.shuffle_seed;
    j["max_seconds"] = c.max_seconds;
    return j.dump(2) + "\n";
}

LossValue batch_loss(const Trajectory& trajectory, const InstanceBatch& batch, const TrainConfig& cfg,
                     LossPartials* partials)
{
    if (trajectory.layers.empty()) throw DimensionError("loss of an empty trajectory");
    const auto& s = *batch.structure;
    const auto& last = trajectory.layers.back();
    const Scalar inv_S = 1.0 / static_cast<Scalar>(batch.size());

    LossValue out;
    out.objective = objective_values(s, last.x_hat, batch.linear).sum() * inv_S;
    const Matrix neg = (-last.s_hat).cwiseMax(0.0);
    out.penalty = neg.squaredNorm() * inv_S;
    for (const auto& t : trajectory.layers) {
        if (t.r.cols() != batch.size()) throw MissingTapeError("trajectory has no residuals (dual network skipped)");
        out.residual += t.r.squaredNorm() * inv_S;
    }
    out.loss = out.objective + cfg.gamma_s * out.penalty + cfg.gamma_r * out.residual;

    if (partials) {
        partials->terminal_x = objective_gradients(s, last.x_hat, batch.linear) * inv_S;
        partials->terminal_s = -2.0 * cfg.gamma_s * inv_S * neg;
        partials->residual.clear();
        for (const auto& t : trajectory.layers) partials->residual.push_back(2.0 * cfg.gamma_r * inv_S * t.r);
    }
    return out;
}

LossValue loss(const Trajectory& trajectory, const ProblemInstance& instance, const TrainConfig& cfg)
{
    return batch_loss(trajectory, InstanceBatch::from(std::span(&instance, 1)), cfg);
}

ValidationSummary validate_model(const HuanetModel& model, std::span<const ProblemInstance> instances,
                                 const TrainConfig& cfg)
{
    ValidationSummary v;
    if (instances.empty()) return v;
    const auto op = make_affine_operator(instances.front().structure());
    const Index chunk = 512;
    const auto n = static_cast<Index>(instances.size());
    for (Index start = 0; start < n; start += chunk) {
        const auto part = instances.subspan(static_cast<std::size_t>(start),
                                            static_cast<std::size_t>(std::min(chunk, n - start)));
        const InstanceBatch batch = InstanceBatch::from(part);
        const auto r = infer_batch(model, batch, *op, model.n_infer_layers);
        v.objective += objective_values(*batch.structure, r.x_hat, batch.linear).sum();
        if (r.s_hat.rows() > 0) v.ineq += (-r.s_hat).cwiseMax(0.0).colwise().maxCoeff().sum();
    }
    v.objective /= static_cast<Scalar>(n);
    v.ineq /= static_cast<Scalar>(n);
    v.score = v.objective + cfg.gamma_s * v.ineq;
    return v;
}

TrainHistory train(HuanetModel& model, std::span<const ProblemInstance> train_set,
                   std::span<const ProblemInstance> val_set, const TrainConfig& cfg, const EpochCallback& log)
{
    cfg.validate();
    model.validate();
    if (train_set.empty()) throw DataError("empty training split");
    const auto& structure = train_set.front().structure();
    require_dims(structure.n_x() == model.n_x && structure.n_eq() == model.n_eq && structure.n_in() == model.n_in &&
                     train_set.front().n_lambda() == model.n_lambda,
                 "dataset family does not match the model dims");
    const auto n_train = static_cast<Index>(train_set.size());
    const Index S = std::min(cfg.batch_size, n_train);
    const auto op = make_affine_operator(structure);
    const bool train_dual = cfg.gamma_r > 0;
    const std::span<const ProblemInstance> val = val_set.empty() ? train_set : val_set;

    AdamWState opt_p = AdamWState::for_params(model.primal, cfg.optimizer);
    AdamWState opt_d = AdamWState::for_params(model.dual, cfg.optimizer);
    Rng shuffle(cfg.shuffle_seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainHistory hist;
    HuanetModel best = model;
    hist.best_score = validate_model(model, val, cfg).score;
    int since_best = 0;
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

        EpochRecord rec;
        rec.epoch = epoch;
        int batches = 0;
        for (Index b0 = 0; b0 < n_train; b0 += S) {
            const auto idx = std::span(order).subspan(static_cast<std::size_t>(b0),
                                                      static_cast<std::size_t>(std::min(S, n_train - b0)));
            const InstanceBatch batch = InstanceBatch::from(train_set, idx);
            Trajectory traj = forward_unrolled(model, batch, *op, model.n_train_layers);
            LossPartials partials;
            const LossValue lv = batch_loss(traj, batch, cfg, &partials);
            if (!std::isfinite(lv.loss))
                throw NonFiniteLossError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                         std::to_string(hist.steps) + " (objective " + std::to_string(lv.objective) +
                                         ", residual " + std::to_string(lv.residual) + ")");
            const HuanetGradients g = backward_unrolled(model, traj, batch, *op, partials);
            adamw_step(opt_p, model.primal, g.primal);
            if (train_dual) adamw_step(opt_d, model.dual, g.dual);
            ++hist.steps;
            ++batches;
            rec.loss += lv.loss;
            rec.objective += lv.objective;
            rec.residual += lv.residual;
        }
        rec.loss /= batches;
        rec.objective /= batches;
        rec.residual /= batches;
        if (!model.primal.all_finite() || !model.dual.all_finite())
            throw NonFiniteLossError("non-finite parameters after epoch " + std::to_string(epoch));

        const bool out_of_time = cfg.max_seconds > 0 && elapsed() >= cfg.max_seconds;
        if (epoch % cfg.val_every == 0 || epoch == cfg.epochs || out_of_time) {
            const ValidationSummary v = validate_model(model, val, cfg);
            rec.val_score = v.score;
            rec.val_objective = v.objective;
            rec.val_ineq = v.ineq;
            if (std::isfinite(v.score) && v.score < hist.best_score) {
                hist.best_score = v.score;
                hist.best_epoch = epoch;
                best = model;
                since_best = 0;
            } else {
                since_best += cfg.val_every;
            }
        }
        rec.wall_time = elapsed();
        hist.epochs.push_back(rec);
        if (log) log(rec);
        if (since_best >= cfg.patience || out_of_time) {
            hist.stopped_early = true;
            break;
        }
    }
    hist.wall_time = elapsed();
    model = std::move(best);
    return hist;
}

std::vector<ReferenceSolution> compute_references(std::span<const ProblemInstance> instances)
{
    std::vector<ReferenceSolution> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) out.push_back(reference_optimum(inst));
    return out;
}

namespace
{

EvalMetrics empty_metrics(std::span<const ProblemInstance> instances, const std::string& method)
{
    EvalMetrics m;
    m.method = method;
    if (!instances.empty()) {
        const auto& s = instances.front().structure();
        m.problem = s.kind == ObjectiveKind::NegEntropy ? "entropy" : "qp";
        m.dims = {s.n_x(), s.n_eq(), s.n_in()};
    }
    return m;
}

} // namespace

EvalMetrics evaluate_solutions(std::span<const ProblemInstance> instances, std::span<const Vector> xs,
                               std::span<const Vector> ss, std::span<const ReferenceSolution> refs)
{
    require_dims(xs.size() == instances.size() && ss.size() == instances.size() && refs.size() == instances.size(),
                 "evaluate_solutions: one solution and one reference per instance");
    EvalMetrics m = empty_metrics(instances, "given");
    for (std::size_t i = 0; i < instances.size(); ++i)
        m.instances.push_back(instance_metrics(instances[i], xs[i], ss[i], refs[i].f_star));
    return m;
}

EvalMetrics evaluate(const HuanetModel& model, std::span<const ProblemInstance> instances,
                     std::span<const ReferenceSolution> refs, int timing_reps)
{
    require_dims(refs.size() == instances.size(), "evaluate: one reference per instance");
    EvalMetrics m = empty_metrics(instances, "huanet");
    if (instances.empty()) return m;
    const auto op = make_affine_operator(instances.front().structure());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        InferResult r = infer(model, instances[i], *op);
        const double t = timing_reps > 0 ? median_time([&] { r = infer(model, instances[i], *op); }, timing_reps)
                                         : r.wall_time;
        InstanceMetrics im = instance_metrics(instances[i], r.x_hat, r.s_hat, refs[i].f_star);
        im.time = t;
        m.instances.push_back(im);
    }
    return m;
}

} // namespace huanet
