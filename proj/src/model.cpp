#include "huanet/model.hpp"

#include <chrono>
#include <string>

namespace huanet
{

std::string_view to_string(CorrectionMode m)
{
    switch (m) {
    case CorrectionMode::AffineProjection: return "affine_projection";
    case CorrectionMode::SimplexFeasibility: return "simplex_feasibility";
    }
    return "unknown";
}

CorrectionMode correction_mode_from_string(std::string_view s)
{
    if (s == "affine_projection") return CorrectionMode::AffineProjection;
    if (s == "simplex_feasibility") return CorrectionMode::SimplexFeasibility;
    throw FormatError("unknown correction mode '" + std::string(s) + "'");
}

CorrectionMode default_correction(ObjectiveKind kind)
{
    return kind == ObjectiveKind::NegEntropy ? CorrectionMode::SimplexFeasibility : CorrectionMode::AffineProjection;
}

void HuanetModel::validate() const
{
    if (n_train_layers < 1 || n_infer_layers < 1) throw DimensionError("layer counts must be >= 1");
    if (!(rho > 0)) throw DimensionError("rho must be positive");
    require_dims(primal.input_dim() == input_dim() && primal.output_dim() == n_x + n_in,
                 "primal network shape does not match the problem");
    require_dims(dual.input_dim() == input_dim() && dual.output_dim() == n_eq,
                 "dual network shape does not match the problem");
    if (primal.activation != dual.activation) throw DimensionError("networks disagree on activation");
}

HuanetModel make_model(const ProblemStructure& structure, Index n_lambda, const ModelConfig& config, Rng& rng)
{
    HuanetModel m;
    m.n_x = structure.n_x();
    m.n_eq = structure.n_eq();
    m.n_in = structure.n_in();
    m.n_lambda = n_lambda;
    m.rho = config.rho;
    m.n_train_layers = config.n_train_layers;
    m.n_infer_layers = config.n_infer_layers;
    m.mode = default_correction(structure.kind);
    if (m.mode == CorrectionMode::SimplexFeasibility) require_simplex_structure(structure);

    std::vector<Index> sizes{m.input_dim()};
    sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
    sizes.push_back(m.n_x + m.n_in);
    m.primal = init_mlp(sizes, config.activation, rng);
    sizes.back() = m.n_eq;
    m.dual = init_mlp(sizes, config.activation, rng);
    m.validate();
    return m;
}

HuanetModel make_model(const ProblemInstance& like, const ModelConfig& config, Rng& rng)
{
    return make_model(like.structure(), like.n_lambda(), config, rng);
}

namespace
{

void fill_batch(InstanceBatch& batch, const ProblemInstance& inst, Index j)
{
    const Index n_eq = inst.n_eq();
    if (batch.linear.rows() > 0) batch.linear.col(j) = inst.p();
    batch.d.col(j) = inst.d();
    batch.eta.col(j).head(n_eq) = inst.b();
    batch.eta.col(j).tail(inst.n_in()) = inst.d();
    batch.lambda.col(j) = inst.lambda();
}

InstanceBatch empty_batch(const ProblemInstance& first, Index S)
{
    InstanceBatch b;
    b.structure = first.structure_ptr();
    const auto& s = first.structure();
    b.linear.resize(s.kind == ObjectiveKind::Quadratic ? s.n_x() : 0, S);
    b.d.resize(s.n_in(), S);
    b.eta.resize(s.n_eq() + s.n_in(), S);
    b.lambda.resize(first.n_lambda(), S);
    return b;
}

void check_same_family(const InstanceBatch& b, const ProblemInstance& inst)
{
    if (inst.structure_ptr() != b.structure) throw DataError("batched instances must share one problem structure");
    require_dims(inst.n_lambda() == b.lambda.rows(), "batched instances disagree on n_lambda");
}

} // namespace

InstanceBatch InstanceBatch::from(std::span<const ProblemInstance> instances)
{
    if (instances.empty()) throw DimensionError("empty batch");
    InstanceBatch b = empty_batch(instances.front(), static_cast<Index>(instances.size()));
    for (std::size_t j = 0; j < instances.size(); ++j) {
        check_same_family(b, instances[j]);
        fill_batch(b, instances[j], static_cast<Index>(j));
    }
    return b;
}

InstanceBatch InstanceBatch::from(std::span<const ProblemInstance> instances, std::span<const std::size_t> indices)
{
    if (indices.empty()) throw DimensionError("empty batch");
    InstanceBatch b = empty_batch(instances[indices.front()], static_cast<Index>(indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j) {
        const auto& inst = instances[indices[j]];
        check_same_family(b, inst);
        fill_batch(b, inst, static_cast<Index>(j));
    }
    return b;
}

Matrix kkt_residual(const ProblemStructure& s, const Matrix& x_hat, const Matrix& s_hat, const Matrix& z_hat,
                    const Matrix& q, const Matrix& linear, Scalar rho)
{
    Matrix r = objective_gradients(s, x_hat, linear);
    if (s.n_eq() > 0) r.noalias() += s.A.transpose() * z_hat;
    if (s.n_in() > 0) r.noalias() += rho * (s.C.transpose() * (q - s_hat));
    return r;
}

Vector kkt_residual(const ProblemInstance& instance, const Vector& x_hat, const Vector& s_hat, const Vector& z_hat,
                    const Vector& q, Scalar rho)
{
    require_dims(x_hat.size() == instance.n_x() && s_hat.size() == instance.n_in() && z_hat.size() == instance.n_eq() &&
                     q.size() == instance.n_in(),
                 "kkt_residual: argument dimensions");
    const Matrix linear = instance.kind() == ObjectiveKind::Quadratic ? Matrix(instance.p()) : Matrix(0, 1);
    return kkt_residual(instance.structure(), x_hat, s_hat, z_hat, q, linear, rho);
}

Matrix network_input(const HuanetModel& model, const Matrix& q, const InstanceBatch& batch)
{
    Matrix in(model.input_dim(), batch.size());
    if (model.n_in > 0) in.topRows(model.n_in) = q;
    in.bottomRows(model.n_lambda) = batch.lambda;
    return in;
}

LayerTrace layer_from_outputs(const HuanetModel& model, const BatchState& state, const InstanceBatch& batch,
                              const AffineOperator& op, Matrix y_bar, Matrix z_hat)
{
    const auto& s = *batch.structure;
    const Index n_x = model.n_x, n_in = model.n_in;
    require_dims(y_bar.rows() == n_x + n_in && y_bar.cols() == batch.size(), "layer: primal output shape");

    LayerTrace t;
    t.q = state.q(model.rho);
    if (model.mode == CorrectionMode::AffineProjection) {
        const Matrix y_hat = project_affine(op, y_bar, batch.eta);
        t.x_hat = y_hat.topRows(n_x);
        t.s_hat = y_hat.bottomRows(n_in);
    } else {
        t.x_hat = simplex_map(y_bar.topRows(n_x));
        t.s_hat = batch.d - s.C * t.x_hat;
    }
    t.y_bar = std::move(y_bar);
    if (z_hat.size() > 0 || (model.n_eq == 0 && z_hat.cols() == batch.size())) {
        t.r = kkt_residual(s, t.x_hat, t.s_hat, z_hat, t.q, batch.linear, model.rho);
        t.z_hat = std::move(z_hat);
    }
    if (n_in > 0) {
        t.u = t.s_hat + state.v / model.rho;
        t.state_out.w = project_nonneg(t.u);
        t.state_out.v = state.v + model.rho * (t.s_hat - t.state_out.w);
    } else {
        t.state_out = BatchState::zeros(0, batch.size());
    }
    return t;
}

LayerTrace layer_forward(const HuanetModel& model, const BatchState& state, const InstanceBatch& batch,
                         const AffineOperator& op, LayerOptions options)
{
    require_dims(state.w.rows() == model.n_in && state.v.rows() == model.n_in && state.w.cols() == batch.size(),
                 "layer_forward: state shape");
    const Matrix q = state.q(model.rho);
    const Matrix in = network_input(model, q, batch);
    Matrix y_bar, z_hat;
    std::optional<Tape> tp, td;
    if (options.keep_tapes) {
        auto f = mlp_forward(model.primal, in);
        y_bar = std::move(f.output);
        tp = std::move(f.tape);
    } else {
        y_bar = mlp_apply(model.primal, in);
    }
    if (options.eval_dual) {
        if (options.keep_tapes) {
            auto f = mlp_forward(model.dual, in);
            z_hat = std::move(f.output);
            td = std::move(f.tape);
        } else {
            z_hat = mlp_apply(model.dual, in);
        }
    } else {
        z_hat.resize(0, 0);
    }
    LayerTrace t = layer_from_outputs(model, state, batch, op, std::move(y_bar), std::move(z_hat));
    t.tape_primal = std::move(tp);
    t.tape_dual = std::move(td);
    return t;
}

LayerTrace layer_forward(const HuanetModel& model, const AdmmState& state, const ProblemInstance& instance,
                         const AffineSystem& sys)
{
    const InstanceBatch batch = InstanceBatch::from(std::span(&instance, 1));
    return layer_forward(model, BatchState{state.w, state.v}, batch, *sys.op);
}

Trajectory forward_unrolled(const HuanetModel& model, const InstanceBatch& batch, const AffineOperator& op, int layers,
                            LayerOptions options)
{
    if (layers < 1) throw DimensionError("forward_unrolled needs layers >= 1");
    if (model.single_layer()) layers = 1;
    Trajectory traj;
    traj.initial = BatchState::zeros(model.n_in, batch.size());
    traj.layers.reserve(static_cast<std::size_t>(layers));
    const BatchState* state = &traj.initial;
    for (int k = 0; k < layers; ++k) {
        traj.layers.push_back(layer_forward(model, *state, batch, op, options));
        state = &traj.layers.back().state_out;
    }
    return traj;
}

Trajectory forward_unrolled(const HuanetModel& model, const ProblemInstance& instance, const AffineSystem& sys,
                            int layers)
{
    return forward_unrolled(model, InstanceBatch::from(std::span(&instance, 1)), *sys.op, layers);
}

BatchInferResult infer_batch(const HuanetModel& model, const InstanceBatch& batch, const AffineOperator& op, int layers)
{
    const LayerOptions opts{false, false};
    if (model.single_layer()) layers = 1;
    BatchState state = BatchState::zeros(model.n_in, batch.size());
    LayerTrace t;
    for (int k = 0; k < layers; ++k) {
        t = layer_forward(model, state, batch, op, opts);
        state = std::move(t.state_out);
    }
    return {std::move(t.x_hat), std::move(t.s_hat)};
}

InferResult infer(const HuanetModel& model, const ProblemInstance& instance, const AffineOperator& op)
{
    const auto start = std::chrono::steady_clock::now();
    const InstanceBatch batch = InstanceBatch::from(std::span(&instance, 1));
    auto r = infer_batch(model, batch, op, model.n_infer_layers);
    InferResult out;
    out.x_hat = r.x_hat.col(0);
    out.s_hat = r.s_hat.col(0);
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

HuanetGradients backward_unrolled(const HuanetModel& model, Trajectory& trajectory, const InstanceBatch& batch,
                                  const AffineOperator& op, const LossPartials& partials)
{
    const auto& s = *batch.structure;
    const Index n_x = model.n_x, n_in = model.n_in, S = batch.size();
    const Scalar rho = model.rho;
    const std::size_t N = trajectory.layers.size();
    if (N == 0) throw MissingTapeError("empty trajectory");
    if (partials.residual.size() != N) throw DimensionError("one residual partial per layer expected");

    HuanetGradients grads{model.primal.zeros_like(), model.dual.zeros_like()};
    Matrix w_bar = Matrix::Zero(n_in, S);
    Matrix v_bar = Matrix::Zero(n_in, S);

    for (std::size_t k = N; k-- > 0;) {
        LayerTrace& t = trajectory.layers[k];
        if (!t.tape_primal || !t.tape_dual) throw MissingTapeError("layer " + std::to_string(k) + " has no tape");
        const bool last = k + 1 == N;

        Matrix x_bar = last ? partials.terminal_x : Matrix::Zero(n_x, S);
        Matrix s_bar = last ? partials.terminal_s : Matrix::Zero(n_in, S);
        Matrix v_in_bar = v_bar;
        if (n_in > 0) {
            // v+ = v + rho (s - w+),  w+ = max(0, u),  u = s + v / rho
            s_bar += rho * v_bar;
            const Matrix w_plus_bar = w_bar - rho * v_bar;
            const Matrix u_bar = (t.u.array() > 0).select(w_plus_bar, 0.0);
            s_bar += u_bar;
            v_in_bar += u_bar / rho;
        }

        // r = grad f(x) + A'z + rho C'(q - s)
        const Matrix& r_bar = partials.residual[k];
        x_bar += hessian_apply(s, t.x_hat, r_bar);
        const Matrix z_bar = s.A * r_bar;
        Matrix q_bar = Matrix::Zero(n_in, S);
        if (n_in > 0) {
            const Matrix c_r = s.C * r_bar;
            q_bar += rho * c_r;
            s_bar -= rho * c_r;
        }

        Matrix y_bar_grad(n_x + n_in, S);
        if (model.mode == CorrectionMode::AffineProjection) {
            Matrix y_hat_grad(n_x + n_in, S);
            y_hat_grad << x_bar, s_bar;
            y_bar_grad = projection_jacobian_apply(op, y_hat_grad);
        } else {
            // s = d - C x
            if (n_in > 0) x_bar -= s.C.transpose() * s_bar;
            y_bar_grad.topRows(n_x) = simplex_map_vjp(t.y_bar.topRows(n_x), x_bar);
            y_bar_grad.bottomRows(n_in).setZero();
        }

        const Matrix in_bar_p = mlp_backward(model.primal, *t.tape_primal, y_bar_grad, grads.primal);
        const Matrix in_bar_d = mlp_backward(model.dual, *t.tape_dual, z_bar, grads.dual);
        if (n_in > 0) {
            q_bar += in_bar_p.topRows(n_in) + in_bar_d.topRows(n_in);
            // q = w - v / rho
            w_bar = q_bar;
            v_bar = v_in_bar - q_bar / rho;
        }
    }
    return grads;
}

} // namespace huanet
