#include "huanet/cli.hpp"

#include "huanet/checkpoint.hpp"
#include "huanet/dataset_io.hpp"
#include "huanet/training.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

namespace huanet
{

namespace
{

struct GlobalOptions
{
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
    int threads = 1;
    std::string config;
};

std::vector<Scalar> parse_list(const std::string& s)
{
    std::vector<Scalar> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw CLI::ValidationError("bad number in list: '" + item + "'");
        }
    }
    if (out.empty()) throw CLI::ValidationError("empty list");
    return out;
}

SplitCounts parse_counts(const std::string& s)
{
    const auto v = parse_list(s);
    if (v.size() != 3) throw CLI::ValidationError("--counts expects train,val,test");
    for (Scalar x : v)
        if (x < 0 || x != std::floor(x)) throw CLI::ValidationError("--counts entries must be non-negative integers");
    return {static_cast<Index>(v[0]), static_cast<Index>(v[1]), static_cast<Index>(v[2])};
}

std::span<const ProblemInstance> pick_split(const Dataset& ds, const std::string& split)
{
    if (split == "train") return ds.train();
    if (split == "val") return ds.val();
    if (split == "test") return ds.test();
    throw CLI::ValidationError("--split must be train, val or test");
}

TrainConfig load_train_config(const GlobalOptions& g)
{
    TrainConfig cfg;
    if (!g.config.empty()) cfg = train_config_from_json(read_text(g.config));
    if (g.seed) {
        cfg.init_seed = *g.seed;
        cfg.shuffle_seed = mix_seed(*g.seed);
    }
    if (g.deterministic) cfg.max_seconds = 0;
    return cfg;
}

HuanetModel require_checkpoint(const std::string& path, const Dataset& ds)
{
    if (path.empty()) throw DataError("a checkpoint is required (--checkpoint)");
    if (!std::filesystem::exists(path)) throw DataError("checkpoint not found: " + path);
    HuanetModel m = load_checkpoint(path);
    const auto& s = ds.instances.front().structure();
    require_dims(m.n_x == s.n_x() && m.n_eq == s.n_eq() && m.n_in == s.n_in() &&
                     m.n_lambda == ds.instances.front().n_lambda(),
                 "checkpoint dims do not match the dataset");
    return m;
}

void label(EvalMetrics& m, const Dataset& ds, const std::string& method)
{
    m.problem = std::string(to_string(ds.family));
    m.dims = ds.dims;
    m.method = method;
}

std::string json_lines_record(const EpochRecord& r)
{
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["loss"] = r.loss;
    j["objective"] = r.objective;
    j["residual"] = r.residual;
    if (r.val_score) {
        j["val_score"] = *r.val_score;
        j["val_objective"] = r.val_objective;
        j["val_ineq"] = r.val_ineq;
    }
    j["time"] = r.wall_time;
    return j.dump();
}

EvalMetrics run_admm(std::span<const ProblemInstance> instances, std::span<const ReferenceSolution> refs,
                     const AdmmOptions& opts, int reps)
{
    EvalMetrics m;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        AdmmSolveReport r = admm_solve(instances[i], opts);
        const double t = reps > 0 ? median_time([&] { r = admm_solve(instances[i], opts); }, reps) : r.wall_time;
        InstanceMetrics im = instance_metrics(instances[i], r.x_star, r.s_star, refs[i].f_star);
        im.time = t;
        im.converged = r.converged;
        m.instances.push_back(im);
    }
    return m;
}

/// Loosest ADMM tolerance in 1e-1 ... 1e-8 whose mean |gap| does not exceed `target`.
Scalar match_admm_tolerance(std::span<const ProblemInstance> instances, std::span<const ReferenceSolution> refs,
                            AdmmOptions opts, Scalar target)
{
    for (int e = 1; e <= 8; ++e) {
        opts.tol = std::pow(10.0, -e);
        if (run_admm(instances, refs, opts, 0).abs_gap_mean() <= target) return opts.tol;
    }
    return opts.tol;
}

int cmd_gen(const GlobalOptions& g, const std::string& family, FamilyDims dims, const std::string& counts,
            std::optional<std::uint64_t> family_seed, const std::string& out_path, std::ostream& out)
{
    const FamilyKind kind = family_kind_from_string(family);
    if (kind == FamilyKind::Entropy) {
        if (dims.n_eq != 0 && dims.n_eq != 1) throw DimensionError("the entropy family has exactly one equality");
        dims.n_eq = 1;
    }
    const std::uint64_t seed = g.seed.value_or(0);
    const ProblemFamily fam = make_family(kind, dims, family_seed.value_or(seed));
    const Dataset ds = sample_dataset(fam, parse_counts(counts), seed);
    save_dataset(out_path, ds);
    out << "wrote " << ds.instances.size() << " instances (" << family << ", nx=" << ds.dims.n_x
        << ", neq=" << ds.dims.n_eq << ", nin=" << ds.dims.n_in << ") to " << out_path << '\n';
    return exit_ok;
}

int cmd_train(const GlobalOptions& g, const std::string& dataset, const std::string& out_path,
              const std::string& log_path, std::ostream& out)
{
    const TrainConfig cfg = load_train_config(g);
    const Dataset ds = load_dataset(dataset);
    Rng init(cfg.init_seed);
    HuanetModel model = make_model(ds.instances.front(), cfg.model_config(), init);

    std::ofstream log_file;
    if (!log_path.empty()) {
        log_file.open(log_path);
        if (!log_file) throw DataError("cannot open " + log_path);
    }
    std::ostream& log = log_path.empty() ? out : log_file;
    const auto hist = train(model, ds.train(), ds.val(), cfg, [&](const EpochRecord& r) {
        log << json_lines_record(r) << '\n';
        log.flush();
    });
    CheckpointInfo info{cfg.init_seed, ds.seed, fnv1a_hex(train_config_to_json(cfg)), std::string(to_string(ds.family))};
    save_checkpoint(out_path, model, info);
    out << "trained " << hist.epochs.size() << " epochs (" << hist.steps << " steps, best epoch " << hist.best_epoch
        << ", " << std::fixed << std::setprecision(1) << hist.wall_time << " s); checkpoint " << out_path << '\n';
    return exit_ok;
}

int cmd_eval(const GlobalOptions& g, const std::string& dataset, const std::string& checkpoint,
             const std::string& split, const std::string& json_path, int reps, std::ostream& out)
{
    const Dataset ds = load_dataset(dataset);
    const HuanetModel model = require_checkpoint(checkpoint, ds);
    const auto instances = pick_split(ds, split);
    const auto refs = compute_references(instances);
    EvalMetrics m = evaluate(model, instances, refs, g.deterministic ? 0 : reps);
    label(m, ds, "huanet");
    out << metrics_csv({m});
    if (!json_path.empty())
        write_text(json_path, metrics_json(m, !g.deterministic, "median of " + std::to_string(reps) +
                                                                    " runs after one warm-up, single thread"));
    return exit_ok;
}

int cmd_bench(const GlobalOptions& g, const std::string& dataset, const std::string& checkpoint,
              const std::string& methods, const std::string& csv_path, const std::string& timing_path, int reps,
              const std::string& admm_tol, int admm_max_iter, Scalar admm_rho, std::ostream& out)
{
    (void)g;
    if (reps < 3) throw CLI::ValidationError("--reps must be >= 3");
    const Dataset ds = load_dataset(dataset);
    const auto instances = ds.test();
    const auto refs = compute_references(instances);

    bool want_huanet = false, want_admm = false;
    std::stringstream in(methods);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item == "huanet") want_huanet = true;
        else if (item == "admm" || item == "admm_reference") want_admm = true;
        else throw CLI::ValidationError("unknown method '" + item + "'");
    }

    std::vector<EvalMetrics> rows;
    std::optional<Scalar> huanet_gap;
    if (want_huanet) {
        const HuanetModel model = require_checkpoint(checkpoint, ds);
        EvalMetrics m = evaluate(model, instances, refs, reps);
        label(m, ds, "huanet");
        huanet_gap = m.abs_gap_mean();
        rows.push_back(std::move(m));
    }
    if (want_admm) {
        AdmmOptions opts;
        opts.rho = admm_rho;
        opts.max_iter = admm_max_iter;
        if (admm_tol == "auto") {
            opts.tol = huanet_gap ? match_admm_tolerance(instances, refs, opts, *huanet_gap) : 1e-6;
        } else {
            opts.tol = parse_list(admm_tol).front();
        }
        EvalMetrics m = run_admm(instances, refs, opts, reps);
        label(m, ds, "admm_reference");
        out << "admm_reference: tol " << opts.tol << ", max_iter " << opts.max_iter << ", converged fraction "
            << m.converged_fraction() << '\n';
        rows.push_back(std::move(m));
    }
    const std::string table = metrics_csv(rows);
    out << table;
    if (!csv_path.empty()) write_text(csv_path, table);
    if (!timing_path.empty()) write_text(timing_path, timing_csv(rows));
    return exit_ok;
}

int cmd_solve(const std::string& dataset, Index index, const std::string& method, const std::string& checkpoint,
              Scalar tol, int max_iter, std::ostream& out)
{
    const Dataset ds = load_dataset(dataset);
    if (index < 0 || index >= static_cast<Index>(ds.instances.size()))
        throw DimensionError("--index out of range");
    const ProblemInstance& inst = ds.instances[static_cast<std::size_t>(index)];
    nlohmann::ordered_json j;
    j["method"] = method;
    Vector x, s;
    if (method == "admm") {
        const auto r = admm_solve(inst, AdmmOptions{1.0, tol, max_iter, false});
        x = r.x_star;
        s = r.s_star;
        j["iterations"] = r.iterations;
        j["converged"] = r.converged;
    } else if (method == "reference") {
        const auto r = reference_optimum(inst);
        x = r.x_star;
        s = r.s_star;
        j["iterations"] = r.iterations;
        j["kkt_worst"] = r.certificate.worst();
    } else if (method == "huanet") {
        const HuanetModel model = require_checkpoint(checkpoint, ds);
        const auto r = infer(model, inst, *make_affine_operator(inst.structure()));
        x = r.x_hat;
        s = r.s_hat;
        j["layers"] = model.n_infer_layers;
    } else {
        throw CLI::ValidationError("--method must be admm, reference or huanet");
    }
    j["objective"] = objective_value(inst, x);
    j["x"] = std::vector<Scalar>(x.data(), x.data() + x.size());
    j["s"] = std::vector<Scalar>(s.data(), s.data() + s.size());
    out << j.dump(2) << '\n';
    return exit_ok;
}

int cmd_sweep(const GlobalOptions& g, const std::string& dataset, const std::string& rhos, const std::string& gss,
              const std::string& grs, const std::string& json_path, std::ostream& out)
{
    const TrainConfig base = load_train_config(g);
    const Dataset ds = load_dataset(dataset);
    const auto refs = compute_references(ds.test());

    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    std::vector<Scalar> gaps;
    for (Scalar rho : parse_list(rhos)) {
        for (Scalar gs : parse_list(gss)) {
            for (Scalar gr : parse_list(grs)) {
                TrainConfig cfg = base;
                cfg.rho = rho;
                cfg.gamma_s = gs;
                cfg.gamma_r = gr;
                Rng init(cfg.init_seed);
                HuanetModel model = make_model(ds.instances.front(), cfg.model_config(), init);
                train(model, ds.train(), ds.val(), cfg);
                const EvalMetrics m = evaluate(model, ds.test(), refs, 0);
                gaps.push_back(m.abs_gap_mean());
                cells.push_back({{"rho", rho},
                                 {"gamma_s", gs},
                                 {"gamma_r", gr},
                                 {"gap_mean", m.gap_mean()},
                                 {"abs_gap_mean", m.abs_gap_mean()},
                                 {"ineq_mean", m.ineq_mean()},
                                 {"eq_max", m.eq_max()}});
                out << "rho=" << rho << " gamma_s=" << gs << " gamma_r=" << gr << " |gap|=" << m.abs_gap_mean()
                    << " ineq=" << m.ineq_mean() << '\n';
            }
        }
    }
    nlohmann::ordered_json j;
    j["problem"] = std::string(to_string(ds.family));
    j["cells"] = cells;
    j["abs_gap_min"] = *std::min_element(gaps.begin(), gaps.end());
    j["abs_gap_median"] = median(std::vector<double>(gaps.begin(), gaps.end()));
    j["abs_gap_max"] = *std::max_element(gaps.begin(), gaps.end());
    if (!json_path.empty()) write_text(json_path, j.dump(2) + "\n");
    out << "abs gap min/median/max: " << j["abs_gap_min"] << " / " << j["abs_gap_median"] << " / "
        << j["abs_gap_max"] << '\n';
    return exit_ok;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"HUANet: unrolled ADMM networks for parametric convex programs"};
    app.require_subcommand(1);
    GlobalOptions g;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Random seed");
    app.add_flag("--deterministic", g.deterministic, "Reproducible mode: no time limits, no timing in JSON");
    app.add_option("--threads", g.threads, "Worker threads (computation is single-threaded)")->check(CLI::Range(1, 1024));
    app.add_option("--config", g.config, "Training config (flat JSON object)");

    std::string family, counts = "16000,2000,2000", out_path, dataset, checkpoint, split = "test", json_path,
                        log_path, methods = "huanet,admm", csv_path, timing_path, admm_tol = "auto",
                        method = "admm", rhos = "1", gss = "10", grs = "1";
    FamilyDims dims;
    std::uint64_t family_seed = 0;
    int reps = 3, admm_max_iter = 100, max_iter = 100;
    Scalar admm_rho = 1.0, tol = 1e-6;
    Index index = 0;

    auto* gen = app.add_subcommand("gen", "Generate a dataset");
    gen->add_option("--family", family, "lasso, qp or entropy")->required();
    gen->add_option("--nx", dims.n_x, "Decision size")->required()->check(CLI::PositiveNumber);
    gen->add_option("--neq", dims.n_eq, "Equality constraints")->check(CLI::NonNegativeNumber);
    gen->add_option("--nin", dims.n_in, "Inequality constraints")->check(CLI::NonNegativeNumber);
    gen->add_option("--counts", counts, "train,val,test");
    auto* fseed_opt = gen->add_option("--family-seed", family_seed, "Seed of the fixed family data (default --seed)");
    gen->add_option("--out", out_path, "Output dataset")->required();

    auto* trn = app.add_subcommand("train", "Train a model");
    trn->add_option("--dataset", dataset)->required();
    trn->add_option("--out", out_path, "Output checkpoint")->required();
    trn->add_option("--log", log_path, "Line-delimited JSON training log (default stdout)");

    auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint");
    evl->add_option("--dataset", dataset)->required();
    evl->add_option("--checkpoint", checkpoint)->required();
    evl->add_option("--split", split);
    evl->add_option("--out", json_path, "Metrics JSON");
    evl->add_option("--reps", reps)->check(CLI::PositiveNumber);

    auto* bench = app.add_subcommand("bench", "Benchmark HUANet against ADMM");
    bench->add_option("--dataset", dataset)->required();
    bench->add_option("--checkpoint", checkpoint);
    bench->add_option("--methods", methods, "Comma list of huanet, admm");
    bench->add_option("--csv", csv_path, "Table CSV");
    bench->add_option("--timing", timing_path, "Per-instance timing CSV");
    bench->add_option("--reps", reps, "Timed repetitions per instance (>= 3)");
    bench->add_option("--admm-tol", admm_tol, "ADMM tolerance or 'auto' (match HUANet's mean gap)");
    bench->add_option("--admm-max-iter", admm_max_iter)->check(CLI::PositiveNumber);
    bench->add_option("--admm-rho", admm_rho)->check(CLI::PositiveNumber);

    auto* solve = app.add_subcommand("solve", "Solve one dataset instance");
    solve->add_option("--dataset", dataset)->required();
    solve->add_option("--index", index)->check(CLI::NonNegativeNumber);
    solve->add_option("--method", method, "admm, reference or huanet");
    solve->add_option("--checkpoint", checkpoint);
    solve->add_option("--tol", tol)->check(CLI::PositiveNumber);
    solve->add_option("--max-iter", max_iter)->check(CLI::PositiveNumber);

    auto* sweep = app.add_subcommand("sweep", "Hyperparameter sensitivity grid");
    sweep->add_option("--dataset", dataset)->required();
    sweep->add_option("--rho", rhos, "Comma list");
    sweep->add_option("--gamma-s", gss, "Comma list");
    sweep->add_option("--gamma-r", grs, "Comma list");
    sweep->add_option("--out", json_path, "Report JSON");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }
    if (*seed_opt) g.seed = seed;

    try {
        if (*gen)
            return cmd_gen(g, family, dims, counts, *fseed_opt ? std::optional(family_seed) : std::nullopt, out_path,
                           out);
        if (*trn) return cmd_train(g, dataset, out_path, log_path, out);
        if (*evl) return cmd_eval(g, dataset, checkpoint, split, json_path, reps, out);
        if (*bench)
            return cmd_bench(g, dataset, checkpoint, methods, csv_path, timing_path, reps, admm_tol, admm_max_iter,
                             admm_rho, out);
        if (*solve) return cmd_solve(dataset, index, method, checkpoint, tol, max_iter, out);
        if (*sweep) return cmd_sweep(g, dataset, rhos, gss, grs, json_path, out);
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_internal;
    }
    return exit_usage;
}

} // namespace huanet
