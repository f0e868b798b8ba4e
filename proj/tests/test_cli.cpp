#include "huanet/cli.hpp"
#include "huanet/checkpoint.hpp"
#include "huanet/dataset_io.hpp"
#include "huanet/metrics.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <sstream>

using namespace huanet;
namespace fs = std::filesystem;

namespace
{

struct Run
{
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir
{
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "huanet_cli_test") { fs::create_directories(path); }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

} // namespace

TEST_CASE("gen writes the requested dims and is idempotent")
{
    TempDir dir;
    auto r = cli({"--seed", "7", "gen", "--family", "qp", "--nx", "10", "--neq", "5", "--nin", "5", "--counts",
                  "20,5,5", "--out", dir / "a.ds"});
    REQUIRE(r.code == 0);
    r = cli({"--seed", "7", "gen", "--family", "qp", "--nx", "10", "--neq", "5", "--nin", "5", "--counts", "20,5,5",
             "--out", dir / "b.ds"});
    REQUIRE(r.code == 0);
    CHECK(read_text(dir / "a.ds") == read_text(dir / "b.ds"));
    const auto c = read_container(dir / "a.ds", dataset_magic, dataset_version);
    CHECK(c.get("nx") == "10");
    CHECK(c.get("neq") == "5");
    CHECK(c.get("nin") == "5");

    r = cli({"--seed", "1", "gen", "--family", "entropy", "--nx", "20", "--nin", "6", "--counts", "2,0,1", "--out",
             dir / "e.ds"});
    REQUIRE(r.code == 0);
    const auto e = load_dataset(dir / "e.ds");
    CHECK(e.dims.n_eq == 1);
    CHECK(e.dims.n_in == 6);
}

TEST_CASE("exit codes")
{
    TempDir dir;
    CHECK(cli({}).code == exit_usage);
    CHECK(cli({"frobnicate"}).code == exit_usage);
    CHECK(cli({"gen", "--family", "qp"}).code == exit_usage);
    CHECK(cli({"gen", "--family", "nope", "--nx", "3", "--out", dir / "x"}).code == exit_data);
    CHECK(cli({"gen", "--family", "qp", "--nx", "3", "--neq", "4", "--out", dir / "x"}).code == exit_data);
    CHECK(cli({"eval", "--dataset", dir / "missing.ds", "--checkpoint", dir / "missing.ckpt"}).code == exit_data);
    CHECK(cli({"--help"}).code == exit_ok);

    REQUIRE(cli({"gen", "--family", "qp", "--nx", "4", "--neq", "1", "--nin", "2", "--counts", "4,1,2", "--out",
                 dir / "q.ds"})
                .code == 0);
    CHECK(cli({"bench", "--dataset", dir / "q.ds", "--methods", "huanet"}).code == exit_data);
    CHECK(cli({"bench", "--dataset", dir / "q.ds", "--reps", "2"}).code == exit_usage);
    write_text(dir / "bad.json", R"({"rho": 0})");
    CHECK(cli({"--config", dir / "bad.json", "train", "--dataset", dir / "q.ds", "--out", dir / "m.ckpt"}).code ==
          exit_data);
}

TEST_CASE("gen, train, eval, bench, solve, sweep")
{
    TempDir dir;
    REQUIRE(cli({"--seed", "3", "gen", "--family", "qp", "--nx", "4", "--neq", "2", "--nin", "2", "--counts",
                 "32,8,8", "--out", dir / "q.ds"})
                .code == 0);
    write_text(dir / "cfg.json", R"({"hidden": [8], "epochs": 3, "batch_size": 8, "N": 4, "K": 6})");
    auto r = cli({"--seed", "5", "--deterministic", "--config", dir / "cfg.json", "train", "--dataset", dir / "q.ds",
                  "--out", dir / "m.ckpt"});
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string first;
    std::getline(lines, first);
    const auto rec = nlohmann::json::parse(first);
    CHECK(rec.at("epoch") == 1);
    CHECK(rec.contains("loss"));
    CHECK(rec.contains("val_score"));

    CheckpointInfo info;
    const HuanetModel m = load_checkpoint(dir / "m.ckpt", &info);
    CHECK(m.n_infer_layers == 6);
    CHECK(info.init_seed == 5);

    r = cli({"--deterministic", "eval", "--dataset", dir / "q.ds", "--checkpoint", dir / "m.ckpt", "--out",
             dir / "m.json"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind(metrics_csv_header, 0) == 0);
    const auto metrics = metrics_from_json(read_text(dir / "m.json"));
    CHECK(metrics.instances.size() == 8);
    CHECK(metrics.eq_max() <= 1e-10);
    CHECK(read_text(dir / "m.json").find("time") == std::string::npos);

    r = cli({"bench", "--dataset", dir / "q.ds", "--checkpoint", dir / "m.ckpt", "--csv", dir / "t.csv", "--timing",
             dir / "long.csv"});
    REQUIRE(r.code == 0);
    const std::string table = read_text(dir / "t.csv");
    CHECK(table.find(",huanet,") != std::string::npos);
    CHECK(table.find(",admm_reference,") != std::string::npos);
    CHECK(read_text(dir / "long.csv").rfind("problem,nx,neq,nin,method,instance,time", 0) == 0);

    r = cli({"solve", "--dataset", dir / "q.ds", "--index", "3", "--method", "reference"});
    REQUIRE(r.code == 0);
    const auto sol = nlohmann::json::parse(r.out);
    CHECK(sol.at("x").size() == 4);
    CHECK(cli({"solve", "--dataset", dir / "q.ds", "--index", "99"}).code == exit_data);
    CHECK(cli({"solve", "--dataset", dir / "q.ds", "--method", "huanet", "--checkpoint", dir / "m.ckpt"}).code == 0);

    r = cli({"--seed", "5", "--config", dir / "cfg.json", "sweep", "--dataset", dir / "q.ds", "--rho", "1",
             "--gamma-s", "10", "--gamma-r", "1", "--out", dir / "sweep.json"});
    REQUIRE(r.code == 0);
    const auto sw = nlohmann::json::parse(read_text(dir / "sweep.json"));
    CHECK(sw.at("cells").size() == 1);
    CHECK(sw.at("abs_gap_min") == sw.at("abs_gap_max"));
    // A one-cell grid trains the same model as `train` with the same config and seed.
    CHECK(sw.at("cells")[0].at("gap_mean").get<double>() == doctest::Approx(metrics.gap_mean()).epsilon(1e-12));
}
