#include "huanet/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace huanet
{

namespace
{

long long parse_int(const std::string& s, const char* what)
{
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw FormatError(std::string("bad integer for ") + what + ": '" + s + "'");
    return v;
}

std::string format_double(Scalar x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

Scalar parse_double(const std::string& s, const char* what)
{
    std::istringstream in(s);
    in.imbue(std::locale::classic());
    Scalar v = 0;
    if (!(in >> v) || !in.eof()) throw FormatError(std::string("bad number for ") + what + ": '" + s + "'");
    return v;
}

std::string join_sizes(const std::vector<Index>& sizes)
{
    std::string out;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(sizes[i]);
    }
    return out;
}

std::vector<Index> split_sizes(const std::string& s)
{
    std::vector<Index> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto end = comma == std::string::npos ? s.size() : comma;
        out.push_back(parse_int(s.substr(start, end - start), "layer size"));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

void put_net(Container& c, const std::string& prefix, const MlpParams& p)
{
    c.set(prefix + "_layers", join_sizes(p.layer_sizes()));
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        c.add_tensor(prefix + ".W" + std::to_string(l), p.weights[l]);
        c.add_tensor(prefix + ".b" + std::to_string(l), p.biases[l]);
    }
}

MlpParams get_net(const Container& c, const std::string& prefix, Activation act)
{
    const auto sizes = split_sizes(c.get(prefix + "_layers"));
    if (sizes.size() < 2) throw FormatError(prefix + ": need at least two layer sizes");
    MlpParams p;
    p.activation = act;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const auto wname = prefix + ".W" + std::to_string(l);
        const auto bname = prefix + ".b" + std::to_string(l);
        if (!c.has_tensor(wname) || !c.has_tensor(bname)) throw FormatError("missing tensor " + wname);
        const Matrix& W = c.tensor(wname);
        const Matrix& b = c.tensor(bname);
        if (W.rows() != sizes[l + 1] || W.cols() != sizes[l] || b.rows() != sizes[l + 1] || b.cols() != 1)
            throw VersionError("tensor " + wname + " does not match the declared layer sizes");
        p.weights.push_back(W);
        p.biases.push_back(b.col(0));
    }
    return p;
}

} // namespace

std::string fnv1a_hex(std::string_view text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Container checkpoint_to_container(const HuanetModel& model, const CheckpointInfo& info)
{
    model.validate();
    Container c;
    c.magic = checkpoint_magic;
    c.version = checkpoint_version;
    c.set("nx", std::to_string(model.n_x));
    c.set("neq", std::to_string(model.n_eq));
    c.set("nin", std::to_string(model.n_in));
    c.set("n_lambda", std::to_string(model.n_lambda));
    c.set("rho", format_double(model.rho));
    c.set("train_layers", std::to_string(model.n_train_layers));
    c.set("infer_layers", std::to_string(model.n_infer_layers));
    c.set("correction", std::string(to_string(model.mode)));
    c.set("activation", std::string(to_string(model.primal.activation)));
    c.set("initial_state", "zero");
    c.set("dual_at_inference", "skipped");
    if (model.mode == CorrectionMode::SimplexFeasibility) {
        c.set("simplex_map", "floor_plus_scaled_softplus");
        c.set("simplex_floor", format_double(CorrectionTolerances::simplex_floor));
    }
    c.set("init_seed", std::to_string(info.init_seed));
    c.set("data_seed", std::to_string(info.data_seed));
    c.set("config_hash", info.config_hash.empty() ? "none" : info.config_hash);
    if (!info.family.empty()) c.set("family", info.family);
    put_net(c, "primal", model.primal);
    put_net(c, "dual", model.dual);
    return c;
}

HuanetModel checkpoint_from_container(const Container& c, CheckpointInfo* info)
{
    HuanetModel m;
    m.n_x = parse_int(c.get("nx"), "nx");
    m.n_eq = parse_int(c.get("neq"), "neq");
    m.n_in = parse_int(c.get("nin"), "nin");
    m.n_lambda = parse_int(c.get("n_lambda"), "n_lambda");
    m.rho = parse_double(c.get("rho"), "rho");
    m.n_train_layers = static_cast<int>(parse_int(c.get("train_layers"), "train_layers"));
    m.n_infer_layers = static_cast<int>(parse_int(c.get("infer_layers"), "infer_layers"));
    m.mode = correction_mode_from_string(c.get("correction"));
    const Activation act = activation_from_string(c.get("activation"));
    m.primal = get_net(c, "primal", act);
    m.dual = get_net(c, "dual", act);
    try {
        m.validate();
    } catch (const DimensionError& e) {
        throw VersionError(std::string("checkpoint dims disagree with its tensors: ") + e.what());
    }
    if (info) {
        info->init_seed = std::stoull(c.get("init_seed"));
        info->data_seed = std::stoull(c.get("data_seed"));
        info->config_hash = c.get("config_hash");
        info->family = c.find("family").value_or("");
    }
    return m;
}

void save_checkpoint(const std::filesystem::path& path, const HuanetModel& model, const CheckpointInfo& info)
{
    write_container(path, checkpoint_to_container(model, info));
}

HuanetModel load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info)
{
    return checkpoint_from_container(read_container(path, checkpoint_magic, checkpoint_version), info);
}

} // namespace huanet
