#include "huanet/container.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace huanet
{

void Container::set(const std::string& key, const std::string& value)
{
    if (key.empty() || key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos)
        throw FormatError("invalid metadata entry '" + key + "'");
    for (auto& [k, v] : meta)
        if (k == key) {
            v = value;
            return;
        }
    meta.emplace_back(key, value);
}

std::optional<std::string> Container::find(const std::string& key) const
{
    for (const auto& [k, v] : meta)
        if (k == key) return v;
    return std::nullopt;
}

const std::string& Container::get(const std::string& key) const
{
    for (const auto& [k, v] : meta)
        if (k == key) return v;
    throw FormatError("missing metadata key '" + key + "'");
}

void Container::add_tensor(const std::string& name, Matrix m)
{
    if (name.empty() || name.find_first_of(" \n") != std::string::npos)
        throw FormatError("invalid tensor name '" + name + "'");
    tensors.emplace_back(name, std::move(m));
}

const Matrix& Container::tensor(const std::string& name) const
{
    for (const auto& [n, m] : tensors)
        if (n == name) return m;
    throw FormatError("missing tensor '" + name + "'");
}

bool Container::has_tensor(const std::string& name) const
{
    for (const auto& [n, m] : tensors)
        if (n == name) return true;
    return false;
}

namespace
{

void put_f64(std::string& out, double v)
{
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.append(buf, 8);
}

double get_f64(const char* p)
{
    std::uint64_t bits;
    std::memcpy(&bits, p, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    return std::bit_cast<double>(bits);
}

} // namespace

std::string encode_container(const Container& c)
{
    std::ostringstream head;
    head << c.magic << '\n' << "version " << c.version << '\n';
    for (const auto& [k, v] : c.meta) head << "meta " << k << ' ' << v << '\n';
    for (const auto& [n, m] : c.tensors) head << "tensor " << n << ' ' << m.rows() << ' ' << m.cols() << '\n';
    head << "end_header\n";
    std::string out = head.str();
    for (const auto& [n, m] : c.tensors)
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
    return out;
}

Container decode_container(const std::string& bytes, const std::string& magic, int max_version)
{
    Container c;
    std::size_t pos = 0;
    auto next_line = [&]() -> std::string {
        const auto nl = bytes.find('\n', pos);
        if (nl == std::string::npos) throw FormatError("truncated header");
        std::string line = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        return line;
    };

    c.magic = next_line();
    if (c.magic != magic) throw FormatError("bad magic: expected '" + magic + "', found '" + c.magic + "'");
    {
        std::istringstream ls(next_line());
        std::string word;
        if (!(ls >> word >> c.version) || word != "version") throw FormatError("missing version line");
        if (c.version > max_version || c.version < 1)
            throw VersionError("unsupported version " + std::to_string(c.version));
    }
    std::vector<std::tuple<std::string, Index, Index>> decl;
    for (;;) {
        const std::string line = next_line();
        if (line == "end_header") break;
        if (line.rfind("meta ", 0) == 0) {
            const auto sp = line.find(' ', 5);
            if (sp == std::string::npos) c.meta.emplace_back(line.substr(5), "");
            else c.meta.emplace_back(line.substr(5, sp - 5), line.substr(sp + 1));
        } else if (line.rfind("tensor ", 0) == 0) {
            std::istringstream ls(line.substr(7));
            std::string name;
            long long rows = -1, cols = -1;
            if (!(ls >> name >> rows >> cols) || rows < 0 || cols < 0) throw FormatError("bad tensor line: " + line);
            decl.emplace_back(name, rows, cols);
        } else {
            throw FormatError("unexpected header line: " + line);
        }
    }
    for (const auto& [name, rows, cols] : decl) {
        const std::size_t need = static_cast<std::size_t>(rows * cols) * 8;
        if (pos + need > bytes.size()) throw FormatError("truncated payload for tensor '" + name + "'");
        Matrix m(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) {
                m(i, j) = get_f64(bytes.data() + pos);
                pos += 8;
            }
        c.tensors.emplace_back(name, std::move(m));
    }
    if (pos != bytes.size()) throw FormatError("trailing bytes after payload");
    return c;
}

void write_container(const std::filesystem::path& path, const Container& c)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    const std::string bytes = encode_container(c);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Container read_container(const std::filesystem::path& path, const std::string& magic, int max_version)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_container(ss.str(), magic, max_version);
}

} // namespace huanet
