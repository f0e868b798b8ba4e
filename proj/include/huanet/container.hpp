#ifndef HUANET_CONTAINER_HPP
#define HUANET_CONTAINER_HPP

#include "huanet/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace huanet
{

/// Named-tensor container shared by dataset and checkpoint files.
///
/// Layout (see docs/formats.md):
///   <magic>\n
///   version <int>\n
///   meta <key> <value>\n           (zero or more; value is the rest of the line)
///   tensor <name> <rows> <cols>\n  (zero or more, in payload order)
///   end_header\n
///   payload: each tensor as rows*cols little-endian IEEE-754 float64, row-major
struct Container
{
    std::string magic;
    int version = 1;
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::pair<std::string, Matrix>> tensors;

    void set(const std::string& key, const std::string& value);
    std::optional<std::string> find(const std::string& key) const;
    /// Throws FormatError when the key is absent.
    const std::string& get(const std::string& key) const;

    void add_tensor(const std::string& name, Matrix m);
    const Matrix& tensor(const std::string& name) const;
    bool has_tensor(const std::string& name) const;
};

void write_container(const std::filesystem::path& path, const Container& c);
/// Throws FormatError on a malformed file or wrong magic, VersionError when
/// the version is newer than `max_version`.
Container read_container(const std::filesystem::path& path, const std::string& magic, int max_version);

std::string encode_container(const Container& c);
Container decode_container(const std::string& bytes, const std::string& magic, int max_version);

} // namespace huanet

#endif // HUANET_CONTAINER_HPP
