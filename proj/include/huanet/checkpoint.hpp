#ifndef HUANET_CHECKPOINT_HPP
#define HUANET_CHECKPOINT_HPP

#include "huanet/container.hpp"
#include "huanet/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace huanet
{

inline constexpr const char* checkpoint_magic = "HUANET-CHECKPOINT";
inline constexpr int checkpoint_version = 1;

/// Provenance stored next to the parameters.
struct CheckpointInfo
{
    std::uint64_t init_seed = 0;
    std::uint64_t data_seed = 0;
    std::string config_hash; // 16 hex digits, FNV-1a of the training config text
    std::string family;      // problem family the model was trained on, may be empty
};

Container checkpoint_to_container(const HuanetModel& model, const CheckpointInfo& info = {});
/// Throws FormatError on missing fields and VersionError when the declared
/// dims disagree with the stored tensors.
HuanetModel checkpoint_from_container(const Container& c, CheckpointInfo* info = nullptr);

void save_checkpoint(const std::filesystem::path& path, const HuanetModel& model, const CheckpointInfo& info = {});
HuanetModel load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);

} // namespace huanet

#endif // HUANET_CHECKPOINT_HPP
