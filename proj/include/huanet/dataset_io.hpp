#ifndef HUANET_DATASET_IO_HPP
#define HUANET_DATASET_IO_HPP

#include "huanet/container.hpp"
#include "huanet/generators.hpp"

#include <filesystem>

namespace huanet
{

inline constexpr const char* dataset_magic = "HUANET-DATASET";
inline constexpr int dataset_version = 1;

Container dataset_to_container(const Dataset& ds);
Dataset dataset_from_container(const Container& c);

void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

} // namespace huanet

#endif // HUANET_DATASET_IO_HPP
