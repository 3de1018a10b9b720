#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mvda {

std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64_file(const std::string& path);
std::string hex64(std::uint64_t v);

std::vector<std::uint8_t> read_file(const std::string& path);

}  // namespace mvda
