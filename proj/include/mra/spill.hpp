#pragma once

#include <cstddef>
#include <string>

#include "mra/core.hpp"

namespace mra {

/// "{dir}/atilde_{region}.bin"
std::string spill_path(const std::string& directory, std::size_t region);

/// Layout: u64 levels, u64 block count, u64 (rows, cols) per block, u64 omega
/// count, u64 length per omega, then block data and omega data as raw f64.
void spill_store(const std::string& directory, std::size_t region, const AtildeSet& atilde);

/// Restores what spill_store wrote; deletes the file unless `keep_file`.
AtildeSet spill_load(const std::string& directory, std::size_t region, bool keep_file = false);

}  // namespace mra
