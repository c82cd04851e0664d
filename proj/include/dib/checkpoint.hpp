#pragma once

#include <filesystem>
#include <iosfwd>

#include "dib/tensor.hpp"

namespace dib {

/// Flat checkpoint layout, all integers little-endian uint64:
///   "DIBCKPT1" | count | count x (path_len | path bytes | rank | shape[rank] | f64 payload)
/// Records appear in lexicographic path order.
void write_checkpoint(std::ostream& os, const ParamStore& store);
ParamStore read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& file, const ParamStore& store);
ParamStore load_checkpoint(const std::filesystem::path& file);

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dib
