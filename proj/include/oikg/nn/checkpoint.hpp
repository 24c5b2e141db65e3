#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "oikg/nn/params.hpp"

namespace oikg::nn {

// Binary layout: "OIKG0001", u32 block count, then per block
//   u32 name length, name bytes, u32 rank, u64 dims[rank], f64 values[numel]
// with every integer and float little-endian.

std::string encode_checkpoint(const ParamStore& store);
std::map<std::string, Tensor> decode_checkpoint(const std::string& bytes);

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path);
std::map<std::string, Tensor> read_checkpoint(const std::filesystem::path& path);

/// Loads values into `store`; throws ShapeError naming the first mismatch.
void load_checkpoint(ParamStore& store, const std::filesystem::path& path);

}  // namespace oikg::nn
