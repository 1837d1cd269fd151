#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sesame/tensor.hpp"

namespace sesame {

// Binary tensor layout, little-endian regardless of host:
//   u32 rank, u32 dims[rank], f64 data[product(dims)].
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

// Checkpoint file: u32 manifest length, manifest JSON (UTF-8, sorted keys),
// then one tensor per manifest entry in listed order. The manifest is
// {"config": ..., "tensors": [{"name", "shape"}, ...]}.
struct Checkpoint {
  nlohmann::json config;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors,
                     const nlohmann::json& config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sesame
