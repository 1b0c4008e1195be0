#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "subjgen/tensor.hpp"

namespace subjgen {

// Binary manifest of named parameter tensors: little-endian 64-bit values,
// format version and the RNG seed of the producing run. Round-trips are
// bit-exact.
struct Checkpoint {
    uint32_t version = 1;
    uint64_t seed = 0;
    std::vector<std::pair<std::string, ad::Tensor>> entries;
};

void save_checkpoint(const std::string& path, const std::vector<const ad::Parameter*>& params,
                     uint64_t seed);
void save_checkpoint(const std::string& path, const std::vector<ad::Parameter*>& params,
                     uint64_t seed);
Checkpoint load_checkpoint(const std::string& path);

// Copies entries into matching parameters by name; every parameter must be
// present with an identical shape.
void restore_parameters(const Checkpoint& ckpt, const std::vector<ad::Parameter*>& params);

// FNV-1a over the file bytes, for run manifests.
uint64_t file_hash(const std::string& path);

}  // namespace subjgen
