#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "codekc/nn/optim.hpp"

namespace codekc::nn {

// Checkpoint container: an 8-byte little-endian header length, a UTF-8 JSON
// header {name -> {shape, offset}}, then a little-endian fp64 payload in
// row-major order. Offsets are byte positions into the payload.
void save_checkpoint(const std::filesystem::path& path, const std::map<std::string, Mat>& arrays);
std::map<std::string, Mat> load_checkpoint(const std::filesystem::path& path);

void save_parameters(const std::filesystem::path& path, const std::vector<Parameter*>& params);
void load_parameters(const std::filesystem::path& path, const std::vector<Parameter*>& params);

}  // namespace codekc::nn
