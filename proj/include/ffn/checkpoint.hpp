#pragma once

#include <string>

#include "ffn/model.hpp"

namespace ffn {

// Flat binary container: magic + version, ModelConfig header, vocabulary and
// tag names, then named parameter tensors (name, shape, row-major doubles).
// Little-endian throughout.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace ffn
