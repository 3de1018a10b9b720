#pragma once

#include <string>

#include "mvda/models.hpp"

namespace mvda {

// Checkpoint file layout: 8-byte magic "MVDACKP1", a little-endian u64 header
// length, a JSON header (architecture descriptor, ordered parameter table
// with names/shapes/frozen flags, payload byte length), then the flat
// little-endian float32 payload in table order. Save -> load round-trips
// every weight bitwise.

void save_checkpoint(const ModelL<float>& model, const std::string& path);
void save_checkpoint(const ModelC<float>& model, const std::string& path);

ModelL<float> load_model_l_checkpoint(const std::string& path);
ModelC<float> load_model_c_checkpoint(const std::string& path);

// Peeks at the header without loading weights: "model_l" or "model_c".
std::string checkpoint_kind(const std::string& path);

}  // namespace mvda
