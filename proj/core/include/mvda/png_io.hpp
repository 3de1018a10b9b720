#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvda/mask.hpp"
#include "mvda/tensor.hpp"

namespace mvda {

// Minimal PNG codec over zlib: 8-bit grayscale and RGB, no interlacing.
// Encoding is deterministic (fixed filter and compression settings), so the
// same pixels always produce the same bytes.

// image is a CHW float tensor with C in {1, 3}, values clamped to [0, 1] and
// quantized to 8 bits.
void write_png(const std::string& path, const Tensor<float>& image);

// mask pixels are written as {0, 255} grayscale.
void write_png(const std::string& path, const Mask& mask);

// Decodes to CHW float in [0, 1]. Rejects unsupported formats (bit depth,
// palette, interlace) and corrupt files with a diagnostic.
Tensor<float> read_png(const std::string& path);

// Decodes a grayscale PNG and thresholds at 128 to a binary mask.
Mask read_png_mask(const std::string& path);

// In-memory variants used by the file functions and the tests.
std::vector<std::uint8_t> encode_png(const std::uint8_t* pixels, int h, int w, int channels);
void decode_png(const std::vector<std::uint8_t>& bytes, std::vector<std::uint8_t>& pixels,
                int& h, int& w, int& channels);

}  // namespace mvda
