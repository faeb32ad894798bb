#pragma once

#include <filesystem>

#include "cpdm/tensor.hpp"

namespace cpdm::io {

/// Decode an 8-bit RGB PNG into a (1,3,H,W) float image in [0,1].
Image load_png(const std::filesystem::path& path);

/// Write a metric-space image as 8-bit RGB PNG (value * 255, round to
/// nearest). Batch must be 1.
void save_png(const std::filesystem::path& path, const Image& img);

/// Bilinear resample to (out_h, out_w).
Image resize_bilinear(const Image& img, int out_h, int out_w);

/// Snap metric-space values onto the 8-bit grid (k/255). Used for parity
/// checks between the float and quantized metric paths.
Image quantize_u8(const Image& img);

}  // namespace cpdm::io
