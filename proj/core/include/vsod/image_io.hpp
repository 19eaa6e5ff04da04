#pragma once

#include <filesystem>

#include "vsod/tensor.hpp"

namespace vsod::io {

/// 8-bit PNG I/O. Colour images are (1,3,H,W) RGB in [0,1]; grayscale maps
/// are (1,1,H,W). Values are rounded to the nearest of 256 levels.
void write_rgb(const std::filesystem::path& path, const Tensor& image);
void write_gray(const std::filesystem::path& path, const Tensor& image);
Tensor read_rgb(const std::filesystem::path& path);
Tensor read_gray(const std::filesystem::path& path);

}  // namespace vsod::io
