#pragma once

#include <filesystem>

#include "stagan/clip.hpp"

namespace stagan {

// 8-bit PNG codec. Writes are byte-deterministic for identical images.
// Reads accept gray, gray+alpha, RGB and RGBA and always return RGB.
Image8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image8& image);

}  // namespace stagan
