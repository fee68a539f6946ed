#pragma once

#include <filesystem>
#include <string>

#include "gsattack/image.hpp"
#include "gsattack/roi.hpp"

namespace gsattack {

/// Portable float map: "PF" (3 channels) or "Pf" (1 channel), little-endian,
/// rows stored bottom to top.
void write_pfm(const Image &img, const std::filesystem::path &path);
Image read_pfm(const std::filesystem::path &path);

/// 8-bit RGB PNG; values are clamped to [0, 1] and rounded.
void write_png(const Image &rgb, const std::filesystem::path &path);

/// 1-bit grayscale PNG of a mask.
void write_mask_png(const ROIMask &mask, const std::filesystem::path &path);

std::string read_text(const std::filesystem::path &path);
void write_text(const std::filesystem::path &path, const std::string &text);

} // namespace gsattack
