#pragma once

#include <filesystem>
#include <span>

namespace irsc::io {

// Binary PGM (P5, maxval 255). Pixels in [-1, 1] are de-normalized with
// round((x + 1) * 127.5) and clamped.
void write_pgm(const std::filesystem::path& path, std::span<const double> pixels,
               std::size_t height, std::size_t width);

}  // namespace irsc::io
