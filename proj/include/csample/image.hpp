#pragma once

#include <cstddef>
#include <filesystem>

#include "csample/linalg.hpp"

namespace csample {

// Row-major grayscale image with intensities in [0, 1] after loading.
struct ImageGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vector intensities;

  ImageGrid() = default;
  ImageGrid(std::size_t r, std::size_t c, Vector values);

  double mean() const;
};

// Reads P2 (plain) or P5 (raw) PGM; values are divided by maxval.
ImageGrid read_pgm(const std::filesystem::path& path);
// Writes plain P2 with maxval 255. Values are clamped to [0, 1] here and only
// here.
void write_pgm(const std::filesystem::path& path, const ImageGrid& image);

// Bright disk on a dark background.
ImageGrid make_disk_phantom(std::size_t rows, std::size_t cols, double radius,
                            double background, double foreground);

} // namespace csample
