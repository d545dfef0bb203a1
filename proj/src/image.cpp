#include "csample/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "csample/errors.hpp"

namespace csample {

ImageGrid::ImageGrid(std::size_t r, std::size_t c, Vector values)
    : rows(r), cols(c), intensities(std::move(values)) {
  if (intensities.size() != rows * cols) {
    throw DimensionMismatch("ImageGrid", rows * cols, intensities.size());
  }
  for (double v : intensities) {
    if (!std::isfinite(v)) throw Error("ImageGrid: non-finite intensity");
  }
}

double ImageGrid::mean() const {
  if (intensities.empty()) return 0.0;
  return std::accumulate(intensities.begin(), intensities.end(), 0.0) /
         static_cast<double>(intensities.size());
}

namespace {

// Next header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

std::size_t header_number(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = header_token(in);
  try {
    std::size_t pos = 0;
    const unsigned long v = std::stoul(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PGM header");
  }
}

} // namespace

ImageGrid read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  const std::string magic = header_token(in);
  if (magic != "P2" && magic != "P5") throw IoError(path.string() + ": not a PGM file");
  const std::size_t cols = header_number(in, path);
  const std::size_t rows = header_number(in, path);
  const std::size_t maxval = header_number(in, path);
  if (rows == 0 || cols == 0 || maxval == 0 || maxval > 65535) {
    throw IoError(path.string() + ": invalid PGM dimensions");
  }
  Vector values(rows * cols);
  if (magic == "P2") {
    for (auto& v : values) {
      long px;
      if (!(in >> px) || px < 0 || static_cast<std::size_t>(px) > maxval) {
        throw IoError(path.string() + ": truncated or invalid pixel data");
      }
      v = static_cast<double>(px) / static_cast<double>(maxval);
    }
  } else {
    const std::size_t bytes = maxval < 256 ? 1 : 2;
    for (auto& v : values) {
      unsigned char buf[2] = {0, 0};
      if (!in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(bytes))) {
        throw IoError(path.string() + ": truncated pixel data");
      }
      const unsigned px = bytes == 1 ? buf[0] : (static_cast<unsigned>(buf[0]) << 8) | buf[1];
      v = static_cast<double>(px) / static_cast<double>(maxval);
    }
  }
  return ImageGrid(rows, cols, std::move(values));
}

void write_pgm(const std::filesystem::path& path, const ImageGrid& image) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write image " + path.string());
  out << "P2\n" << image.cols << ' ' << image.rows << "\n255\n";
  for (std::size_t r = 0; r < image.rows; ++r) {
    for (std::size_t c = 0; c < image.cols; ++c) {
      const double v = std::clamp(image.intensities[r * image.cols + c], 0.0, 1.0);
      out << static_cast<int>(std::lround(v * 255.0)) << (c + 1 == image.cols ? '\n' : ' ');
    }
  }
  if (!out) throw IoError("failed writing image " + path.string());
}

ImageGrid make_disk_phantom(std::size_t rows, std::size_t cols, double radius,
                            double background, double foreground) {
  Vector v(rows * cols, background);
  const double cr = (static_cast<double>(rows) - 1.0) / 2.0;
  const double cc = (static_cast<double>(cols) - 1.0) / 2.0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const double dr = static_cast<double>(r) - cr;
      const double dc = static_cast<double>(c) - cc;
      if (dr * dr + dc * dc <= radius * radius) v[r * cols + c] = foreground;
    }
  return ImageGrid(rows, cols, std::move(v));
}

} // namespace csample
