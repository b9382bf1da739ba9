#include "irsc/pgm.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace irsc::io {

void write_pgm(const std::filesystem::path& path, std::span<const double> pixels,
               std::size_t height, std::size_t width) {
  if (pixels.size() != height * width) {
    throw std::invalid_argument("write_pgm: pixel count mismatch");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "P5\n" << width << " " << height << "\n255\n";
  std::vector<unsigned char> bytes(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double v = std::round((pixels[i] + 1.0) * 127.5);
    bytes[i] = static_cast<unsigned char>(std::min(255.0, std::max(0.0, v)));
  }
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
}

}  // namespace irsc::io
