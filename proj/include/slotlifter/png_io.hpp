#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sl::png {

// Interleaved row-major 8-bit image, 1 (gray) or 3 (RGB) channels.
struct Image {
  long width = 0, height = 0, channels = 0;
  std::vector<uint8_t> pixels;
};

Image read(const std::string& path);
void write(const std::string& path, const Image& img);

}  // namespace sl::png
