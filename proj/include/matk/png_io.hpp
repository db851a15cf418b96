#ifndef MATK_PNG_IO_HPP_
#define MATK_PNG_IO_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace matk {

// 8-bit image buffer, row-major H x W x C with C in {1, 3}.
struct PngImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<uint8_t> data;
};

PngImage read_png(const std::string& path);
void write_png(const std::string& path, const PngImage& image);

}  // namespace matk

#endif  // MATK_PNG_IO_HPP_
