#include "slotlifter/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace sl::png {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

Image read(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open PNG for reading: " + path);

  png_structp pngp = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(pngp);
  if (!pngp || !info || setjmp(png_jmpbuf(pngp))) {
    png_destroy_read_struct(&pngp, &info, nullptr);
    throw std::runtime_error("corrupt or unreadable PNG: " + path);
  }
  png_init_io(pngp, fp.get());
  png_read_info(pngp, info);

  png_uint_32 w, h;
  int bit_depth, color_type;
  png_get_IHDR(pngp, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if (bit_depth == 16) png_set_strip_16(pngp);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(pngp);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(pngp);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(pngp);
  png_read_update_info(pngp, info);

  Image img;
  img.width = w;
  img.height = h;
  img.channels = png_get_channels(pngp, info);
  img.pixels.resize(static_cast<size_t>(w) * h * img.channels);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 r = 0; r < h; ++r) rows[r] = img.pixels.data() + size_t(r) * w * img.channels;
  png_read_image(pngp, rows.data());
  png_read_end(pngp, nullptr);
  png_destroy_read_struct(&pngp, &info, nullptr);
  return img;
}

void write(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("PNG write supports 1 or 3 channels");
  if (img.pixels.size() != static_cast<size_t>(img.width) * img.height * img.channels)
    throw std::invalid_argument("PNG write: pixel buffer size mismatch");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open PNG for writing: " + path);

  png_structp pngp = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(pngp);
  if (!pngp || !info || setjmp(png_jmpbuf(pngp))) {
    png_destroy_write_struct(&pngp, &info);
    throw std::runtime_error("PNG write failure: " + path);
  }
  png_init_io(pngp, fp.get());
  png_set_IHDR(pngp, info, img.width, img.height, 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(pngp, info);
  for (long r = 0; r < img.height; ++r)
    png_write_row(pngp, const_cast<png_bytep>(img.pixels.data() +
                                              size_t(r) * img.width * img.channels));
  png_write_end(pngp, nullptr);
  png_destroy_write_struct(&pngp, &info);
}

}  // namespace sl::png
