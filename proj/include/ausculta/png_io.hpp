#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ausculta/pointcloud.hpp"

namespace ausculta {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_fail(const std::string& what, const std::string& path) {
  throw std::runtime_error(what + ": " + path);
}

}  // namespace detail

/// 8-bit RGB PNG.
inline void save_png_rgb(const std::string& path, const ImageRGB& image) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) detail::png_fail("save_png_rgb: cannot open", path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    detail::png_fail("save_png_rgb: libpng error writing", path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int v = 0; v < image.height; ++v) {
    png_write_row(png, const_cast<png_bytep>(reinterpret_cast<const png_byte*>(
                           image.pixels.data() + static_cast<std::size_t>(v) * image.width)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline ImageRGB load_png_rgb(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) detail::png_fail("load_png_rgb: cannot open", path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    detail::png_fail("load_png_rgb: libpng error reading", path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  ImageRGB image(static_cast<int>(png_get_image_width(png, info)),
                 static_cast<int>(png_get_image_height(png, info)));
  for (int v = 0; v < image.height; ++v)
    png_read_row(png,
                 reinterpret_cast<png_byte*>(image.pixels.data() + static_cast<std::size_t>(v) * image.width),
                 nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

/// 16-bit grayscale PNG, 1 unit = 1 mm; depth is rounded to whole millimeters
/// and clamped to the 16-bit range, 0 stays the invalid marker.
inline void save_png_depth16(const std::string& path, const DepthImage& depth) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) detail::png_fail("save_png_depth16: cannot open", path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    detail::png_fail("save_png_depth16: libpng error writing", path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, depth.width, depth.height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(depth.width) * 2);
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const double d = depth.at(u, v);
      const long q = d <= 0 ? 0 : std::lround(d);
      const std::uint16_t value = static_cast<std::uint16_t>(std::clamp(q, 0L, 65535L));
      row[2 * u] = static_cast<png_byte>(value >> 8);
      row[2 * u + 1] = static_cast<png_byte>(value & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline DepthImage load_png_depth16(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) detail::png_fail("load_png_depth16: cannot open", path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    detail::png_fail("load_png_depth16: libpng error reading", path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    detail::png_fail("load_png_depth16: not a 16-bit grayscale PNG", path);
  }
  png_read_update_info(png, info);
  DepthImage depth(static_cast<int>(png_get_image_width(png, info)),
                   static_cast<int>(png_get_image_height(png, info)));
  std::vector<png_byte> row(static_cast<std::size_t>(depth.width) * 2);
  for (int v = 0; v < depth.height; ++v) {
    png_read_row(png, row.data(), nullptr);
    for (int u = 0; u < depth.width; ++u) {
      const std::uint16_t value =
          static_cast<std::uint16_t>((row[2 * u] << 8) | row[2 * u + 1]);
      depth.at(u, v) = static_cast<float>(value);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return depth;
}

}  // namespace ausculta
