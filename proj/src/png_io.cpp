#include "smoke/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace smoke {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& what, const std::string& path) {
  throw std::runtime_error(what + ": " + path);
}

}  // namespace

ImageU8 read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail("read_png: cannot open", path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("read_png: libpng init failed", path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail("read_png: libpng init failed", path);
  }
  ImageU8 img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("read_png: decode error", path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("read_png: unsupported channel count", path);
  }
  img = ImageU8(static_cast<int>(h), static_cast<int>(w), channels);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = img.px.data() + static_cast<std::size_t>(y) * w * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

namespace {

void write_png_impl(const std::string& path, const std::uint8_t* data, int h,
                    int w, int channels, int depth,
                    const std::string& provenance) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail("write_png: cannot open", path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                              nullptr);
  if (!png) fail("write_png: libpng init failed", path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail("write_png: libpng init failed", path);
  }
  std::vector<png_bytep> rows(h);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("write_png: encode error", path);
  }
  png_init_io(png, fp.get());
  const int color =
      channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, w, h, depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_text text;
  std::string key = "provenance";
  std::string value = provenance;
  if (!provenance.empty()) {
    text.compression = PNG_TEXT_COMPRESSION_NONE;
    text.key = key.data();
    text.text = value.data();
    text.text_length = value.size();
    png_set_text(png, info, &text, 1);
  }
  png_write_info(png, info);
  if (depth == 16) png_set_swap(png);  // buffers are host (little) endian
  const std::size_t stride =
      static_cast<std::size_t>(w) * channels * (depth / 8);
  for (int y = 0; y < h; ++y)
    rows[y] = const_cast<png_bytep>(data + y * stride);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png(const std::string& path, const ImageU8& img,
               const std::string& provenance) {
  if (img.ch != 1 && img.ch != 3)
    throw std::invalid_argument("write_png: 1 or 3 channels only");
  write_png_impl(path, img.px.data(), img.h, img.w, img.ch, 8, provenance);
}

void write_png16(const std::string& path, const std::vector<std::uint16_t>& px,
                 int h, int w, const std::string& provenance) {
  if (px.size() != static_cast<std::size_t>(h) * w)
    throw std::invalid_argument("write_png16: size mismatch");
  write_png_impl(path, reinterpret_cast<const std::uint8_t*>(px.data()), h, w,
                 1, 16, provenance);
}

std::vector<std::uint16_t> read_png16(const std::string& path, int* h,
                                      int* w) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail("read_png16: cannot open", path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) fail("read_png16: libpng init failed", path);
  std::vector<std::uint16_t> out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("read_png16: decode error", path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  if (png_get_bit_depth(png, info) != 16 ||
      png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("read_png16: expected 16-bit grayscale", path);
  }
  png_set_swap(png);
  const int W = static_cast<int>(png_get_image_width(png, info));
  const int H = static_cast<int>(png_get_image_height(png, info));
  out.resize(static_cast<std::size_t>(W) * H);
  rows.resize(H);
  for (int y = 0; y < H; ++y)
    rows[y] = reinterpret_cast<png_bytep>(out.data() +
                                          static_cast<std::size_t>(y) * W);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  *h = H;
  *w = W;
  return out;
}

}  // namespace smoke
