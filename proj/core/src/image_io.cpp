#include <cmath>
#include <cstring>

#include <png.h>

#include "gom/error.hpp"
#include "gom/io.hpp"

namespace gom {

namespace {

std::uint8_t to_byte(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

std::uint32_t png_format(int channels) {
  switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 3: return PNG_FORMAT_RGB;
    case 4: return PNG_FORMAT_RGBA;
    default: throw ArgumentError("png: channel count must be 1, 3 or 4");
  }
}

std::vector<std::uint8_t> encode(const std::uint8_t* pixels, int width, int height, int channels) {
  if (width <= 0 || height <= 0) throw ArgumentError("png: empty image");
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = png_format(channels);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, pixels, 0, nullptr)) {
    throw Error(std::string("png encode: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels, 0, nullptr)) {
    throw Error(std::string("png encode: ") + img.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& image) {
  std::vector<std::uint8_t> px(image.data.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = to_byte(image.data[i]);
  return encode(px.data(), image.width, image.height, image.channels);
}

std::vector<std::uint8_t> encode_png_rgba8(std::span<const std::uint8_t> rgba, int width,
                                           int height) {
  if (rgba.size() != static_cast<std::size_t>(width) * height * 4) {
    throw ArgumentError("png: RGBA buffer size does not match the resolution");
  }
  return encode(rgba.data(), width, height, 4);
}

Image decode_png(std::span<const std::uint8_t> bytes, int channels) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw FormatError(std::string("png decode: ") + img.message);
  }
  img.format = png_format(channels);
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, px.data(), 0, nullptr)) {
    png_image_free(&img);
    throw FormatError(std::string("png decode: ") + img.message);
  }
  Image out(static_cast<int>(img.width), static_cast<int>(img.height), channels);
  for (std::size_t i = 0; i < px.size(); ++i) out.data[i] = px[i] / 255.0;
  return out;
}

void write_png(const Image& image, const std::filesystem::path& path) {
  write_binary_file(path, encode_png(image));
}

Image read_png(const std::filesystem::path& path, int channels) {
  try {
    return decode_png(read_binary_file(path), channels);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace gom
