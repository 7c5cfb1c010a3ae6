#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecp/geometry.hpp"

namespace ecp {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// 8-bit RGB, row-major, tightly packed (pixels.size() == width * height * 3).
struct ImageBuffer {
  Dims dims;
  std::vector<std::uint8_t> pixels;

  static ImageBuffer filled(Dims dims, Rgb color);

  Rgb at(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * dims.width + x) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t i = (static_cast<std::size_t>(y) * dims.width + x) * 3;
    pixels[i] = c.r;
    pixels[i + 1] = c.g;
    pixels[i + 2] = c.b;
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

// An image together with the map from its own pixel frame back to the
// full-resolution frame it was derived from.
struct DerivedImage {
  ImageBuffer image;
  FrameTransform to_fullres;

  const FrameId& frame() const { return to_fullres.from; }
};

enum class ImageFormat { kPng, kJpeg };

std::string_view mime_type(ImageFormat format);

// Decodes PNG or JPEG into RGB. Alpha is dropped, grayscale is expanded.
// Errors: kNotFound (missing file), kDecode (anything else); both name the path.
ImageBuffer load_image(const std::filesystem::path& path);
ImageBuffer decode_image(std::span<const std::uint8_t> bytes, std::string_view origin = "<memory>");
// Reads only the header.
Dims read_image_dims(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const ImageBuffer& img);
std::vector<std::uint8_t> encode_jpeg(const ImageBuffer& img, int quality = 90);
std::vector<std::uint8_t> encode_image(const ImageBuffer& img, ImageFormat format);
void save_png(const ImageBuffer& img, const std::filesystem::path& path);

// Hash of the decoded pixels, independent of container format and path.
std::string image_content_hash(const ImageBuffer& img);

// Wraps a freshly loaded image as living in the full-resolution frame.
DerivedImage as_full_res(ImageBuffer img);

// Aspect-preserving bilinear resize so the longer side equals
// min(max_side, current longer side). Never upscales.
DerivedImage downsample(const ImageBuffer& img, int max_side);
DerivedImage downsample(const DerivedImage& img, int max_side);

// Pixel-exact crop of the box after rounding its corners half away from
// zero. The box must be expressed in the source image's own frame.
DerivedImage crop(const DerivedImage& img, const FramedBox& box);
DerivedImage crop(const ImageBuffer& img, const FramedBox& box);

// Clipped to the image bounds.
void fill_rect(ImageBuffer& img, int x, int y, int w, int h, Rgb color);

}  // namespace ecp
