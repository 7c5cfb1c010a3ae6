#include "ecp/imaging.hpp"

#include <png.h>
// jpeglib.h needs size_t and FILE declared first.
#include <cstdio>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include "ecp/error.hpp"
#include "ecp/hashing.hpp"

namespace ecp {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::kNotFound, "image not found: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open image: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_png(std::span<const std::uint8_t> b) {
  return b.size() >= 8 && png_sig_cmp(b.data(), 0, 8) == 0;
}

bool is_jpeg(std::span<const std::uint8_t> b) {
  return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

// --- PNG (libpng simplified API) ---

ImageBuffer decode_png(std::span<const std::uint8_t> bytes, std::string_view origin) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()) == 0) {
    throw Error(ErrorCode::kDecode,
                "PNG decode failed for " + std::string(origin) + ": " + image.message);
  }
  const bool has_alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  image.format = has_alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr) == 0) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::kDecode, "PNG decode failed for " + std::string(origin) + ": " + msg);
  }
  ImageBuffer out;
  out.dims = {static_cast<int>(image.width), static_cast<int>(image.height)};
  if (!has_alpha) {
    out.pixels = std::move(raw);
    return out;
  }
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  out.pixels.resize(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    out.pixels[i * 3] = raw[i * 4];
    out.pixels[i * 3 + 1] = raw[i * 4 + 1];
    out.pixels[i * 3 + 2] = raw[i * 4 + 2];
  }
  return out;
}

// --- JPEG (libjpeg) ---
// libjpeg reports fatal errors through a callback that must not return, so
// the C entry points below use setjmp and keep only trivially destructible
// locals.

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

extern "C" void on_jpeg_error(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

bool decode_jpeg_into(std::span<const std::uint8_t> bytes, bool header_only, ImageBuffer& out,
                      char* message) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = on_jpeg_error;
  err.message[0] = '\0';
  if (setjmp(err.jump)) {
    std::snprintf(message, JMSG_LENGTH_MAX, "%s", err.message);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  out.dims = {static_cast<int>(cinfo.image_width), static_cast<int>(cinfo.image_height)};
  if (header_only) {
    jpeg_destroy_decompress(&cinfo);
    return true;
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.pixels.resize(static_cast<std::size_t>(cinfo.output_width) * cinfo.output_height * 3);
  const std::size_t stride = static_cast<std::size_t>(cinfo.output_width) * 3;
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + stride * cinfo.output_scanline;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

bool encode_jpeg_into(const ImageBuffer& img, int quality, unsigned char** buffer,
                      unsigned long* size, char* message) {
  jpeg_compress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = on_jpeg_error;
  if (setjmp(err.jump)) {
    std::snprintf(message, JMSG_LENGTH_MAX, "%s", err.message);
    jpeg_destroy_compress(&cinfo);
    return false;
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, buffer, size);
  cinfo.image_width = static_cast<JDIMENSION>(img.dims.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.dims.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = static_cast<std::size_t>(img.dims.width) * 3;
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPLE*>(img.pixels.data() + stride * cinfo.next_scanline);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  return true;
}

ImageBuffer decode_jpeg(std::span<const std::uint8_t> bytes, std::string_view origin) {
  ImageBuffer out;
  char message[JMSG_LENGTH_MAX] = {};
  if (!decode_jpeg_into(bytes, false, out, message)) {
    throw Error(ErrorCode::kDecode,
                "JPEG decode failed for " + std::string(origin) + ": " + message);
  }
  return out;
}

void require_valid_buffer(const ImageBuffer& img) {
  if (img.dims.width < 1 || img.dims.height < 1 ||
      img.pixels.size() != static_cast<std::size_t>(img.dims.width) * img.dims.height * 3) {
    throw Error(ErrorCode::kInvalidArgument, "image buffer size does not match its dims");
  }
}

// Integer round-half-up of num/den for positive operands.
int rounded_ratio(long long num, long long den) {
  return static_cast<int>((2 * num + den) / (2 * den));
}

ImageBuffer resize_bilinear(const ImageBuffer& src, Dims dst_dims) {
  const int sw = src.dims.width;
  const int sh = src.dims.height;
  const int dw = dst_dims.width;
  const int dh = dst_dims.height;
  const double sx = static_cast<double>(sw) / dw;
  const double sy = static_cast<double>(sh) / dh;

  struct Tap {
    int i0;
    int i1;
    double f;
  };
  auto taps = [](int n_dst, int n_src, double scale) {
    std::vector<Tap> out(static_cast<std::size_t>(n_dst));
    for (int d = 0; d < n_dst; ++d) {
      double s = (d + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(n_src - 1));
      const int i0 = static_cast<int>(std::floor(s));
      out[d] = {i0, std::min(i0 + 1, n_src - 1), s - i0};
    }
    return out;
  };
  const std::vector<Tap> xt = taps(dw, sw, sx);
  const std::vector<Tap> yt = taps(dh, sh, sy);

  ImageBuffer dst;
  dst.dims = dst_dims;
  dst.pixels.resize(static_cast<std::size_t>(dw) * dh * 3);
  const std::size_t sstride = static_cast<std::size_t>(sw) * 3;
  for (int y = 0; y < dh; ++y) {
    const std::uint8_t* r0 = src.pixels.data() + sstride * yt[y].i0;
    const std::uint8_t* r1 = src.pixels.data() + sstride * yt[y].i1;
    const double fy = yt[y].f;
    std::uint8_t* out = dst.pixels.data() + static_cast<std::size_t>(y) * dw * 3;
    for (int x = 0; x < dw; ++x) {
      const Tap& t = xt[x];
      for (int c = 0; c < 3; ++c) {
        const double top = r0[t.i0 * 3 + c] + (r0[t.i1 * 3 + c] - r0[t.i0 * 3 + c]) * t.f;
        const double bot = r1[t.i0 * 3 + c] + (r1[t.i1 * 3 + c] - r1[t.i0 * 3 + c]) * t.f;
        const double v = top + (bot - top) * fy;
        out[x * 3 + c] = static_cast<std::uint8_t>(std::clamp(v + 0.5, 0.0, 255.0));
      }
    }
  }
  return dst;
}

}  // namespace

ImageBuffer ImageBuffer::filled(Dims dims, Rgb color) {
  ImageBuffer img;
  img.dims = make_dims(dims.width, dims.height);
  img.pixels.resize(static_cast<std::size_t>(dims.width) * dims.height * 3);
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    img.pixels[i] = color.r;
    img.pixels[i + 1] = color.g;
    img.pixels[i + 2] = color.b;
  }
  return img;
}

std::string_view mime_type(ImageFormat format) {
  return format == ImageFormat::kPng ? "image/png" : "image/jpeg";
}

ImageBuffer decode_image(std::span<const std::uint8_t> bytes, std::string_view origin) {
  if (is_png(bytes)) return decode_png(bytes, origin);
  if (is_jpeg(bytes)) return decode_jpeg(bytes, origin);
  throw Error(ErrorCode::kDecode, "unsupported image format: " + std::string(origin));
}

ImageBuffer load_image(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  return decode_image(bytes, path.string());
}

Dims read_image_dims(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  if (is_png(bytes)) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()) == 0) {
      throw Error(ErrorCode::kDecode, "PNG header unreadable: " + path.string());
    }
    Dims d{static_cast<int>(image.width), static_cast<int>(image.height)};
    png_image_free(&image);
    return d;
  }
  if (is_jpeg(bytes)) {
    ImageBuffer out;
    char message[JMSG_LENGTH_MAX] = {};
    if (!decode_jpeg_into(bytes, true, out, message)) {
      throw Error(ErrorCode::kDecode, "JPEG header unreadable: " + path.string() + ": " + message);
    }
    return out.dims;
  }
  throw Error(ErrorCode::kDecode, "unsupported image format: " + path.string());
}

namespace {

void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

void png_store_error(png_structp png, png_const_charp msg) {
  auto* message = static_cast<char*>(png_get_error_ptr(png));
  std::snprintf(message, 200, "%s", msg);
  png_longjmp(png, 1);
}

void png_ignore_warning(png_structp, png_const_charp) {}

// One pass with fast deflate settings; the simplified writer needs two passes
// to size its buffer, and full compression costs several times more on
// 4K frames for a few percent of payload.
bool encode_png_into(const ImageBuffer& img, std::vector<std::uint8_t>* out, char* message) {
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, message, png_store_error, png_ignore_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, out, png_append, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.dims.width),
               static_cast<png_uint_32>(img.dims.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 1);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(img.dims.width) * 3;
  for (int y = 0; y < img.dims.height; ++y) {
    png_write_row(png, img.pixels.data() + stride * static_cast<std::size_t>(y));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ImageBuffer& img) {
  require_valid_buffer(img);
  std::vector<std::uint8_t> out;
  out.reserve(img.pixels.size() / 16 + 1024);
  char message[200] = {};
  if (!encode_png_into(img, &out, message)) {
    throw Error(ErrorCode::kInvalidArgument, std::string("PNG encode failed: ") + message);
  }
  return out;
}

std::vector<std::uint8_t> encode_jpeg(const ImageBuffer& img, int quality) {
  require_valid_buffer(img);
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  char message[JMSG_LENGTH_MAX] = {};
  const bool ok = encode_jpeg_into(img, std::clamp(quality, 1, 100), &buffer, &size, message);
  std::vector<std::uint8_t> out;
  if (ok) out.assign(buffer, buffer + size);
  std::free(buffer);
  if (!ok) throw Error(ErrorCode::kInvalidArgument, std::string("JPEG encode failed: ") + message);
  return out;
}

std::vector<std::uint8_t> encode_image(const ImageBuffer& img, ImageFormat format) {
  return format == ImageFormat::kPng ? encode_png(img) : encode_jpeg(img, 90);
}

void save_png(const ImageBuffer& img, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

std::string image_content_hash(const ImageBuffer& img) {
  Sha256 h;
  h.update("rgb8:" + std::to_string(img.dims.width) + "x" + std::to_string(img.dims.height) + ":");
  h.update(img.pixels);
  return h.hex_digest();
}

DerivedImage as_full_res(ImageBuffer img) {
  const FrameId frame = full_res_frame(img.dims);
  return {std::move(img), identity_transform(frame)};
}

DerivedImage downsample(const DerivedImage& img, int max_side) {
  if (max_side < 1) throw Error(ErrorCode::kInvalidArgument, "max_side must be >= 1");
  const Dims src = img.image.dims;
  const int longest = std::max(src.width, src.height);
  const int target = std::min(max_side, longest);
  Dims dst = src;
  if (target < longest) {
    if (src.width >= src.height) {
      dst = {target, std::max(1, rounded_ratio(static_cast<long long>(src.height) * target,
                                               src.width))};
    } else {
      dst = {std::max(1, rounded_ratio(static_cast<long long>(src.width) * target, src.height)),
             target};
    }
  }
  const FrameId frame = submitted_frame(dst);
  const FrameTransform to_src = scaling_transform(frame, img.frame());
  if (dst == src) return {img.image, compose(to_src, img.to_fullres)};
  return {resize_bilinear(img.image, dst), compose(to_src, img.to_fullres)};
}

DerivedImage downsample(const ImageBuffer& img, int max_side) {
  return downsample(as_full_res(img), max_side);
}

DerivedImage crop(const DerivedImage& img, const FramedBox& box) {
  if (!(box.frame == img.frame())) {
    throw Error(ErrorCode::kFrameMismatch, "crop: box is not expressed in the image's frame");
  }
  const Dims d = img.image.dims;
  const int x1 = std::clamp(static_cast<int>(std::round(box.x1)), 0, d.width);
  const int y1 = std::clamp(static_cast<int>(std::round(box.y1)), 0, d.height);
  const int x2 = std::clamp(static_cast<int>(std::round(box.x2)), 0, d.width);
  const int y2 = std::clamp(static_cast<int>(std::round(box.y2)), 0, d.height);
  const int w = x2 - x1;
  const int h = y2 - y1;
  if (w <= 0 || h <= 0) {
    throw Error(ErrorCode::kDegenerateBox, "crop: rounded box has zero width or height");
  }
  ImageBuffer out;
  out.dims = {w, h};
  out.pixels.resize(static_cast<std::size_t>(w) * h * 3);
  const std::size_t src_stride = static_cast<std::size_t>(d.width) * 3;
  const std::size_t row_bytes = static_cast<std::size_t>(w) * 3;
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* src = img.image.pixels.data() + src_stride * (y1 + y) + x1 * 3;
    std::copy(src, src + row_bytes, out.pixels.data() + row_bytes * y);
  }
  const FrameId frame = crop_local_frame(out.dims);
  const FrameTransform to_src = translation_transform(frame, img.frame(), x1, y1);
  return {std::move(out), compose(to_src, img.to_fullres)};
}

DerivedImage crop(const ImageBuffer& img, const FramedBox& box) {
  return crop(as_full_res(img), box);
}

void fill_rect(ImageBuffer& img, int x, int y, int w, int h, Rgb color) {
  const int x0 = std::clamp(x, 0, img.dims.width);
  const int y0 = std::clamp(y, 0, img.dims.height);
  const int x1 = std::clamp(x + w, 0, img.dims.width);
  const int y1 = std::clamp(y + h, 0, img.dims.height);
  for (int yy = y0; yy < y1; ++yy) {
    for (int xx = x0; xx < x1; ++xx) img.set(xx, yy, color);
  }
}

}  // namespace ecp
