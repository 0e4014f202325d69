#include "data/png_io.hpp"

#include <png.h>
#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>

namespace spmkd {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_to_exception(png_structp, png_const_charp msg) {
  throw IoError(std::string("png: ") + msg);
}

void png_warning_ignore(png_structp, png_const_charp) {}

}  // namespace

void write_png_gray16(const std::string& path, const Gray16Image& img) {
  if (img.height < 1 || img.width < 1 ||
      img.pixels.size() != static_cast<std::size_t>(img.height * img.width)) {
    throw DimensionError("png: image dimensions do not match pixel count");
  }
  const std::string tmp = path + ".tmp";
  {
    FilePtr f(std::fopen(tmp.c_str(), "wb"));
    if (!f) throw IoError("png: cannot open '" + tmp + "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              png_error_to_exception, png_warning_ignore);
    if (!png) throw IoError("png: writer allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
      png_destroy_write_struct(&png, nullptr);
      throw IoError("png: info allocation failed");
    }
    try {
      png_init_io(png, f.get());
      png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                   static_cast<png_uint_32>(img.height), 16, PNG_COLOR_TYPE_GRAY,
                   PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
      png_write_info(png, info);

      // PNG 16-bit samples are big-endian on the wire; pack explicitly.
      std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 2);
      for (std::int64_t y = 0; y < img.height; ++y) {
        for (std::int64_t x = 0; x < img.width; ++x) {
          const std::uint16_t v = img.pixels[static_cast<std::size_t>(y * img.width + x)];
          row[static_cast<std::size_t>(x) * 2] = static_cast<std::uint8_t>(v >> 8);
          row[static_cast<std::size_t>(x) * 2 + 1] = static_cast<std::uint8_t>(v & 0xff);
        }
        png_write_row(png, row.data());
      }
      png_write_end(png, nullptr);
    } catch (...) {
      png_destroy_write_struct(&png, &info);
      throw;
    }
    png_destroy_write_struct(&png, &info);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("png: rename to '" + path + "' failed: " + ec.message());
}

Gray16Image read_png_gray16(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("png: cannot open '" + path + "'");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_to_exception,
                                           png_warning_ignore);
  if (!png) throw IoError("png: reader allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png: info allocation failed");
  }
  Gray16Image img;
  try {
    png_init_io(png, f.get());
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || depth != 16) {
      throw ParseError("png: '" + path + "' is not 16-bit grayscale", 0);
    }
    img.height = h;
    img.width = w;
    img.pixels.resize(static_cast<std::size_t>(img.height * img.width));
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 2);
    for (png_uint_32 y = 0; y < h; ++y) {
      png_read_row(png, row.data(), nullptr);
      for (png_uint_32 x = 0; x < w; ++x) {
        img.pixels[static_cast<std::size_t>(y) * w + x] =
            static_cast<std::uint16_t>((row[x * 2] << 8) | row[x * 2 + 1]);
      }
    }
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png_rgb8(const std::string& path, std::int64_t height, std::int64_t width,
                    const std::vector<std::uint8_t>& rgb) {
  if (height < 1 || width < 1 || rgb.size() != static_cast<std::size_t>(height * width * 3)) {
    throw DimensionError("png: rgb buffer does not match dimensions");
  }
  const std::string tmp = path + ".tmp";
  {
    FilePtr f(std::fopen(tmp.c_str(), "wb"));
    if (!f) throw IoError("png: cannot open '" + tmp + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              png_error_to_exception, png_warning_ignore);
    if (!png) throw IoError("png: writer allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
      png_destroy_write_struct(&png, nullptr);
      throw IoError("png: info allocation failed");
    }
    try {
      png_init_io(png, f.get());
      png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                   PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                   PNG_FILTER_TYPE_DEFAULT);
      png_write_info(png, info);
      for (std::int64_t y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(rgb.data() + y * width * 3));
      }
      png_write_end(png, nullptr);
    } catch (...) {
      png_destroy_write_struct(&png, &info);
      throw;
    }
    png_destroy_write_struct(&png, &info);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("png: rename to '" + path + "' failed: " + ec.message());
}

void validate_png_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("png: cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  const std::size_t n = buf.size();

  static const unsigned char kSig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (n < 8 || std::memcmp(p, kSig, 8) != 0) throw ParseError("png: bad signature", 0);

  std::size_t pos = 8;
  bool saw_ihdr = false;
  bool saw_iend = false;
  while (pos < n) {
    if (saw_iend) throw ParseError("png: data after IEND", static_cast<long long>(pos));
    if (pos + 8 > n) throw ParseError("png: truncated chunk header", static_cast<long long>(pos));
    const std::uint32_t len = (static_cast<std::uint32_t>(p[pos]) << 24) |
                              (static_cast<std::uint32_t>(p[pos + 1]) << 16) |
                              (static_cast<std::uint32_t>(p[pos + 2]) << 8) |
                              static_cast<std::uint32_t>(p[pos + 3]);
    if (len > 0x7fffffff) throw ParseError("png: chunk length out of range", static_cast<long long>(pos));
    const char* type = buf.data() + pos + 4;
    for (int i = 0; i < 4; ++i) {
      const char c = type[i];
      if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'))) {
        throw ParseError("png: invalid chunk type", static_cast<long long>(pos + 4));
      }
    }
    if (!saw_ihdr && std::memcmp(type, "IHDR", 4) != 0) {
      throw ParseError("png: first chunk must be IHDR", static_cast<long long>(pos + 4));
    }
    if (pos + 12 + static_cast<std::size_t>(len) > n) {
      throw ParseError("png: chunk body exceeds file size", static_cast<long long>(pos));
    }
    const std::size_t crc_at = pos + 8 + len;
    const std::uint32_t stored = (static_cast<std::uint32_t>(p[crc_at]) << 24) |
                                 (static_cast<std::uint32_t>(p[crc_at + 1]) << 16) |
                                 (static_cast<std::uint32_t>(p[crc_at + 2]) << 8) |
                                 static_cast<std::uint32_t>(p[crc_at + 3]);
    const auto computed = static_cast<std::uint32_t>(
        crc32(crc32(0L, Z_NULL, 0), p + pos + 4, static_cast<uInt>(len + 4)));
    if (stored != computed) {
      throw ParseError("png: chunk CRC mismatch (" + std::string(type, 4) + ")",
                       static_cast<long long>(crc_at));
    }
    saw_ihdr = true;
    if (std::memcmp(type, "IEND", 4) == 0) saw_iend = true;
    pos = crc_at + 4;
  }
  if (!saw_ihdr) throw ParseError("png: no chunks", 8);
  if (!saw_iend) throw ParseError("png: missing IEND", static_cast<long long>(n));
}

}  // namespace spmkd
