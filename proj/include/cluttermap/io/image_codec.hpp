#pragma once

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "cluttermap/image.hpp"

namespace cluttermap::io {

inline bool looks_like_png(const std::uint8_t* bytes, std::size_t n) {
  static const std::uint8_t magic[4] = {0x89, 'P', 'N', 'G'};
  return n >= 4 && std::memcmp(bytes, magic, 4) == 0;
}

inline bool looks_like_jpeg(const std::uint8_t* bytes, std::size_t n) {
  return n >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF;
}

inline ImagePatch decode_png(const std::uint8_t* bytes, std::size_t n) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes, n))
    fail("PNG decode failed: ", image.message);
  image.format = PNG_FORMAT_RGB;
  ImagePatch out(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    fail("PNG decode failed: ", image.message);
  }
  return out;
}

namespace detail {
struct JpegErrorMgr {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX] = {};
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}
}  // namespace detail

inline ImagePatch decode_jpeg(const std::uint8_t* bytes, std::size_t n) {
  jpeg_decompress_struct cinfo;
  detail::JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = detail::jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    fail("JPEG decode failed: ", err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes, n);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  ImagePatch out(static_cast<int>(cinfo.output_width),
                 static_cast<int>(cinfo.output_height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.data.data() +
                   static_cast<std::size_t>(cinfo.output_scanline) *
                       cinfo.output_width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

inline ImagePatch decode_image(const std::uint8_t* bytes, std::size_t n) {
  if (looks_like_png(bytes, n)) return decode_png(bytes, n);
  if (looks_like_jpeg(bytes, n)) return decode_jpeg(bytes, n);
  fail("unrecognized image format (expected PNG or JPEG)");
}

inline ImagePatch decode_image(const std::vector<std::uint8_t>& bytes) {
  return decode_image(bytes.data(), bytes.size());
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: ", path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

inline ImagePatch load_image(const std::string& path) {
  return decode_image(read_file_bytes(path));
}

inline std::vector<std::uint8_t> encode_png(const ImagePatch& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.data.data(), 0,
                                 nullptr))
    fail("PNG encode (size pass) failed: ", image.message);
  std::vector<std::uint8_t> bytes(size);
  if (!png_image_write_to_memory(&image, bytes.data(), &size, 0,
                                 img.data.data(), 0, nullptr))
    fail("PNG encode failed: ", image.message);
  bytes.resize(size);
  return bytes;
}

inline void write_file_bytes(const std::string& path,
                             const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write file: ", path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(out.good(), "short write to ", path);
}

inline void save_png(const std::string& path, const ImagePatch& img) {
  write_file_bytes(path, encode_png(img));
}

struct PaletteEntry {
  std::uint8_t r, g, b;
};

// Indexed-color PNG: one byte per pixel into a 256-entry palette.
inline void write_indexed_png(const std::string& path, int width, int height,
                              const std::vector<std::uint8_t>& indices,
                              const std::vector<PaletteEntry>& palette) {
  require(static_cast<std::size_t>(width) * height == indices.size(),
          "index buffer does not match raster dimensions");
  require(!palette.empty() && palette.size() <= 256, "palette must have 1..256 entries");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB_COLORMAP;
  image.colormap_entries = static_cast<png_uint_32>(palette.size());
  std::vector<std::uint8_t> colormap;
  colormap.reserve(palette.size() * 3);
  for (const auto& p : palette) {
    colormap.push_back(p.r);
    colormap.push_back(p.g);
    colormap.push_back(p.b);
  }
  if (!png_image_write_to_file(&image, path.c_str(), 0, indices.data(), 0,
                               colormap.data()))
    fail("indexed PNG write failed: ", image.message);
}

}  // namespace cluttermap::io
