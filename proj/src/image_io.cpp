// Copyright 2026 The hessl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hessl/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include <openssl/evp.h>
#include <png.h>
#include <tiffio.h>

namespace hessl::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const std::string& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) fail(ErrorKind::kIo, "cannot open '" + path + "'");
  return f;
}

bool has_png_signature(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}
void png_warning_fn(png_structp, png_const_charp) {}

struct PngRead {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngRead() { png_destroy_read_struct(&png, &info, nullptr); }
};
struct PngWrite {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWrite() { png_destroy_write_struct(&png, &info); }
};

// Decodes to 8- or 16-bit samples (host order for 16-bit), expanding
// palettes and low bit depths, keeping the channel layout.
DecodedPng decode(const std::string& path, bool to_rgb) {
  File f = open_file(path, "rb");
  std::string err;
  PngRead r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  r.info = png_create_info_struct(r.png);
  if (!r.png || !r.info) fail(ErrorKind::kIo, "libpng initialisation failed");
  DecodedPng out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(r.png))) fail(ErrorKind::kIo, "cannot decode PNG '" + path + "': " + err);
  png_init_io(r.png, f.get());
  png_read_info(r.png, r.info);
  const int color = png_get_color_type(r.png, r.info);
  const int depth = png_get_bit_depth(r.png, r.info);
  png_set_expand(r.png);
  if (depth == 16) png_set_swap(r.png);
  if (to_rgb) {
    png_set_strip_alpha(r.png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(r.png);
  }
  png_read_update_info(r.png, r.info);
  out.width = static_cast<int>(png_get_image_width(r.png, r.info));
  out.height = static_cast<int>(png_get_image_height(r.png, r.info));
  out.channels = png_get_channels(r.png, r.info);
  out.bit_depth = png_get_bit_depth(r.png, r.info);
  const std::size_t stride = png_get_rowbytes(r.png, r.info);
  out.bytes.resize(stride * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) rows[static_cast<std::size_t>(y)] = out.bytes.data() + stride * static_cast<std::size_t>(y);
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return out;
}

void encode(const std::string& path, int width, int height, int color_type, int bit_depth,
            const std::vector<std::uint8_t>& bytes) {
  File f = open_file(path, "wb");
  std::string err;
  PngWrite w;
  w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  w.info = png_create_info_struct(w.png);
  if (!w.png || !w.info) fail(ErrorKind::kIo, "libpng initialisation failed");
  const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : color_type == PNG_COLOR_TYPE_RGBA ? 4 : 1;
  const std::size_t stride = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y)
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(bytes.data() + stride * static_cast<std::size_t>(y));
  if (setjmp(png_jmpbuf(w.png))) fail(ErrorKind::kIo, "cannot encode PNG '" + path + "': " + err);
  png_init_io(w.png, f.get());
  png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(w.png, 6);
  png_write_info(w.png, w.info);
  if (bit_depth == 16) png_set_swap(w.png);
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

RgbImage read_png(const std::string& path) {
  const DecodedPng d = decode(path, true);
  RgbImage img(d.width, d.height);
  const std::size_t n = static_cast<std::size_t>(d.width) * d.height * 3;
  if (d.bit_depth == 16) {
    const auto* s = reinterpret_cast<const std::uint16_t*>(d.bytes.data());
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = s[i] * (255.0 / 65535.0);
  } else {
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = d.bytes[i];
  }
  return img;
}

struct TiffCloser {
  void operator()(TIFF* t) const { if (t) TIFFClose(t); }
};

RgbImage read_tiff(const std::string& path) {
  TIFFSetWarningHandler(nullptr);
  std::unique_ptr<TIFF, TiffCloser> tif(TIFFOpen(path.c_str(), "r"));
  if (!tif) fail(ErrorKind::kIo, "cannot open TIFF '" + path + "'");
  std::uint32_t w = 0, h = 0;
  std::uint16_t bits = 8, spp = 1, planar = PLANARCONFIG_CONTIG, photometric = PHOTOMETRIC_RGB;
  TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
  TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bits);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &planar);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PHOTOMETRIC, &photometric);
  RgbImage img(static_cast<int>(w), static_cast<int>(h));
  const bool direct = (bits == 8 || bits == 16) && planar == PLANARCONFIG_CONTIG && !TIFFIsTiled(tif.get()) &&
                      ((spp >= 3 && photometric == PHOTOMETRIC_RGB) || (spp <= 2 && photometric == PHOTOMETRIC_MINISBLACK));
  if (direct) {
    std::vector<std::uint8_t> line(static_cast<std::size_t>(TIFFScanlineSize(tif.get())));
    const double scale = bits == 16 ? 255.0 / 65535.0 : 1.0;
    for (std::uint32_t y = 0; y < h; ++y) {
      if (TIFFReadScanline(tif.get(), line.data(), y, 0) < 0) fail(ErrorKind::kIo, "cannot read TIFF '" + path + "'");
      for (std::uint32_t x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) {
          const std::size_t s = static_cast<std::size_t>(x) * spp + (spp >= 3 ? c : 0);
          const double v = bits == 16 ? reinterpret_cast<const std::uint16_t*>(line.data())[s] : line[s];
          img.at(static_cast<int>(x), static_cast<int>(y), c) = v * scale;
        }
    }
    return img;
  }
  std::vector<std::uint32_t> raster(static_cast<std::size_t>(w) * h);
  if (!TIFFReadRGBAImageOriented(tif.get(), w, h, raster.data(), ORIENTATION_TOPLEFT, 0))
    fail(ErrorKind::kIo, "unsupported TIFF layout in '" + path + "'");
  for (std::size_t i = 0; i < raster.size(); ++i) {
    img.pixels[3 * i] = TIFFGetR(raster[i]);
    img.pixels[3 * i + 1] = TIFFGetG(raster[i]);
    img.pixels[3 * i + 2] = TIFFGetB(raster[i]);
  }
  return img;
}

std::uint8_t quantize8(double v, double i0) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v / i0 * 255.0, 0.0, 255.0)));
}

}  // namespace

RgbImage read_image(const std::string& path) {
  if (!file_exists(path)) fail(ErrorKind::kIo, "no such file '" + path + "'");
  return has_png_signature(path) ? read_png(path) : read_tiff(path);
}

void write_png_rgb8(const std::string& path, const RgbImage& img) {
  std::vector<std::uint8_t> bytes(img.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize8(img.pixels[i], img.i0[i % 3]);
  encode(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 8, bytes);
}

void write_png_gray16(const std::string& path, const Plane<float>& plane) {
  std::vector<std::uint8_t> bytes(plane.size() * 2);
  auto* s = reinterpret_cast<std::uint16_t*>(bytes.data());
  for (std::size_t i = 0; i < plane.size(); ++i)
    s[i] = static_cast<std::uint16_t>(std::lround(std::clamp(static_cast<double>(plane.data[i]), 0.0, 1.0) * 65535.0));
  encode(path, plane.width, plane.height, PNG_COLOR_TYPE_GRAY, 16, bytes);
}

void write_png_rgba8(const std::string& path, int width, int height, std::span<const std::uint8_t> rgba) {
  if (rgba.size() != static_cast<std::size_t>(width) * height * 4) fail(ErrorKind::kInvalidInput, "RGBA buffer size mismatch");
  encode(path, width, height, PNG_COLOR_TYPE_RGBA, 8, std::vector<std::uint8_t>(rgba.begin(), rgba.end()));
}

void write_tiff_rgb(const std::string& path, const RgbImage& img, int bits_per_sample) {
  if (bits_per_sample != 8 && bits_per_sample != 16) fail(ErrorKind::kInvalidInput, "TIFF depth must be 8 or 16");
  std::unique_ptr<TIFF, TiffCloser> tif(TIFFOpen(path.c_str(), "w"));
  if (!tif) fail(ErrorKind::kIo, "cannot create TIFF '" + path + "'");
  TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(img.width));
  TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(img.height));
  TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, 3);
  TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, bits_per_sample);
  TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_RGB);
  TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, 1);
  const double full = bits_per_sample == 16 ? 65535.0 : 255.0;
  std::vector<std::uint8_t> line(static_cast<std::size_t>(img.width) * 3 * (bits_per_sample / 8));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(img.at(x, y, c) / img.i0[c], 0.0, 1.0) * full;
        const std::size_t s = static_cast<std::size_t>(x) * 3 + c;
        if (bits_per_sample == 16)
          reinterpret_cast<std::uint16_t*>(line.data())[s] = static_cast<std::uint16_t>(std::lround(v));
        else
          line[s] = static_cast<std::uint8_t>(std::lround(v));
      }
    if (TIFFWriteScanline(tif.get(), line.data(), static_cast<std::uint32_t>(y), 0) < 0)
      fail(ErrorKind::kIo, "cannot write TIFF '" + path + "'");
  }
}

Plane<std::uint16_t> read_png_gray16(const std::string& path) {
  const DecodedPng d = decode(path, false);
  if (d.channels != 1 || d.bit_depth != 16) fail(ErrorKind::kIo, "'" + path + "' is not a 16-bit grey PNG");
  Plane<std::uint16_t> p(d.width, d.height);
  std::copy_n(reinterpret_cast<const std::uint16_t*>(d.bytes.data()), p.size(), p.data.begin());
  return p;
}

DecodedPng decode_png(const std::string& path) { return decode(path, false); }

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path + "'");
  out << content;
  if (!out) fail(ErrorKind::kIo, "short write to '" + path + "'");
}

bool file_exists(const std::string& path) { return std::filesystem::is_regular_file(path); }

std::string sha256_file(const std::string& path) {
  const std::string data = read_text(path);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr))
    fail(ErrorKind::kIo, "SHA-256 failed for '" + path + "'");
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

}  // namespace hessl::io
