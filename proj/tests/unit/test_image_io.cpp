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


#include <cmath>

#include "doctest.h"
#include "hessl/image_io.hpp"
#include "support/scratch.hpp"

using namespace hessl;

TEST_CASE("8-bit PNG round trip") {
  const auto dir = testing::scratch_dir("io_png8");
  RgbImage img(7, 5);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<double>((i * 37) % 256);
  const std::string path = (dir / "a.png").string();
  io::write_png_rgb8(path, img);
  const RgbImage back = io::read_image(path);
  CHECK(back.width == 7);
  CHECK(back.height == 5);
  CHECK(back.pixels == img.pixels);
  CHECK(back.i0 == Rgb{255, 255, 255});
}

TEST_CASE("16-bit greyscale PNG keeps concentration resolution") {
  const auto dir = testing::scratch_dir("io_png16");
  Plane<float> p(4, 3);
  for (std::size_t i = 0; i < p.size(); ++i) p.data[i] = static_cast<float>(i) / 11.0f;
  const std::string path = (dir / "h.png").string();
  io::write_png_gray16(path, p);
  const auto back = io::read_png_gray16(path);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(back.data[i] / 65535.0 - p.data[i]) <= 0.5 / 65535.0 + 1e-7);
  const auto raw = io::decode_png(path);
  CHECK(raw.bit_depth == 16);
  CHECK(raw.channels == 1);
}

TEST_CASE("TIFF round trip at both depths") {
  const auto dir = testing::scratch_dir("io_tiff");
  RgbImage img(6, 4);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<double>((i * 53) % 256);
  io::write_tiff_rgb((dir / "a8.tif").string(), img, 8);
  CHECK(io::read_image((dir / "a8.tif").string()).pixels == img.pixels);
  io::write_tiff_rgb((dir / "a16.tif").string(), img, 16);
  const RgbImage b = io::read_image((dir / "a16.tif").string());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(b.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-3));
}

TEST_CASE("missing file is an I/O error naming the path") {
  try {
    io::read_image("/nonexistent/slide.png");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
    CHECK(std::string(e.what()).find("/nonexistent/slide.png") != std::string::npos);
  }
}

TEST_CASE("SHA-256 of a known message") {
  const auto dir = testing::scratch_dir("io_sha");
  io::write_text((dir / "abc.txt").string(), "abc");
  CHECK(io::sha256_file((dir / "abc.txt").string()) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(io::read_text((dir / "abc.txt").string()) == "abc");
}

TEST_CASE("error kinds map to exit codes") {
  CHECK(exit_code(ErrorKind::kInsufficientTissue) == 2);
  CHECK(exit_code(ErrorKind::kDegenerateStain) == 3);
  CHECK(exit_code(ErrorKind::kBasisMismatch) == 4);
  CHECK(exit_code(ErrorKind::kAnnotation) == 5);
  CHECK(exit_code(ErrorKind::kConfiguration) == 6);
  CHECK(exit_code(ErrorKind::kIo) == 1);
  CHECK(std::string(kind_name(ErrorKind::kNumericFault)).size() > 0);
}
