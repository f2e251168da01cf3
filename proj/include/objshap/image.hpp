/*
 * Copyright 2026 The objshap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <png.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "objshap/digest.hpp"
#include "objshap/error.hpp"

namespace objshap {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// 8-bit interleaved RGB raster, row-major.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {})
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "image dimensions must be positive");
    }
    data_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3) {
      data_[i] = fill.r;
      data_[i + 1] = fill.g;
      data_[i + 2] = fill.b;
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * height_;
  }

  Rgb at(int x, int y) const {
    const std::size_t i = offset(x, y);
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  Rgb at(std::size_t index) const {
    return {data_[3 * index], data_[3 * index + 1], data_[3 * index + 2]};
  }
  void set(int x, int y, Rgb c) { set(static_cast<std::size_t>(y) * width_ + x, c); }
  void set(std::size_t index, Rgb c) {
    data_[3 * index] = c.r;
    data_[3 * index + 1] = c.g;
    data_[3 * index + 2] = c.b;
  }

  std::span<const std::uint8_t> bytes() const { return data_; }
  std::span<std::uint8_t> bytes() { return data_; }

  // SHA-256 over dimensions and raw pixels; independent of any encoder.
  std::string digest() const {
    std::vector<std::uint8_t> buf(8);
    const auto w = static_cast<std::uint32_t>(width_);
    const auto h = static_cast<std::uint32_t>(height_);
    for (int k = 0; k < 4; ++k) {
      buf[k] = static_cast<std::uint8_t>(w >> (8 * k));
      buf[4 + k] = static_cast<std::uint8_t>(h >> (8 * k));
    }
    buf.insert(buf.end(), data_.begin(), data_.end());
    return Sha256Hex(buf);
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return 3 * (static_cast<std::size_t>(y) * width_ + x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Lossless PNG (8-bit RGB). Output bytes are a pure function of the pixels.
inline std::vector<std::uint8_t> EncodePng(const Image& image) {
  png_image desc;
  std::memset(&desc, 0, sizeof(desc));
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(image.width());
  desc.height = static_cast<png_uint_32>(image.height());
  desc.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&desc, nullptr, &size, 0,
                                 image.bytes().data(), 0, nullptr)) {
    throw Error(ErrorCode::kIoError,
                std::string("png sizing failed: ") + desc.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&desc, out.data(), &size, 0,
                                 image.bytes().data(), 0, nullptr)) {
    throw Error(ErrorCode::kIoError,
                std::string("png encoding failed: ") + desc.message);
  }
  out.resize(size);
  return out;
}

// Decodes any PNG to 8-bit RGB. Alpha is composited onto black.
inline Image DecodePng(std::span<const std::uint8_t> bytes) {
  png_image desc;
  std::memset(&desc, 0, sizeof(desc));
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&desc, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::kSchemaError,
                std::string("cannot decode image: ") + desc.message);
  }
  desc.format = PNG_FORMAT_RGB;
  Image image(static_cast<int>(desc.width), static_cast<int>(desc.height));
  png_color black{0, 0, 0};
  if (!png_image_finish_read(&desc, &black, image.bytes().data(), 0,
                             nullptr)) {
    png_image_free(&desc);
    throw Error(ErrorCode::kSchemaError,
                std::string("cannot decode image: ") + desc.message);
  }
  return image;
}

inline std::vector<std::uint8_t> ReadFileBytes(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void WriteFileBytes(const std::filesystem::path& path,
                           std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

inline void WriteFileText(const std::filesystem::path& path,
                          std::string_view text) {
  WriteFileBytes(path, std::span<const std::uint8_t>(
                           reinterpret_cast<const std::uint8_t*>(text.data()),
                           text.size()));
}

}  // namespace objshap
