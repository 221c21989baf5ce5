/*
 * Copyright 2026 The Protoscope Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "protoscope/raster.h"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>

#include "protoscope/error.h"

namespace protoscope {
namespace {

std::vector<std::uint8_t> ReadAllBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kUnreadableFile, path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool IsPng(const std::vector<std::uint8_t>& bytes) {
  static constexpr std::uint8_t kSig[8] = {0x89, 'P',  'N',  'G',
                                           '\r', '\n', 0x1A, '\n'};
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kSig, 8) == 0;
}

DecodedRaster DecodePng(const std::vector<std::uint8_t>& bytes,
                        const std::string& name) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::kUnreadableFile, name + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  // Alpha is read and then dropped rather than composited.
  if (color) {
    image.format = alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
  } else {
    image.format = alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY;
  }
  const int stored = PNG_IMAGE_SAMPLE_CHANNELS(image.format);
  if (image.width == 0 || image.height == 0) {
    png_image_free(&image);
    throw Error(ErrorCode::kUnreadableFile, name + ": zero-sized image");
  }
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::kUnreadableFile, name + ": " + message);
  }
  DecodedRaster out;
  out.height = static_cast<int>(image.height);
  out.width = static_cast<int>(image.width);
  out.channels = color ? 3 : 1;
  const std::size_t pixels = static_cast<std::size_t>(out.height) * out.width;
  out.bytes.resize(pixels * out.channels);
  for (std::size_t i = 0; i < pixels; ++i) {
    for (int c = 0; c < out.channels; ++c) {
      out.bytes[i * out.channels + c] = buffer[i * stored + c];
    }
  }
  return out;
}

// Binary PPM (P6). Only maxval 255 is supported.
DecodedRaster DecodePpm(const std::vector<std::uint8_t>& bytes,
                        const std::string& name) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw Error(ErrorCode::kUnreadableFile, name + ": bad PPM header");
    }
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (1L << 24)) {
        throw Error(ErrorCode::kUnreadableFile, name + ": bad PPM header");
      }
      ++pos;
    }
    return v;
  };
  const long width = next_token();
  const long height = next_token();
  const long maxval = next_token();
  if (width == 0 || height == 0) {
    throw Error(ErrorCode::kUnreadableFile, name + ": zero-sized image");
  }
  if (maxval != 255) {
    throw Error(ErrorCode::kUnsupportedFormat,
                name + ": PPM maxval " + std::to_string(maxval));
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw Error(ErrorCode::kUnreadableFile, name + ": bad PPM header");
  }
  ++pos;
  const std::size_t need = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() - pos < need) {
    throw Error(ErrorCode::kUnreadableFile, name + ": truncated PPM data");
  }
  DecodedRaster out;
  out.height = static_cast<int>(height);
  out.width = static_cast<int>(width);
  out.channels = 3;
  out.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return out;
}

void WritePng(const std::filesystem::path& path, int height, int width,
              bool color, const std::vector<std::uint8_t>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0,
                               nullptr)) {
    throw Error(ErrorCode::kIoError, path.string() + ": " + image.message);
  }
}

double Lerp(double a, double b, double t) { return a + (b - a) * t; }

struct Tap {
  int i0;
  int i1;
  double frac;
};

// Half-pixel-center source coordinate for output index i, clamped.
Tap ResizeTap(int i, int in_size, int out_size) {
  const double scale = static_cast<double>(in_size) / out_size;
  double s = (i + 0.5) * scale - 0.5;
  s = std::clamp(s, 0.0, static_cast<double>(in_size - 1));
  const int i0 = static_cast<int>(std::floor(s));
  return {i0, std::min(i0 + 1, in_size - 1), s - i0};
}

float Clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

RasterImage::RasterImage(int height, int width)
    : height_(height), width_(width) {
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be >= 1");
  }
  data_.assign(static_cast<std::size_t>(height) * width * kChannels, 0.0f);
}

RasterImage::RasterImage(int height, int width, std::vector<float> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be >= 1");
  }
  if (data_.size() != static_cast<std::size_t>(height) * width * kChannels) {
    throw Error(ErrorCode::kDimensionMismatch, "pixel buffer size");
  }
}

std::vector<std::uint8_t> RasterImage::ToBytes() const {
  std::vector<std::uint8_t> out(data_.size());
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const double v = std::clamp(static_cast<double>(data_[i]), 0.0, 1.0);
    out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}

RasterImage RasterImage::FromBytes(int height, int width,
                                   const std::vector<std::uint8_t>& rgb) {
  RasterImage img(height, width);
  if (rgb.size() != img.data_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "byte buffer size");
  }
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    img.data_[i] = static_cast<float>(rgb[i] / 255.0);
  }
  return img;
}

Mask::Mask(int height, int width, bool value) : height_(height), width_(width) {
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::kInvalidArgument, "mask dimensions must be >= 1");
  }
  data_.assign(static_cast<std::size_t>(height) * width, value ? 1 : 0);
}

std::size_t Mask::CountTrue() const {
  return static_cast<std::size_t>(
      std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

DecodedRaster DecodeRasterFile(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = ReadAllBytes(path);
  const std::string name = path.string();
  if (IsPng(bytes)) return DecodePng(bytes, name);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
    return DecodePpm(bytes, name);
  }
  if (bytes.empty()) {
    throw Error(ErrorCode::kUnreadableFile, name + ": empty file");
  }
  throw Error(ErrorCode::kUnsupportedFormat, name);
}

RasterImage LoadImage(const std::filesystem::path& path) {
  DecodedRaster raw = DecodeRasterFile(path);
  if (raw.channels == 3) {
    return RasterImage::FromBytes(raw.height, raw.width, raw.bytes);
  }
  std::vector<std::uint8_t> rgb(raw.bytes.size() * 3);
  for (std::size_t i = 0; i < raw.bytes.size(); ++i) {
    rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = raw.bytes[i];
  }
  return RasterImage::FromBytes(raw.height, raw.width, rgb);
}

void SaveImage(const RasterImage& img, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = img.ToBytes();
  if (path.extension() == ".ppm") {
    std::ofstream out(path, std::ios::binary);
    out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIoError, path.string());
    return;
  }
  WritePng(path, img.height(), img.width(), true, bytes);
}

void SaveMaskPng(const Mask& mask, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(mask.data().size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = mask.data()[i] ? 255 : 0;
  }
  WritePng(path, mask.height(), mask.width(), false, bytes);
}

RasterImage ResizeBilinear(const RasterImage& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw Error(ErrorCode::kInvalidArgument, "resize target must be >= 1");
  }
  RasterImage out(out_h, out_w);
  std::vector<Tap> xs(out_w);
  for (int x = 0; x < out_w; ++x) xs[x] = ResizeTap(x, img.width(), out_w);
  for (int y = 0; y < out_h; ++y) {
    const Tap ty = ResizeTap(y, img.height(), out_h);
    for (int x = 0; x < out_w; ++x) {
      const Tap& tx = xs[x];
      for (int c = 0; c < RasterImage::kChannels; ++c) {
        const double top =
            Lerp(img.at(ty.i0, tx.i0, c), img.at(ty.i0, tx.i1, c), tx.frac);
        const double bottom =
            Lerp(img.at(ty.i1, tx.i0, c), img.at(ty.i1, tx.i1, c), tx.frac);
        out.at(y, x, c) = static_cast<float>(Lerp(top, bottom, ty.frac));
      }
    }
  }
  return out;
}

std::vector<double> ResizeBilinearPlane(const std::vector<double>& plane,
                                        int in_h, int in_w, int out_h,
                                        int out_w) {
  if (in_h < 1 || in_w < 1 || out_h < 1 || out_w < 1) {
    throw Error(ErrorCode::kInvalidArgument, "plane dimensions must be >= 1");
  }
  if (plane.size() != static_cast<std::size_t>(in_h) * in_w) {
    throw Error(ErrorCode::kDimensionMismatch, "plane size");
  }
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
  for (int y = 0; y < out_h; ++y) {
    const Tap ty = ResizeTap(y, in_h, out_h);
    for (int x = 0; x < out_w; ++x) {
      const Tap tx = ResizeTap(x, in_w, out_w);
      const double top = Lerp(plane[ty.i0 * in_w + tx.i0],
                              plane[ty.i0 * in_w + tx.i1], tx.frac);
      const double bottom = Lerp(plane[ty.i1 * in_w + tx.i0],
                                 plane[ty.i1 * in_w + tx.i1], tx.frac);
      out[static_cast<std::size_t>(y) * out_w + x] = Lerp(top, bottom, ty.frac);
    }
  }
  return out;
}

RasterImage Rotate(const RasterImage& img, double angle_degrees) {
  const int h = img.height();
  const int w = img.width();
  RasterImage out(h, w);
  const double theta = angle_degrees * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double cx = (w - 1) / 2.0;
  const double cy = (h - 1) / 2.0;
  // Sample positions this close outside the grid snap to the border, so
  // multiples of 90 degrees do not lose edge pixels to rounding.
  constexpr double kTol = 1e-6;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      double sx = cx + dx * cos_t - dy * sin_t;
      double sy = cy + dx * sin_t + dy * cos_t;
      if (sx < -kTol || sy < -kTol || sx > w - 1 + kTol || sy > h - 1 + kTol) {
        continue;
      }
      sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
      sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      for (int c = 0; c < RasterImage::kChannels; ++c) {
        const double top = Lerp(img.at(y0, x0, c), img.at(y0, x1, c), fx);
        const double bottom = Lerp(img.at(y1, x0, c), img.at(y1, x1, c), fx);
        out.at(y, x, c) = static_cast<float>(Lerp(top, bottom, fy));
      }
    }
  }
  return out;
}

RasterImage FlipHorizontal(const RasterImage& img) {
  RasterImage out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < RasterImage::kChannels; ++c) {
        out.at(y, x, c) = img.at(y, img.width() - 1 - x, c);
      }
    }
  }
  return out;
}

RasterImage Crop(const RasterImage& img, int top, int left, int height,
                 int width) {
  if (top < 0 || left < 0 || height < 1 || width < 1 ||
      top + height > img.height() || left + width > img.width()) {
    std::ostringstream msg;
    msg << "crop (" << top << ", " << left << ", " << height << ", " << width
        << ") outside " << img.height() << "x" << img.width();
    throw Error(ErrorCode::kOutOfBounds, msg.str());
  }
  RasterImage out(height, width);
  for (int y = 0; y < height; ++y) {
    const float* src =
        &img.data()[(static_cast<std::size_t>(top + y) * img.width() + left) *
                    RasterImage::kChannels];
    std::copy(src, src + static_cast<std::size_t>(width) * 3, &out.at(y, 0, 0));
  }
  return out;
}

RasterImage AdjustColor(const RasterImage& img, double brightness,
                        double contrast, double saturation) {
  if (!(brightness > 0.0) || !(contrast > 0.0) || !(saturation >= 0.0) ||
      !std::isfinite(brightness) || !std::isfinite(contrast) ||
      !std::isfinite(saturation)) {
    throw Error(ErrorCode::kInvalidArgument, "color factor out of range");
  }
  RasterImage out = img;
  auto& d = out.data();
  const std::size_t pixels = d.size() / 3;
  auto luma = [&](std::size_t p) {
    return kLumaR * d[3 * p] + kLumaG * d[3 * p + 1] + kLumaB * d[3 * p + 2];
  };
  if (brightness != 1.0) {
    for (float& v : d) v = Clamp01(v * brightness);
  }
  if (contrast != 1.0) {
    double mean = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) mean += luma(p);
    mean /= static_cast<double>(pixels);
    for (float& v : d) v = Clamp01(mean + contrast * (v - mean));
  }
  if (saturation != 1.0) {
    for (std::size_t p = 0; p < pixels; ++p) {
      const double gray = luma(p);
      for (int c = 0; c < 3; ++c) {
        d[3 * p + c] = Clamp01(gray + saturation * (d[3 * p + c] - gray));
      }
    }
  }
  return out;
}

}  // namespace protoscope
