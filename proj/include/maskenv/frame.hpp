#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "maskenv/error.hpp"
#include "maskenv/geometry.hpp"

namespace maskenv {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  bool operator==(const Rgb&) const = default;
};

/// Row-major image with value semantics.
template <typename Pixel>
class Image {
 public:
  Image() = default;
  Image(int height, int width, Pixel value = Pixel{})
      : height_(height), width_(width), pixels_(static_cast<std::size_t>(height) * width, value) {
    if (height < 0 || width < 0) throw Error(Errc::DimensionMismatch, "negative image size");
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  WindowSpec window() const noexcept { return {height_, width_}; }
  std::size_t size() const noexcept { return pixels_.size(); }

  Pixel& operator()(int row, int col) { return pixels_[static_cast<std::size_t>(row) * width_ + col]; }
  const Pixel& operator()(int row, int col) const {
    return pixels_[static_cast<std::size_t>(row) * width_ + col];
  }

  std::span<Pixel> pixels() noexcept { return pixels_; }
  std::span<const Pixel> pixels() const noexcept { return pixels_; }

  void fill(const Rect& r, Pixel value) {
    for (int row = r.top; row < r.top + r.height; ++row)
      for (int col = r.left; col < r.left + r.width; ++col) (*this)(row, col) = value;
  }

  bool operator==(const Image&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<Pixel> pixels_;
};

using RgbFrame = Image<Rgb>;
using GrayFrame = Image<std::uint8_t>;

/// Nonnegative rational n/d rounded half away from zero.
constexpr std::uint8_t round_ratio_u8(long long num, long long den) noexcept {
  const long long q = (2 * num + den) / (2 * den);
  return static_cast<std::uint8_t>(q > 255 ? 255 : q);
}

/// BT.601 luma with exact integer rounding: round((299 r + 587 g + 114 b) / 1000).
constexpr std::uint8_t luma(const Rgb& p) noexcept {
  return round_ratio_u8(299LL * p.r + 587LL * p.g + 114LL * p.b, 1000);
}

inline GrayFrame to_grayscale(const RgbFrame& frame) {
  GrayFrame out(frame.height(), frame.width());
  auto src = frame.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = luma(src[i]);
  return out;
}

/// Binary portable graymap (P5).
inline void write_pgm(std::ostream& os, const GrayFrame& frame) {
  os << "P5\n" << frame.width() << ' ' << frame.height() << "\n255\n";
  auto px = frame.pixels();
  os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!os) throw Error(Errc::IoFailure, "failed to write PGM");
}

inline GrayFrame read_pgm(std::istream& is) {
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  is >> magic >> width >> height >> maxval;
  if (!is || magic != "P5" || maxval != 255 || width < 0 || height < 0)
    throw Error(Errc::IoFailure, "not an 8-bit P5 graymap");
  is.get();
  GrayFrame frame(height, width);
  auto px = frame.pixels();
  is.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!is) throw Error(Errc::IoFailure, "truncated PGM body");
  return frame;
}

}  // namespace maskenv
