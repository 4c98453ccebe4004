#pragma once

// Mask placement, movement and the combined visibility map.
//
// A mask with scale l centered at row c covers rows
//   [c - floor(l/2), c + ceil(l/2) - 1]
// and likewise for columns. Under SlipThrough the center lives in
// [0, H) x [0, W) and the covered rows/columns wrap modulo the window.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "maskenv/error.hpp"
#include "maskenv/rng.hpp"

namespace maskenv {

struct WindowSpec {
  int height = 210;
  int width = 160;

  bool operator==(const WindowSpec&) const = default;
};

enum class Boundary : std::uint8_t { Stopping, SlipThrough };
enum class InitMode : std::uint8_t { Center, Random };

struct MaskSpec {
  int scale_h = 100;
  int scale_w = 100;
  int speed = 50;
  Boundary boundary_mode = Boundary::Stopping;
  InitMode init_mode = InitMode::Center;

  bool operator==(const MaskSpec&) const = default;
};

struct MaskState {
  int center_row = 0;
  int center_col = 0;

  bool operator==(const MaskState&) const = default;
};

struct MaskPlacement {
  MaskSpec spec;
  MaskState state;
};

/// Fixed order; the action encoding depends on it.
enum class Direction : std::uint8_t { Stay, L, R, U, D, LU, LD, RU, RD };
inline constexpr int kDirectionCount = 9;

inline constexpr std::array<Direction, kDirectionCount> kAllDirections = {
    Direction::Stay, Direction::L,  Direction::R,  Direction::U, Direction::D,
    Direction::LU,   Direction::LD, Direction::RU, Direction::RD};

inline std::string_view to_string(Direction d) {
  static constexpr std::array<std::string_view, kDirectionCount> names = {
      "Stay", "L", "R", "U", "D", "LU", "LD", "RU", "RD"};
  return names[static_cast<std::size_t>(d)];
}

inline std::optional<Direction> parse_direction(std::string_view name) {
  for (Direction d : kAllDirections)
    if (to_string(d) == name) return d;
  return std::nullopt;
}

inline std::string_view to_string(Boundary b) {
  return b == Boundary::Stopping ? "stop" : "slip";
}

inline std::optional<Boundary> parse_boundary(std::string_view name) {
  if (name == "stop" || name == "Stopping") return Boundary::Stopping;
  if (name == "slip" || name == "SlipThrough") return Boundary::SlipThrough;
  return std::nullopt;
}

inline std::string_view to_string(InitMode m) { return m == InitMode::Center ? "center" : "random"; }

inline std::optional<InitMode> parse_init_mode(std::string_view name) {
  if (name == "center" || name == "Center") return InitMode::Center;
  if (name == "random" || name == "Random") return InitMode::Random;
  return std::nullopt;
}

struct Rect {
  int top = 0;
  int left = 0;
  int height = 1;
  int width = 1;

  bool contains(int row, int col) const noexcept {
    return row >= top && row < top + height && col >= left && col < left + width;
  }
  long long area() const noexcept { return static_cast<long long>(height) * width; }

  bool operator==(const Rect&) const = default;
};

/// A mask rectangle after window clipping/wrapping: 1 to 4 disjoint pieces.
using RectPieces = std::vector<Rect>;

struct Offset {
  int drow = 0;
  int dcol = 0;

  bool operator==(const Offset&) const = default;
};

/// Per-axis displacement for a diagonal move: ceil(speed / sqrt(2)),
/// i.e. the smallest k >= 0 with 2 k^2 >= speed^2. Integer-only.
constexpr int diagonal_step(int speed) noexcept {
  if (speed <= 0) return 0;
  const long long target = static_cast<long long>(speed) * speed;
  long long k = speed / 2;  // lower bound, since (v/2)^2 * 2 <= v^2
  while (2 * k * k < target) ++k;
  return static_cast<int>(k);
}

constexpr Offset displacement(Direction dir, int speed) noexcept {
  const int d = diagonal_step(speed);
  switch (dir) {
    case Direction::Stay: return {0, 0};
    case Direction::L: return {0, -speed};
    case Direction::R: return {0, speed};
    case Direction::U: return {-speed, 0};
    case Direction::D: return {speed, 0};
    case Direction::LU: return {-d, -d};
    case Direction::LD: return {d, -d};
    case Direction::RU: return {-d, d};
    case Direction::RD: return {d, d};
  }
  return {0, 0};
}

/// Closed range of centers for which a mask of `scale` fits inside `extent`.
constexpr std::pair<int, int> contained_center_range(int scale, int extent) noexcept {
  return {scale / 2, extent - (scale + 1) / 2};
}

inline void validate(const MaskSpec& spec, const WindowSpec& window) {
  if (window.height < 1 || window.width < 1)
    throw Error(Errc::ConfigInvalid, "window dimensions must be positive");
  if (spec.scale_h < 1 || spec.scale_w < 1)
    throw Error(Errc::ConfigInvalid, "mask scale must be positive");
  if (spec.scale_h > window.height || spec.scale_w > window.width)
    throw Error(Errc::ConfigInvalid, "mask scale exceeds the window");
  if (spec.speed < 1) throw Error(Errc::ConfigInvalid, "mask speed must be at least 1");
}

namespace detail {

constexpr int floor_mod(int a, int n) noexcept {
  const int r = a % n;
  return r < 0 ? r + n : r;
}

struct Span1D {
  int start;
  int length;
};

// Interval [start, start + length) folded into [0, extent). length <= extent.
inline std::vector<Span1D> wrap_span(int start, int length, int extent) {
  const int s = floor_mod(start, extent);
  if (s + length <= extent) return {{s, length}};
  return {{s, extent - s}, {0, s + length - extent}};
}

inline std::optional<Span1D> clip_span(int start, int length, int extent) {
  const int lo = std::max(start, 0);
  const int hi = std::min(start + length, extent);
  if (hi <= lo) return std::nullopt;
  return Span1D{lo, hi - lo};
}

}  // namespace detail

/// Center-anchored rectangle clipped to the window; empty if fully outside.
inline std::optional<Rect> clipped_rect(int center_row, int center_col, int scale_h, int scale_w,
                                        const WindowSpec& window) {
  auto rows = detail::clip_span(center_row - scale_h / 2, scale_h, window.height);
  auto cols = detail::clip_span(center_col - scale_w / 2, scale_w, window.width);
  if (!rows || !cols) return std::nullopt;
  return Rect{rows->start, cols->start, rows->length, cols->length};
}

inline RectPieces mask_rect(const MaskState& state, const MaskSpec& spec, const WindowSpec& window) {
  if (spec.boundary_mode == Boundary::Stopping) {
    auto r = clipped_rect(state.center_row, state.center_col, spec.scale_h, spec.scale_w, window);
    return r ? RectPieces{*r} : RectPieces{};
  }
  const int h = std::min(spec.scale_h, window.height);
  const int w = std::min(spec.scale_w, window.width);
  RectPieces pieces;
  for (const auto& rs : detail::wrap_span(state.center_row - spec.scale_h / 2, h, window.height))
    for (const auto& cs : detail::wrap_span(state.center_col - spec.scale_w / 2, w, window.width))
      pieces.push_back(Rect{rs.start, cs.start, rs.length, cs.length});
  return pieces;
}

/// Clamp a desired center so the mask stays inside the window, per axis.
inline MaskState clamp_center(int row, int col, const MaskSpec& spec, const WindowSpec& window) {
  const auto [rlo, rhi] = contained_center_range(spec.scale_h, window.height);
  const auto [clo, chi] = contained_center_range(spec.scale_w, window.width);
  return {std::clamp(row, rlo, rhi), std::clamp(col, clo, chi)};
}

inline MaskState init_mask(const MaskSpec& spec, const WindowSpec& window, Rng& rng) {
  if (spec.scale_h > window.height || spec.scale_w > window.width || spec.scale_h < 1 ||
      spec.scale_w < 1)
    throw Error(Errc::NoValidPlacement, "mask of " + std::to_string(spec.scale_h) + "x" +
                                            std::to_string(spec.scale_w) +
                                            " cannot be contained in the window");
  if (spec.init_mode == InitMode::Center) return {window.height / 2, window.width / 2};
  const auto [rlo, rhi] = contained_center_range(spec.scale_h, window.height);
  const auto [clo, chi] = contained_center_range(spec.scale_w, window.width);
  const int row = static_cast<int>(rng.uniform_int(rlo, rhi));
  const int col = static_cast<int>(rng.uniform_int(clo, chi));
  return {row, col};
}

inline MaskState step_mask(const MaskState& state, Direction dir, const MaskSpec& spec,
                           const WindowSpec& window) {
  const Offset off = displacement(dir, spec.speed);
  const int row = state.center_row + off.drow;
  const int col = state.center_col + off.dcol;
  if (spec.boundary_mode == Boundary::Stopping) return clamp_center(row, col, spec, window);
  return {detail::floor_mod(row, window.height), detail::floor_mod(col, window.width)};
}

/// True when `state` satisfies the boundary-mode invariant for `spec`.
inline bool state_valid(const MaskState& state, const MaskSpec& spec, const WindowSpec& window) {
  if (spec.boundary_mode == Boundary::Stopping) return clamp_center(state.center_row, state.center_col, spec, window) == state;
  return state.center_row >= 0 && state.center_row < window.height && state.center_col >= 0 &&
         state.center_col < window.width;
}

class VisibilityMap {
 public:
  VisibilityMap() = default;
  VisibilityMap(const WindowSpec& window, bool value = false)
      : window_(window),
        bits_(static_cast<std::size_t>(window.height) * window.width, value ? 1 : 0) {}

  const WindowSpec& window() const noexcept { return window_; }
  int height() const noexcept { return window_.height; }
  int width() const noexcept { return window_.width; }

  bool at(int row, int col) const { return bits_[index(row, col)] != 0; }
  void set(int row, int col, bool value = true) { bits_[index(row, col)] = value ? 1 : 0; }

  void fill(const Rect& r) {
    for (int row = r.top; row < r.top + r.height; ++row) {
      auto first = bits_.begin() + static_cast<std::ptrdiff_t>(index(row, r.left));
      std::fill(first, first + r.width, std::uint8_t{1});
    }
  }

  long long popcount() const noexcept {
    return std::count(bits_.begin(), bits_.end(), std::uint8_t{1});
  }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  VisibilityMap& operator|=(const VisibilityMap& other) {
    if (other.window_ != window_) throw Error(Errc::DimensionMismatch, "visibility maps differ in size");
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= other.bits_[i];
    return *this;
  }

  bool operator==(const VisibilityMap&) const = default;

 private:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * window_.width + col;
  }

  WindowSpec window_{};
  std::vector<std::uint8_t> bits_;
};

/// Union of every mask's (possibly wrapped) rectangle.
inline VisibilityMap visibility_map(std::span<const MaskPlacement> masks, const WindowSpec& window) {
  VisibilityMap vis(window);
  for (const auto& m : masks)
    for (const Rect& r : mask_rect(m.state, m.spec, window)) vis.fill(r);
  return vis;
}

}  // namespace maskenv
