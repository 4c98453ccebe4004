#pragma once

// Native frame -> agent observation:
//   grayscale -> hard mask or resolution decay (native size) -> 84x84 -> stack of 4.

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "maskenv/error.hpp"
#include "maskenv/frame.hpp"
#include "maskenv/geometry.hpp"

namespace maskenv {

inline constexpr int kObservationSize = 84;
inline constexpr int kStackDepth = 4;

inline GrayFrame apply_hard_mask(const GrayFrame& frame, const VisibilityMap& vis,
                                 std::uint8_t fill = 0) {
  if (frame.window() != vis.window())
    throw Error(Errc::DimensionMismatch, "frame and visibility map differ in size");
  GrayFrame out = frame;
  auto px = out.pixels();
  auto bits = vis.bits();
  for (std::size_t i = 0; i < px.size(); ++i)
    if (!bits[i]) px[i] = fill;
  return out;
}

/// Three nested layers around one mask: the mask itself, a rectangle
/// `middle_scale_factor` times larger about the same center, and the rest.
struct DecaySpec {
  bool enabled = false;
  double middle_scale_factor = 1.5;
  std::array<double, 3> resolutions = {1.0, 0.5, 0.25};

  /// Pixelation block edge for layer `layer` (0-based): 1 / resolution.
  int block_size(int layer) const {
    return static_cast<int>(std::lround(1.0 / resolutions[static_cast<std::size_t>(layer)]));
  }

  void validate() const {
    const auto& r = resolutions;
    if (!(r[0] <= 1.0 && r[0] > r[1] && r[1] > r[2] && r[2] > 0.0))
      throw Error(Errc::ConfigInvalid, "decay resolutions must satisfy 1 >= r1 > r2 > r3 > 0");
    if (!(middle_scale_factor > 1.0))
      throw Error(Errc::ConfigInvalid, "decay middle_scale_factor must exceed 1");
    for (int layer = 0; layer < 3; ++layer) {
      const double inv = 1.0 / r[static_cast<std::size_t>(layer)];
      if (std::abs(inv - std::round(inv)) > 1e-9)
        throw Error(Errc::ConfigInvalid, "decay resolution reciprocals must be integers");
    }
  }

  bool operator==(const DecaySpec&) const = default;
};

/// Layer-2 extent for a mask scale: round half away from zero.
inline int middle_layer_scale(int scale, double factor) {
  return static_cast<int>(std::lround(scale * factor));
}

/// Per-pixel layer index (1, 2 or 3) for a single fovea.
inline Image<std::uint8_t> decay_layers(const WindowSpec& window, const MaskPlacement& mask,
                                        const DecaySpec& decay) {
  Image<std::uint8_t> layers(window.height, window.width, 3);
  const int mid_h = middle_layer_scale(mask.spec.scale_h, decay.middle_scale_factor);
  const int mid_w = middle_layer_scale(mask.spec.scale_w, decay.middle_scale_factor);
  if (auto mid = clipped_rect(mask.state.center_row, mask.state.center_col, mid_h, mid_w, window))
    layers.fill(*mid, 2);
  for (const Rect& r : mask_rect(mask.state, mask.spec, window)) layers.fill(r, 1);
  return layers;
}

/// Pixelates each layer with its block size. Block grids are anchored at
/// (0, 0); a block straddling a layer boundary averages only the pixels of
/// the layer being processed.
inline GrayFrame apply_resolution_decay(const GrayFrame& frame, const MaskPlacement& mask,
                                        const DecaySpec& decay) {
  decay.validate();
  const WindowSpec window = frame.window();
  const auto layers = decay_layers(window, mask, decay);
  GrayFrame out = frame;
  for (int layer = 1; layer <= 3; ++layer) {
    const int bs = decay.block_size(layer - 1);
    if (bs == 1) continue;
    for (int by = 0; by < window.height; by += bs) {
      for (int bx = 0; bx < window.width; bx += bs) {
        const int y_end = std::min(by + bs, window.height);
        const int x_end = std::min(bx + bs, window.width);
        long long sum = 0, count = 0;
        for (int y = by; y < y_end; ++y)
          for (int x = bx; x < x_end; ++x)
            if (layers(y, x) == layer) {
              sum += frame(y, x);
              ++count;
            }
        if (count == 0) continue;
        const std::uint8_t mean = round_ratio_u8(sum, count);
        for (int y = by; y < y_end; ++y)
          for (int x = bx; x < x_end; ++x)
            if (layers(y, x) == layer) out(y, x) = mean;
      }
    }
  }
  return out;
}

inline GrayFrame apply_resolution_decay(const GrayFrame& frame, std::span<const MaskPlacement> masks,
                                        const DecaySpec& decay) {
  if (masks.size() > 1)
    throw Error(Errc::DecayWithMultipleMasks, "resolution decay is defined for a single mask");
  if (masks.empty()) throw Error(Errc::ConfigInvalid, "resolution decay needs a mask");
  return apply_resolution_decay(frame, masks.front(), decay);
}

/// Area-weighted resampling. In units where one source pixel is
/// out_h x out_w, each output pixel spans src_h x src_w, so the weights are
/// integer overlaps and the result is an exactly rounded rational mean.
inline GrayFrame downscale(const GrayFrame& frame, int out_h, int out_w) {
  const int src_h = frame.height(), src_w = frame.width();
  if (src_h < 1 || src_w < 1 || out_h < 1 || out_w < 1)
    throw Error(Errc::DimensionMismatch, "downscale needs non-empty images");

  struct Tap {
    int index;
    long long weight;
  };
  auto taps_for = [](int out, int src) {
    std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      const long long lo = static_cast<long long>(o) * src, hi = lo + src;
      for (int s = static_cast<int>(lo / out); s < src && static_cast<long long>(s) * out < hi; ++s) {
        const long long slo = static_cast<long long>(s) * out, shi = slo + out;
        const long long w = std::min(hi, shi) - std::max(lo, slo);
        if (w > 0) taps[static_cast<std::size_t>(o)].push_back({s, w});
      }
    }
    return taps;
  };
  const auto row_taps = taps_for(out_h, src_h);
  const auto col_taps = taps_for(out_w, src_w);
  const long long denom = static_cast<long long>(src_h) * src_w;

  GrayFrame out(out_h, out_w);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      long long acc = 0;
      for (const Tap& ry : row_taps[static_cast<std::size_t>(oy)])
        for (const Tap& cx : col_taps[static_cast<std::size_t>(ox)])
          acc += ry.weight * cx.weight * frame(ry.index, cx.index);
      out(oy, ox) = round_ratio_u8(acc, denom);
    }
  }
  return out;
}

inline GrayFrame downscale_84(const GrayFrame& frame) {
  return downscale(frame, kObservationSize, kObservationSize);
}

/// Four most recent frames, oldest first.
struct Observation {
  std::array<GrayFrame, kStackDepth> frames;

  const GrayFrame& newest() const noexcept { return frames.back(); }
  bool operator==(const Observation&) const = default;
};

class FrameStack {
 public:
  void clear() { frames_.clear(); }
  std::size_t size() const noexcept { return frames_.size(); }

  Observation push(GrayFrame frame) {
    if (frames_.size() == kStackDepth) frames_.pop_front();
    frames_.push_back(std::move(frame));
    return observation();
  }

  /// Missing slots repeat the oldest frame held.
  Observation observation() const {
    if (frames_.empty()) throw Error(Errc::IndexOutOfRange, "frame stack is empty");
    Observation obs;
    const std::size_t pad = kStackDepth - frames_.size();
    for (std::size_t i = 0; i < kStackDepth; ++i)
      obs.frames[i] = frames_[i < pad ? 0 : i - pad];
    return obs;
  }

 private:
  std::deque<GrayFrame> frames_;
};

}  // namespace maskenv
