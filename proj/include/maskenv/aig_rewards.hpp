#pragma once

// Auxiliary rewards for active information gathering.
//
//   novelty:  r = -0.25 * (v[t-3] + v[t-2] + v[t-1] + v[t]) . v[t+1]
//             v[i] = flattened observed frame scaled to unit L2 norm
//   coverage: r = || w[t-3, t+1] - w[t-3, t] ||
//             w[i, j] = union of the mask coverage from step i to step j
//
// Both are 0 until five time indices are available.

#include <cmath>
#include <cstdint>
#include <deque>
#include <vector>

#include "maskenv/frame.hpp"
#include "maskenv/geometry.hpp"

namespace maskenv {

inline constexpr std::size_t kAigWindow = 5;

enum class AuxReward : std::uint8_t { None, Novelty, Coverage };

/// Unit-L2 flattening; the all-zero frame maps to the zero vector.
inline std::vector<double> normalized_vector(const GrayFrame& frame) {
  auto px = frame.pixels();
  std::vector<double> v(px.begin(), px.end());
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 == 0.0) return v;
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

class ObservationHistory {
 public:
  void clear() { vectors_.clear(); }
  std::size_t size() const noexcept { return vectors_.size(); }
  bool full() const noexcept { return vectors_.size() == kAigWindow; }

  void push(const GrayFrame& observed) { push(normalized_vector(observed)); }
  void push(std::vector<double> v) {
    if (full()) vectors_.pop_front();
    vectors_.push_back(std::move(v));
  }

  /// Oldest first; the last entry is v[t+1].
  const std::deque<std::vector<double>>& vectors() const noexcept { return vectors_; }

 private:
  std::deque<std::vector<double>> vectors_;
};

inline double novelty_reward(const ObservationHistory& history) {
  if (!history.full()) return 0.0;
  const auto& vs = history.vectors();
  const auto& latest = vs.back();
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < vs.size(); ++i) {
    double dot = 0.0;
    for (std::size_t k = 0; k < latest.size(); ++k) dot += vs[i][k] * latest[k];
    total += dot;
  }
  return -0.25 * total;
}

/// Per-step visibility maps for steps t-3 .. t+1.
class CoverageHistory {
 public:
  void clear() { maps_.clear(); }
  std::size_t size() const noexcept { return maps_.size(); }
  bool full() const noexcept { return maps_.size() == kAigWindow; }

  void push(VisibilityMap map) {
    if (full()) maps_.pop_front();
    maps_.push_back(std::move(map));
  }

  const std::deque<VisibilityMap>& maps() const noexcept { return maps_; }

  /// w[t-3, j] for j = t (include_latest = false) or t+1.
  VisibilityMap merged(bool include_latest) const {
    if (maps_.empty()) return {};
    VisibilityMap w(maps_.front().window());
    const std::size_t end = include_latest ? maps_.size() : maps_.size() - 1;
    for (std::size_t i = 0; i < end; ++i) w |= maps_[i];
    return w;
  }

  /// Pixels covered at t+1 but nowhere in [t-3, t].
  long long newly_covered() const {
    if (!full()) return 0;
    const VisibilityMap before = merged(false);
    const auto latest = maps_.back().bits();
    const auto prior = before.bits();
    long long count = 0;
    for (std::size_t i = 0; i < latest.size(); ++i) count += (latest[i] && !prior[i]) ? 1 : 0;
    return count;
  }

 private:
  std::deque<VisibilityMap> maps_;
};

/// Since w[t-3, t+1] >= w[t-3, t] pointwise, the norm is sqrt(newly covered).
inline double coverage_reward(const CoverageHistory& history) {
  return std::sqrt(static_cast<double>(history.newly_covered()));
}

}  // namespace maskenv
