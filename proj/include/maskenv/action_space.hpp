#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskenv/error.hpp"
#include "maskenv/geometry.hpp"
#include "maskenv/rng.hpp"

namespace maskenv {

/// One game action plus one direction per mask.
struct JointAction {
  int game_action = 0;
  std::vector<Direction> mask_dirs;

  bool operator==(const JointAction&) const = default;
};

struct ActionSpaceSpec {
  int n_game = 18;
  int n_masks = 1;
  static constexpr int n_mask_actions = kDirectionCount;

  bool operator==(const ActionSpaceSpec&) const = default;
};

inline constexpr int kMaxMasks = 16;

/// n_game * 9^n_masks
inline std::int64_t total_actions(const ActionSpaceSpec& spec) {
  if (spec.n_game < 1 || spec.n_masks < 0 || spec.n_masks > kMaxMasks)
    throw Error(Errc::ConfigInvalid, "action space needs n_game >= 1 and 0 <= n_masks <= 16");
  std::int64_t total = spec.n_game;
  for (int i = 0; i < spec.n_masks; ++i) total *= ActionSpaceSpec::n_mask_actions;
  return total;
}

/// Mixed radix: game action most significant, then mask 0, mask 1, ...
inline std::int64_t encode(const JointAction& action, const ActionSpaceSpec& spec) {
  if (action.game_action < 0 || action.game_action >= spec.n_game)
    throw Error(Errc::IndexOutOfRange, "game action " + std::to_string(action.game_action) +
                                           " outside [0, " + std::to_string(spec.n_game) + ")");
  if (static_cast<int>(action.mask_dirs.size()) != spec.n_masks)
    throw Error(Errc::IndexOutOfRange, "expected " + std::to_string(spec.n_masks) +
                                           " mask directions, got " +
                                           std::to_string(action.mask_dirs.size()));
  std::int64_t index = action.game_action;
  for (Direction d : action.mask_dirs) {
    const int digit = static_cast<int>(d);
    if (digit < 0 || digit >= kDirectionCount)
      throw Error(Errc::IndexOutOfRange, "direction out of range");
    index = index * ActionSpaceSpec::n_mask_actions + digit;
  }
  return index;
}

inline JointAction decode(std::int64_t index, const ActionSpaceSpec& spec) {
  const std::int64_t total = total_actions(spec);
  if (index < 0 || index >= total)
    throw Error(Errc::IndexOutOfRange,
                "action " + std::to_string(index) + " outside [0, " + std::to_string(total) + ")");
  JointAction action;
  action.mask_dirs.resize(static_cast<std::size_t>(spec.n_masks));
  for (int i = spec.n_masks - 1; i >= 0; --i) {
    action.mask_dirs[static_cast<std::size_t>(i)] =
        static_cast<Direction>(index % ActionSpaceSpec::n_mask_actions);
    index /= ActionSpaceSpec::n_mask_actions;
  }
  action.game_action = static_cast<int>(index);
  return action;
}

/// Sticky actions decided by an explicit uniform draw in [0, 1).
/// A draw below `repeat_prob` repeats the previously executed action.
inline const JointAction& apply_sticky(const JointAction& current, const JointAction* previous,
                                       double draw, double repeat_prob = 0.25) {
  if (previous == nullptr) return current;
  return draw < repeat_prob ? *previous : current;
}

/// Consumes exactly one draw whenever a previous action exists.
inline JointAction apply_sticky(const JointAction& current, const JointAction* previous, Rng& rng,
                                double repeat_prob = 0.25) {
  if (previous == nullptr) return current;
  return apply_sticky(current, previous, rng.uniform01(), repeat_prob);
}

}  // namespace maskenv
