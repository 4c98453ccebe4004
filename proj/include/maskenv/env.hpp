#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "maskenv/action_space.hpp"
#include "maskenv/aig_rewards.hpp"
#include "maskenv/error.hpp"
#include "maskenv/frame.hpp"
#include "maskenv/geometry.hpp"
#include "maskenv/observation.hpp"
#include "maskenv/rng.hpp"

namespace maskenv {

struct RawStep {
  RgbFrame frame;
  double score_delta = 0.0;
  bool terminal = false;
};

/// Adapter seam for anything that renders RGB frames and takes a discrete
/// game action per raw frame. Implementations must be deterministic given
/// the reset seed and the action sequence.
class FrameSource {
 public:
  virtual ~FrameSource() = default;

  virtual RgbFrame reset(std::uint64_t seed) = 0;
  virtual RawStep raw_step(int game_action) = 0;
  virtual int n_game_actions() const = 0;
  virtual WindowSpec window() const = 0;
  virtual int noop_action_index() const = 0;
  virtual std::string_view name() const = 0;
};

enum class NoopMode : std::uint8_t { Uniform, Fixed };

inline std::string_view to_string(NoopMode m) { return m == NoopMode::Uniform ? "uniform" : "fixed"; }
inline std::string_view to_string(AuxReward a) {
  switch (a) {
    case AuxReward::None: return "none";
    case AuxReward::Novelty: return "novelty";
    case AuxReward::Coverage: return "coverage";
  }
  return "none";
}
inline std::optional<AuxReward> parse_aux_reward(std::string_view s) {
  if (s == "none") return AuxReward::None;
  if (s == "novelty") return AuxReward::Novelty;
  if (s == "coverage") return AuxReward::Coverage;
  return std::nullopt;
}
inline std::optional<NoopMode> parse_noop_mode(std::string_view s) {
  if (s == "uniform") return NoopMode::Uniform;
  if (s == "fixed") return NoopMode::Fixed;
  return std::nullopt;
}

struct EnvConfig {
  std::vector<MaskSpec> masks{MaskSpec{}};
  DecaySpec decay;
  int frameskip = 4;
  double sticky_prob = 0.25;
  int noop_max = 30;
  NoopMode noop_mode = NoopMode::Uniform;
  AuxReward aux_reward = AuxReward::None;
  double aux_weight = 1.0;
  std::uint8_t fill = 0;
  std::uint64_t seed = 0;

  void validate(const WindowSpec& window) const {
    if (masks.size() > static_cast<std::size_t>(kMaxMasks))
      throw Error(Errc::ConfigInvalid, "too many masks");
    for (const auto& m : masks) maskenv::validate(m, window);
    if (decay.enabled) {
      decay.validate();
      if (masks.size() > 1)
        throw Error(Errc::DecayWithMultipleMasks, "resolution decay is defined for a single mask");
      if (masks.empty()) throw Error(Errc::ConfigInvalid, "resolution decay needs a mask");
    }
    if (frameskip < 1) throw Error(Errc::ConfigInvalid, "frameskip must be >= 1");
    if (!(sticky_prob >= 0.0 && sticky_prob < 1.0))
      throw Error(Errc::ConfigInvalid, "sticky_prob must lie in [0, 1)");
    if (noop_max < 0) throw Error(Errc::ConfigInvalid, "noop_max must be >= 0");
    if (!std::isfinite(aux_weight)) throw Error(Errc::ConfigInvalid, "aux_weight must be finite");
  }

  bool operator==(const EnvConfig&) const = default;
};

/// Independent random streams derived from one episode seed.
enum class SeedStream : std::uint64_t { Source = 0, Noop = 1, Mask = 2, Sticky = 3, Policy = 4 };

inline std::uint64_t stream_seed(std::uint64_t episode_seed, SeedStream s) {
  return derive_seed(episode_seed, static_cast<std::uint64_t>(s));
}

struct StepInfo {
  double raw_reward = 0.0;
  double aux_reward = 0.0;
  std::vector<MaskState> masks;
  JointAction executed;
  int raw_frames = 0;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;  // raw_reward + aux_weight * aux_reward
  bool terminal = false;
  StepInfo info;
};

/// Single-threaded environment state machine. Instances share nothing and
/// may be moved between threads.
class Environment {
 public:
  Environment(EnvConfig config, std::unique_ptr<FrameSource> source)
      : config_(std::move(config)), source_(std::move(source)) {
    if (!source_) throw Error(Errc::ConfigInvalid, "environment needs a frame source");
    window_ = source_->window();
    config_.validate(window_);
  }

  const EnvConfig& config() const noexcept { return config_; }
  const FrameSource& source() const noexcept { return *source_; }
  const WindowSpec& window() const noexcept { return window_; }

  ActionSpaceSpec action_space() const {
    return {source_->n_game_actions(), static_cast<int>(config_.masks.size())};
  }
  std::int64_t n_actions() const { return total_actions(action_space()); }
  JointAction noop_action() const {
    return {source_->noop_action_index(), std::vector<Direction>(config_.masks.size(), Direction::Stay)};
  }

  /// Starts the next episode (0, 1, 2, ... per instance).
  Observation reset() { return reset(next_episode_); }

  /// Starts episode `episode`; its randomness depends only on
  /// (config.seed, episode).
  Observation reset(std::uint64_t episode) {
    episode_ = episode;
    next_episode_ = episode + 1;
    episode_seed_ = derive_seed(config_.seed, episode);
    noop_rng_.reseed(stream_seed(episode_seed_, SeedStream::Noop));
    mask_rng_.reseed(stream_seed(episode_seed_, SeedStream::Mask));
    sticky_rng_.reseed(stream_seed(episode_seed_, SeedStream::Sticky));

    RgbFrame frame = source_->reset(stream_seed(episode_seed_, SeedStream::Source));
    raw_frames_ = 0;
    noops_ = 0;
    if (config_.noop_max > 0) {
      const int count = config_.noop_mode == NoopMode::Fixed
                            ? config_.noop_max
                            : static_cast<int>(noop_rng_.uniform_int(1, config_.noop_max));
      for (int i = 0; i < count; ++i) {
        RawStep raw = source_->raw_step(source_->noop_action_index());
        ++raw_frames_;
        ++noops_;
        if (raw.terminal) {
          // Game ended during the no-op phase: restart it and skip the rest.
          frame = source_->reset(stream_seed(episode_seed_, SeedStream::Source));
          break;
        }
        frame = std::move(raw.frame);
      }
    }

    masks_.clear();
    for (const auto& spec : config_.masks) masks_.push_back({spec, init_mask(spec, window_, mask_rng_)});

    stack_.clear();
    obs_history_.clear();
    coverage_history_.clear();
    previous_.reset();
    terminal_ = false;
    steps_ = 0;
    started_ = true;
    observe(std::move(frame));
    return stack_.observation();
  }

  StepResult step(std::int64_t index) { return step(decode(index, action_space())); }

  StepResult step(const JointAction& action) {
    if (!started_) throw Error(Errc::SteppedAfterTerminal, "step called before reset");
    if (terminal_) throw Error(Errc::SteppedAfterTerminal, "episode already terminated");
    encode(action, action_space());  // range check

    StepResult result;
    JointAction executed = apply_sticky(action, previous_ ? &*previous_ : nullptr, sticky_rng_,
                                        config_.sticky_prob);

    std::optional<RgbFrame> last;
    for (int k = 0; k < config_.frameskip; ++k) {
      RawStep raw = source_->raw_step(executed.game_action);
      ++raw_frames_;
      ++result.info.raw_frames;
      result.info.raw_reward += raw.score_delta;
      last = std::move(raw.frame);
      if (raw.terminal) {
        terminal_ = true;
        break;
      }
    }

    for (std::size_t i = 0; i < masks_.size(); ++i)
      masks_[i].state = step_mask(masks_[i].state, executed.mask_dirs[i], masks_[i].spec, window_);

    observe(std::move(*last));
    ++steps_;

    switch (config_.aux_reward) {
      case AuxReward::None: break;
      case AuxReward::Novelty: result.info.aux_reward = novelty_reward(obs_history_); break;
      case AuxReward::Coverage: result.info.aux_reward = coverage_reward(coverage_history_); break;
    }
    result.reward = result.info.raw_reward + config_.aux_weight * result.info.aux_reward;
    result.terminal = terminal_;
    result.observation = stack_.observation();
    for (const auto& m : masks_) result.info.masks.push_back(m.state);
    result.info.executed = executed;
    previous_ = std::move(executed);
    return result;
  }

  const std::vector<MaskPlacement>& masks() const noexcept { return masks_; }
  std::vector<MaskState> mask_states() const {
    std::vector<MaskState> out;
    for (const auto& m : masks_) out.push_back(m.state);
    return out;
  }
  std::vector<RectPieces> mask_rects() const {
    std::vector<RectPieces> out;
    for (const auto& m : masks_) out.push_back(mask_rect(m.state, m.spec, window_));
    return out;
  }

  const VisibilityMap& visibility() const noexcept { return visibility_; }
  /// Masked (or decayed) grayscale frame at native resolution.
  const GrayFrame& native_view() const noexcept { return native_view_; }
  /// Unprocessed frame behind the current observation.
  const RgbFrame& raw_frame() const noexcept { return raw_frame_; }
  Observation observation() const { return stack_.observation(); }

  bool terminal() const noexcept { return terminal_; }
  long long raw_frames() const noexcept { return raw_frames_; }
  int noops() const noexcept { return noops_; }
  int steps() const noexcept { return steps_; }
  std::uint64_t episode() const noexcept { return episode_; }
  std::uint64_t episode_seed() const noexcept { return episode_seed_; }

 private:
  void observe(RgbFrame frame) {
    raw_frame_ = std::move(frame);
    if (raw_frame_.window() != window_)
      throw Error(Errc::DimensionMismatch, "frame source changed its window size");
    const GrayFrame gray = to_grayscale(raw_frame_);
    if (masks_.empty()) {
      visibility_ = VisibilityMap(window_, true);
      native_view_ = gray;
    } else {
      visibility_ = visibility_map(masks_, window_);
      native_view_ = config_.decay.enabled ? apply_resolution_decay(gray, masks_, config_.decay)
                                           : apply_hard_mask(gray, visibility_, config_.fill);
    }
    GrayFrame small = downscale_84(native_view_);
    if (config_.aux_reward == AuxReward::Novelty) obs_history_.push(small);
    if (config_.aux_reward == AuxReward::Coverage) coverage_history_.push(visibility_);
    stack_.push(std::move(small));
  }

  EnvConfig config_;
  std::unique_ptr<FrameSource> source_;
  WindowSpec window_;

  Rng noop_rng_, mask_rng_, sticky_rng_;
  std::vector<MaskPlacement> masks_;
  FrameStack stack_;
  ObservationHistory obs_history_;
  CoverageHistory coverage_history_;
  std::optional<JointAction> previous_;

  RgbFrame raw_frame_;
  GrayFrame native_view_;
  VisibilityMap visibility_;

  std::uint64_t episode_ = 0;
  std::uint64_t next_episode_ = 0;
  std::uint64_t episode_seed_ = 0;
  long long raw_frames_ = 0;
  int noops_ = 0;
  int steps_ = 0;
  bool terminal_ = false;
  bool started_ = false;
};

}  // namespace maskenv
