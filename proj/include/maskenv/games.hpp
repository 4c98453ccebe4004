#pragma once

// Built-in deterministic 210x160 games implementing FrameSource.

#include <algorithm>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "maskenv/env.hpp"
#include "maskenv/error.hpp"
#include "maskenv/frame.hpp"
#include "maskenv/rng.hpp"

namespace maskenv {

inline constexpr WindowSpec kAtariWindow{210, 160};
inline constexpr int kGameFrameLimit = 4000;

namespace detail {

constexpr int step_toward(int from, int to, int max_step) {
  return from + std::clamp(to - from, -max_step, max_step);
}

constexpr bool boxes_overlap(const Rect& a, const Rect& b) {
  return a.top < b.top + b.height && b.top < a.top + a.height && a.left < b.left + b.width &&
         b.left < a.left + a.width;
}

inline void draw(RgbFrame& frame, const Rect& r, Rgb color) {
  if (auto clipped = clipped_rect(r.top + r.height / 2, r.left + r.width / 2, r.height, r.width,
                                  frame.window()))
    frame.fill(*clipped, color);
}

}  // namespace detail

/// Agent sprite collects pellets while a chaser homes in on it.
///
/// Actions: 0 noop, 1 up, 2 down, 3 left, 4 right (3 px/frame).
/// 20 pellets at seeded positions, +10 each. The chaser moves up to 2 px
/// per axis per frame toward the agent; contact ends the episode.
class SpriteChase final : public FrameSource {
 public:
  static constexpr int kSprite = 8;
  static constexpr int kPellet = 4;
  static constexpr int kPelletCount = 20;
  static constexpr int kPelletPoints = 10;
  static constexpr int kAgentSpeed = 3;
  static constexpr int kChaserSpeed = 2;
  static constexpr int kAgentStartTop = 150;
  static constexpr int kAgentStartLeft = 76;

  enum Action : int { Noop = 0, Up, Down, Left, Right, Count };

  RgbFrame reset(std::uint64_t seed) override {
    Rng rng(seed);
    agent_ = {kAgentStartTop, kAgentStartLeft, kSprite, kSprite};
    chaser_ = {8, rng.bernoulli(0.5) ? 8 : kAtariWindow.width - 8 - kSprite, kSprite, kSprite};
    pellets_.clear();
    const Rect agent_zone{agent_.top - 8, agent_.left - 8, kSprite + 16, kSprite + 16};
    while (static_cast<int>(pellets_.size()) < kPelletCount) {
      const Rect p{static_cast<int>(rng.uniform_int(20, kAtariWindow.height - kPellet - 1)),
                   static_cast<int>(rng.uniform_int(0, kAtariWindow.width - kPellet)), kPellet,
                   kPellet};
      if (detail::boxes_overlap(p, agent_zone)) continue;
      pellets_.push_back(p);
    }
    frame_ = 0;
    done_ = false;
    return render();
  }

  RawStep raw_step(int game_action) override {
    if (game_action < 0 || game_action >= Count)
      throw Error(Errc::IndexOutOfRange, "sprite_chase action out of range");
    RawStep out;
    if (done_) {
      out.frame = render();
      out.terminal = true;
      return out;
    }
    ++frame_;
    switch (game_action) {
      case Up: agent_.top -= kAgentSpeed; break;
      case Down: agent_.top += kAgentSpeed; break;
      case Left: agent_.left -= kAgentSpeed; break;
      case Right: agent_.left += kAgentSpeed; break;
      default: break;
    }
    agent_.top = std::clamp(agent_.top, 0, kAtariWindow.height - kSprite);
    agent_.left = std::clamp(agent_.left, 0, kAtariWindow.width - kSprite);

    const auto eaten = std::remove_if(pellets_.begin(), pellets_.end(), [&](const Rect& p) {
      return detail::boxes_overlap(p, agent_);
    });
    out.score_delta = kPelletPoints * static_cast<double>(pellets_.end() - eaten);
    pellets_.erase(eaten, pellets_.end());

    chaser_.top = detail::step_toward(chaser_.top, agent_.top, kChaserSpeed);
    chaser_.left = detail::step_toward(chaser_.left, agent_.left, kChaserSpeed);

    done_ = detail::boxes_overlap(chaser_, agent_) || frame_ >= kGameFrameLimit;
    out.terminal = done_;
    out.frame = render();
    return out;
  }

  int n_game_actions() const override { return Count; }
  WindowSpec window() const override { return kAtariWindow; }
  int noop_action_index() const override { return Noop; }
  std::string_view name() const override { return "sprite_chase"; }

  const Rect& agent() const noexcept { return agent_; }
  const Rect& chaser() const noexcept { return chaser_; }
  const std::vector<Rect>& pellets() const noexcept { return pellets_; }
  int frame_count() const noexcept { return frame_; }

 private:
  RgbFrame render() const {
    RgbFrame f(kAtariWindow.height, kAtariWindow.width, Rgb{20, 20, 60});
    for (const Rect& p : pellets_) detail::draw(f, p, Rgb{255, 255, 255});
    detail::draw(f, agent_, Rgb{240, 200, 0});
    detail::draw(f, chaser_, Rgb{220, 40, 40});
    return f;
  }

  Rect agent_{}, chaser_{};
  std::vector<Rect> pellets_;
  int frame_ = 0;
  bool done_ = false;
};

/// A ship on the bottom row dodges bullets fired by enemies that appear
/// exactly 100 px above it.
///
/// Actions: 0 noop, 1 left, 2 right (3 px/frame). Enemies spawn every 40
/// frames at a seeded column, hover for 30 frames, fire a bullet falling
/// 2 px/frame, then fly off upward. A bullet reaching the player row scores
/// +5 if it misses the ship and ends the episode if it hits.
class Rider final : public FrameSource {
 public:
  static constexpr int kPlayerRow = 185;
  static constexpr int kSpawnDistance = 100;
  static constexpr int kSpawnRow = kPlayerRow - kSpawnDistance;
  static constexpr int kShipWidth = 8;
  static constexpr int kShipHeight = 6;
  static constexpr int kPlayerSpeed = 3;
  static constexpr int kSpawnPeriod = 40;
  static constexpr int kFirstSpawn = 20;
  static constexpr int kFireDelay = 30;
  static constexpr int kBulletSpeed = 2;
  static constexpr int kEnemyLeaveSpeed = 3;
  static constexpr int kDodgePoints = 5;

  enum Action : int { Noop = 0, Left, Right, Count };

  struct Enemy {
    int row;
    int col;
    int age;
    bool fired;
  };
  struct Bullet {
    int row;
    int col;
  };

  RgbFrame reset(std::uint64_t seed) override {
    rng_.reseed(seed);
    player_col_ = kAtariWindow.width / 2;
    enemies_.clear();
    bullets_.clear();
    frame_ = 0;
    done_ = false;
    return render();
  }

  RawStep raw_step(int game_action) override {
    if (game_action < 0 || game_action >= Count)
      throw Error(Errc::IndexOutOfRange, "rider action out of range");
    RawStep out;
    if (done_) {
      out.frame = render();
      out.terminal = true;
      return out;
    }
    ++frame_;
    if (game_action == Left) player_col_ -= kPlayerSpeed;
    if (game_action == Right) player_col_ += kPlayerSpeed;
    player_col_ = std::clamp(player_col_, kShipWidth / 2, kAtariWindow.width - kShipWidth / 2);

    if (frame_ >= kFirstSpawn && (frame_ - kFirstSpawn) % kSpawnPeriod == 0)
      enemies_.push_back({kSpawnRow, static_cast<int>(rng_.uniform_int(8, kAtariWindow.width - 9)), 0, false});

    for (Enemy& e : enemies_) {
      ++e.age;
      if (!e.fired && e.age >= kFireDelay) {
        bullets_.push_back({e.row, e.col});
        e.fired = true;
      } else if (e.fired) {
        e.row -= kEnemyLeaveSpeed;
      }
    }
    std::erase_if(enemies_, [](const Enemy& e) { return e.row < -kShipHeight; });

    bool hit = false;
    for (Bullet& b : bullets_) b.row += kBulletSpeed;
    std::erase_if(bullets_, [&](const Bullet& b) {
      if (b.row < kPlayerRow) return false;
      if (b.col - 1 <= player_col_ + kShipWidth / 2 - 1 && b.col >= player_col_ - kShipWidth / 2)
        hit = true;
      else
        out.score_delta += kDodgePoints;
      return true;
    });

    done_ = hit || frame_ >= kGameFrameLimit;
    out.terminal = done_;
    out.frame = render();
    return out;
  }

  int n_game_actions() const override { return Count; }
  WindowSpec window() const override { return kAtariWindow; }
  int noop_action_index() const override { return Noop; }
  std::string_view name() const override { return "rider"; }

  int player_col() const noexcept { return player_col_; }
  const std::vector<Enemy>& enemies() const noexcept { return enemies_; }
  const std::vector<Bullet>& bullets() const noexcept { return bullets_; }
  int frame_count() const noexcept { return frame_; }

 private:
  RgbFrame render() const {
    RgbFrame f(kAtariWindow.height, kAtariWindow.width, Rgb{0, 0, 30});
    for (const Enemy& e : enemies_)
      detail::draw(f, {e.row - 2, e.col - kShipWidth / 2, 4, kShipWidth}, Rgb{255, 255, 255});
    for (const Bullet& b : bullets_) detail::draw(f, {b.row - 2, b.col - 1, 4, 2}, Rgb{255, 100, 200});
    detail::draw(f, {kPlayerRow - kShipHeight / 2, player_col_ - kShipWidth / 2, kShipHeight, kShipWidth},
                 Rgb{80, 200, 255});
    return f;
  }

  Rng rng_;
  int player_col_ = 0;
  std::vector<Enemy> enemies_;
  std::vector<Bullet> bullets_;
  int frame_ = 0;
  bool done_ = false;
};

inline std::vector<std::string> game_names() { return {"sprite_chase", "rider"}; }

inline std::unique_ptr<FrameSource> make_game(std::string_view name) {
  if (name == "sprite_chase") return std::make_unique<SpriteChase>();
  if (name == "rider") return std::make_unique<Rider>();
  throw Error(Errc::ConfigInvalid, "unknown game '" + std::string(name) + "'");
}

}  // namespace maskenv
