// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <algorithm>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "maskenv/harness.hpp"
#include "oracles.hpp"

using namespace maskenv;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_++ < 3) first_.push_back(what);
  }
  Outcome done(std::string summary) const {
    if (failures_ == 0) return {true, std::move(summary)};
    std::string d = std::to_string(failures_) + " failure(s)";
    for (const auto& f : first_) d += "; " + f;
    return {false, d};
  }
  int failures() const noexcept { return failures_; }

 private:
  int failures_ = 0;
  std::vector<std::string> first_;
};

// Per-axis displacement of one step in direction `d`, straight from the
// movement rule: v on a single axis, ceil(v / sqrt 2) on both for diagonals.
std::pair<int, int> oracle_delta(Direction d, int v) {
  const int diag = static_cast<int>(std::ceil(v / std::sqrt(2.0)));
  switch (d) {
    case Direction::Stay: return {0, 0};
    case Direction::L: return {0, -v};
    case Direction::R: return {0, v};
    case Direction::U: return {-v, 0};
    case Direction::D: return {v, 0};
    case Direction::LU: return {-diag, -diag};
    case Direction::LD: return {diag, -diag};
    case Direction::RU: return {-diag, diag};
    case Direction::RD: return {diag, diag};
  }
  return {0, 0};
}

// Smallest and largest center along one axis for which the span lies
// inside [0, extent), by scanning.
std::pair<int, int> contained_range(int scale, int extent) {
  int lo = 1 << 30, hi = -(1 << 30);
  for (int c = -scale; c <= extent + scale; ++c) {
    const int start = c - scale / 2;
    if (start >= 0 && start + scale <= extent) lo = std::min(lo, c), hi = std::max(hi, c);
  }
  return {lo, hi};
}

int wrap(int x, int n) { return ((x % n) + n) % n; }

Outcome geometry_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(20240101, 0));
  Check check;
  long long steps = 0;
  for (int cfg = 0; cfg < 1000; ++cfg) {
    const WindowSpec w = oracle::random_window(rng, 64);
    const int n_masks = static_cast<int>(rng.uniform_int(1, 3));
    std::vector<MaskSpec> specs;
    for (int i = 0; i < n_masks; ++i) specs.push_back(oracle::random_spec(rng, w));
    for (Boundary mode : {Boundary::Stopping, Boundary::SlipThrough}) {
      std::vector<MaskPlacement> masks;
      for (MaskSpec s : specs) {
        s.boundary_mode = mode;
        masks.push_back({s, init_mask(s, w, rng)});
      }
      for (int t = 0; t <= 100; ++t) {
        if (!std::ranges::equal(visibility_map(masks, w).bits(), oracle::visibility(masks, w))) {
          check.expect(false, "visibility differs at config " + std::to_string(cfg) + " step " + std::to_string(t));
          break;
        }
        if (t == 100) break;
        for (auto& m : masks) {
          const Direction d = kAllDirections[static_cast<std::size_t>(rng.uniform_int(0, 8))];
          const auto [dr, dc] = oracle_delta(d, m.spec.speed);
          const MaskState next = step_mask(m.state, d, m.spec, w);
          MaskState want;
          if (mode == Boundary::Stopping) {
            const auto [rlo, rhi] = contained_range(m.spec.scale_h, w.height);
            const auto [clo, chi] = contained_range(m.spec.scale_w, w.width);
            want = {std::clamp(m.state.center_row + dr, rlo, rhi), std::clamp(m.state.center_col + dc, clo, chi)};
            check.expect(oracle::fully_contained(m.spec, next, w), "stopping mask left the window");
          } else {
            want = {wrap(m.state.center_row + dr, w.height), wrap(m.state.center_col + dc, w.width)};
            check.expect(next.center_row >= 0 && next.center_row < w.height && next.center_col >= 0 &&
                             next.center_col < w.width,
                         "slip-through center outside the window");
          }
          check.expect(next == want, "step differs from the movement rule");
          m.state = next;
          ++steps;
        }
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  check.expect(secs < 10.0, "runtime " + std::to_string(secs) + " s exceeds 10 s");
  std::ostringstream s;
  s << "1000 configs x 2 modes, " << steps << " mask steps, " << std::fixed << std::setprecision(2) << secs << " s";
  return check.done(s.str());
}

Outcome diagonal_rule() {
  Check check;
  for (int v = 1; v <= 200; ++v) {
    const int want = static_cast<int>(std::ceil(v / std::sqrt(2.0)));
    check.expect(diagonal_step(v) == want, "v=" + std::to_string(v));
    MaskSpec s;
    s.speed = v;
    s.scale_h = s.scale_w = 1;
    s.boundary_mode = Boundary::SlipThrough;
    const WindowSpec big{1000, 1000};
    const MaskState moved = step_mask({500, 500}, Direction::RD, s, big);
    check.expect(moved.center_row - 500 == want && moved.center_col - 500 == want, "step v=" + std::to_string(v));
  }
  return check.done("v in [1,200]");
}

Outcome action_space() {
  Check check;
  check.expect(total_actions({18, 1}) == 162, "18x1 != 162");
  check.expect(total_actions({18, 2}) == 1458, "18x2 != 1458");
  check.expect(total_actions({18, 1}) > 90 && total_actions({18, 2}) > 90, "not > 90");
  for (const ActionSpaceSpec spec : {ActionSpaceSpec{18, 1}, ActionSpaceSpec{18, 2}}) {
    std::set<std::vector<int>> seen;
    for (std::int64_t i = 0; i < total_actions(spec); ++i) {
      const JointAction a = decode(i, spec);
      check.expect(encode(a, spec) == i, "round trip at " + std::to_string(i));
      std::vector<int> key{a.game_action};
      for (Direction d : a.mask_dirs) key.push_back(static_cast<int>(d));
      seen.insert(key);
    }
    check.expect(static_cast<std::int64_t>(seen.size()) == total_actions(spec), "decode not injective");
  }
  return check.done("162 and 1458, bijective");
}

Outcome resolution_decay() {
  Check check;
  DecaySpec d;
  d.enabled = true;
  Rng rng(derive_seed(7, 1));
  for (int trial = 0; trial < 500; ++trial) {
    const WindowSpec w = oracle::random_window(rng, 32);
    const MaskSpec s = oracle::random_spec(rng, w);
    const MaskPlacement m{s, oracle::random_state(rng, s, w)};
    GrayFrame f(w.height, w.width);
    for (auto& px : f.pixels()) px = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    check.expect(apply_resolution_decay(f, m, d) == oracle::decay(f, m, 1.5), "trial " + std::to_string(trial));
    const GrayFrame flat(w.height, w.width, static_cast<std::uint8_t>(rng.uniform_int(0, 255)));
    check.expect(apply_resolution_decay(flat, m, d) == flat, "constant frame changed at trial " + std::to_string(trial));
  }
  MaskSpec s;
  s.scale_h = s.scale_w = 100;
  const auto layers = decay_layers({210, 160}, MaskPlacement{s, {105, 80}}, d);
  std::array<long, 4> counts{};
  for (auto l : layers.pixels()) ++counts[l];
  check.expect(counts[1] == 100 * 100, "layer 1 count");
  check.expect(counts[2] == 150 * 150 - 100 * 100, "layer 2 count");
  check.expect(counts[3] == 210 * 160 - 150 * 150, "layer 3 count");
  return check.done("500 frames bit-exact; layers 10000/12500/11100");
}

Outcome aux_rewards() {
  Check check;
  Rng rng(derive_seed(99, 2));
  double lo = 0.0, hi = -1.0;
  for (int i = 0; i < 100000; ++i) {
    const int h = static_cast<int>(rng.uniform_int(1, 12)), w = static_cast<int>(rng.uniform_int(1, 12));
    const double zero_prob = rng.uniform01();
    ObservationHistory hist;
    for (int k = 0; k < 5; ++k) {
      GrayFrame f(h, w);
      for (auto& px : f.pixels()) px = rng.bernoulli(zero_prob) ? 0 : static_cast<std::uint8_t>(rng.uniform_int(0, 255));
      hist.push(f);
    }
    const double r = novelty_reward(hist);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    check.expect(r <= 0.0 && r >= -1.0, "novelty out of range: " + std::to_string(r));
  }
  {
    GrayFrame f(84, 84);
    for (auto& px : f.pixels()) px = static_cast<std::uint8_t>(rng.uniform_int(1, 255));
    ObservationHistory hist;
    for (int k = 0; k < 5; ++k) hist.push(f);
    check.expect(std::abs(novelty_reward(hist) + 1.0) <= 1e-12, "identical frames not -1");
  }
  for (int traj = 0; traj < 10000; ++traj) {
    const WindowSpec w = oracle::random_window(rng, 24);
    const MaskSpec s = oracle::random_spec(rng, w);
    std::vector<MaskState> trail{oracle::random_state(rng, s, w)};
    CoverageHistory hist;
    hist.push(visibility_map(std::vector<MaskPlacement>{{s, trail.back()}}, w));
    for (int t = 0; t < 8; ++t) {
      trail.push_back(step_mask(trail.back(), kAllDirections[static_cast<std::size_t>(rng.uniform_int(0, 8))], s, w));
      hist.push(visibility_map(std::vector<MaskPlacement>{{s, trail.back()}}, w));
      long long count = 0;
      const std::size_t n = trail.size();
      if (n >= 5)
        for (int r = 0; r < w.height; ++r)
          for (int c = 0; c < w.width; ++c) {
            bool before = false;
            for (std::size_t k = n - 5; k < n - 1; ++k) before = before || oracle::in_mask(r, c, s, trail[k], w);
            count += !before && oracle::in_mask(r, c, s, trail[n - 1], w);
          }
      const double rew = coverage_reward(hist);
      check.expect(std::llround(rew * rew) == count && rew == std::sqrt(static_cast<double>(count)),
                   "coverage trajectory " + std::to_string(traj));
    }
  }
  {
    MaskSpec s;
    s.scale_h = s.scale_w = 100;
    CoverageHistory hist;
    for (int i = 0; i < 4; ++i) hist.push(visibility_map(std::vector<MaskPlacement>{{s, {105, 50}}}, {210, 160}));
    hist.push(visibility_map(std::vector<MaskPlacement>{{s, {105, 100}}}, {210, 160}));
    const double r = coverage_reward(hist);
    check.expect(std::abs(r - std::sqrt(5000.0)) <= 1e-9 && std::abs(r - 70.7107) < 1e-4, "worked case");
  }
  std::ostringstream os;
  os << "novelty range [" << lo << ", " << hi + 0.0 << "] over 1e5; coverage exact over 1e4 trajectories";
  return check.done(os.str());
}

Outcome sticky_actions() {
  Check check;
  Rng rng(stream_seed(derive_seed(0, 0), SeedStream::Sticky));
  const ActionSpaceSpec space{18, 1};
  JointAction prev = decode(0, space);
  long repeats = 0;
  constexpr long n = 100000;
  for (long i = 0; i < n; ++i) {
    // Always ask for something different so a repeat is observable.
    JointAction want = decode((encode(prev, space) + 1 + rng.uniform_int(0, 160)) % 162, space);
    const JointAction exec = apply_sticky(want, &prev, rng);
    repeats += exec == prev;
    prev = exec;
  }
  const double rate = static_cast<double>(repeats) / n;
  check.expect(std::abs(rate - 0.25) <= 0.005, "rate " + std::to_string(rate));
  return check.done("repeat rate " + std::to_string(rate));
}

std::vector<RunConfig> determinism_configs() {
  std::vector<RunConfig> out;
  for (const std::string game : {"sprite_chase", "rider"})
    for (AuxReward aux : {AuxReward::None, AuxReward::Novelty, AuxReward::Coverage}) {
      RunConfig c;
      c.game = game;
      c.episodes = 3;
      c.parallel = 3;
      c.max_steps = 200;
      c.env.seed = 1234;
      c.env.aux_reward = aux;
      if (aux == AuxReward::Novelty) {
        c.env.decay.enabled = true;
        c.env.masks[0].init_mode = InitMode::Random;
      }
      if (aux == AuxReward::Coverage) {
        c.env.masks.push_back(MaskSpec{70, 70, 30, Boundary::SlipThrough, InitMode::Random});
      }
      out.push_back(c);
    }
  return out;
}

Outcome determinism_and_replay() {
  Check check;
  int steps = 0;
  for (const RunConfig& c : determinism_configs()) {
    const RunOutput a = run_episodes(c, make_policy("random"));
    RunConfig serial = c;
    serial.parallel = 1;
    const RunOutput b = run_episodes(serial, make_policy("random"));
    std::stringstream la, lb;
    for (const auto& ep : a.episodes) ep.log.write(la);
    for (const auto& ep : b.episodes) ep.log.write(lb);
    check.expect(la.str() == lb.str(), "logs differ for " + c.game);
    const ReplayReport rep = replay(la);
    check.expect(rep.ok(), rep.ok() ? "" : rep.mismatches.front());
    check.expect(rep.returns == a.metrics.returns, "replayed returns differ");
    steps += rep.steps;
  }
  return check.done(std::to_string(determinism_configs().size()) + " configs, " + std::to_string(steps) +
                    " replayed steps");
}

Outcome mdp_recovery() {
  Check check;
  for (const std::string game : {"sprite_chase", "rider"}) {
    EnvConfig full;
    full.seed = 77;
    full.masks[0].scale_h = 210;
    full.masks[0].scale_w = 160;
    EnvConfig none = full;
    none.masks.clear();
    Environment masked(full, make_game(game)), plain(none, make_game(game));
    masked.reset(0);
    plain.reset(0);
    check.expect(masked.observation() == plain.observation(), game + " reset observation");
    Rng rng(5);
    FrameStack independent;
    independent.push(downscale_84(to_grayscale(masked.raw_frame())));
    for (int t = 0; t < 100; ++t) {
      if (masked.terminal()) {
        masked.reset(static_cast<std::uint64_t>(t) + 1);
        plain.reset(static_cast<std::uint64_t>(t) + 1);
        independent.clear();
        independent.push(downscale_84(to_grayscale(masked.raw_frame())));
      }
      const JointAction a = decode(rng.uniform_int(0, masked.n_actions() - 1), masked.action_space());
      const StepResult rm = masked.step(a);
      const StepResult rp = plain.step(JointAction{a.game_action, {}});
      const Observation expected = independent.push(downscale_84(to_grayscale(masked.raw_frame())));
      check.expect(rm.observation == rp.observation, game + " step " + std::to_string(t) + " vs unmasked env");
      check.expect(rm.observation == expected, game + " step " + std::to_string(t) + " vs raw pipeline");
      check.expect(rm.info.raw_reward == rp.info.raw_reward, game + " reward");
    }
  }
  return check.done("100 steps on sprite_chase and rider");
}

Outcome rider_geometry() {
  Check check;
  auto contains_spawn = [](int scale, int player_col) {
    MaskSpec s;
    s.scale_h = s.scale_w = scale;
    const MaskState c = clamp_center(Rider::kPlayerRow, player_col, s, kAtariWindow);
    for (const Rect& r : mask_rect(c, s, kAtariWindow))
      if (r.contains(Rider::kSpawnRow, player_col)) return true;
    return false;
  };
  for (int col = Rider::kShipWidth / 2; col <= kAtariWindow.width - Rider::kShipWidth / 2; ++col) {
    check.expect(contains_spawn(130, col), "scale 130 misses spawn at col " + std::to_string(col));
    check.expect(!contains_spawn(100, col), "scale 100 contains spawn at col " + std::to_string(col));
  }
  Rider game;
  game.reset(3);
  int spawned = 0;
  for (int i = 0; i < 400 && !game.raw_step(Rider::Noop).terminal; ++i)
    for (const auto& e : game.enemies())
      if (e.age == 1) {
        ++spawned;
        check.expect(Rider::kPlayerRow - e.row == 100, "spawn distance");
      }
  check.expect(spawned > 0, "no enemy spawned");
  return check.done("spawn 100 px above player: inside at 130, outside at 100");
}

Outcome harness_metric() {
  std::vector<double> v;
  for (int i = 1; i <= 150; ++i) v.push_back(i);
  const double m = mean_last(v);
  return {m == 100.5, "mean_last_100 = " + std::to_string(m)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"geometry suite", geometry_suite},
      {"diagonal rule", diagonal_rule},
      {"action space", action_space},
      {"resolution decay", resolution_decay},
      {"aux rewards", aux_rewards},
      {"sticky actions", sticky_actions},
      {"determinism and replay", determinism_and_replay},
      {"MDP recovery", mdp_recovery},
      {"rider geometry", rider_geometry},
      {"harness metric", harness_metric},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
