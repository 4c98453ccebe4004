#pragma once

// Seeded, parallel experiment runner with trajectory logging and replay.
//
// Episode e of a run resets a fresh environment to episode index e, whose
// seed is derive_seed(env.seed, e). Episodes are therefore independent of
// which worker runs them and of the worker count.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "maskenv/config_json.hpp"
#include "maskenv/env.hpp"
#include "maskenv/error.hpp"
#include "maskenv/games.hpp"

namespace maskenv {

inline constexpr int kLogSchemaVersion = 1;
inline constexpr std::size_t kMetricWindow = 100;

struct RunConfig {
  EnvConfig env;
  std::string game = "sprite_chase";
  std::string policy = "random";  // random | scripted | noop | external
  int episodes = 1;
  int parallel = 64;
  std::string out_dir;  // empty: nothing persisted
  int max_steps = 0;    // per episode; 0 = until the game terminates

  void validate() const {
    if (episodes < 1) throw Error(Errc::ConfigInvalid, "episodes must be >= 1");
    if (parallel < 1) throw Error(Errc::ConfigInvalid, "parallel must be >= 1");
    if (max_steps < 0) throw Error(Errc::ConfigInvalid, "max_steps must be >= 0");
    if (policy != "random" && policy != "scripted" && policy != "noop" && policy != "external")
      throw Error(Errc::ConfigInvalid, "unknown policy '" + policy + "'");
    env.validate(make_game(game)->window());
  }
};

inline json to_json(const RunConfig& c) {
  return {{"env", to_json(c.env)},     {"game", c.game},         {"policy", c.policy},
          {"episodes", c.episodes},    {"parallel", c.parallel}, {"out_dir", c.out_dir},
          {"max_steps", c.max_steps}};
}

inline void apply_json(const json& j, RunConfig& c) {
  detail::require_object(j, "run config");
  detail::reject_unknown(j, {"env", "game", "policy", "episodes", "parallel", "out_dir", "max_steps"},
                         "run config");
  if (j.contains("env")) apply_json(j.at("env"), c.env);
  detail::read(j, "game", c.game);
  detail::read(j, "policy", c.policy);
  detail::read(j, "episodes", c.episodes);
  detail::read(j, "parallel", c.parallel);
  detail::read(j, "out_dir", c.out_dir);
  detail::read(j, "max_steps", c.max_steps);
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  apply_json(j, c);
  return c;
}

/// Chooses an encoded joint action for the current step.
using Policy = std::function<std::int64_t(const Environment& env, Rng& rng, int step)>;

inline Policy make_policy(std::string_view name) {
  if (name == "random")
    return [](const Environment& env, Rng& rng, int) { return rng.uniform_int(0, env.n_actions() - 1); };
  if (name == "noop")
    return [](const Environment& env, Rng&, int) { return encode(env.noop_action(), env.action_space()); };
  if (name == "scripted")
    return [](const Environment& env, Rng&, int step) {
      return static_cast<std::int64_t>((static_cast<std::uint64_t>(step) * 7919u + 13u) %
                                       static_cast<std::uint64_t>(env.n_actions()));
    };
  if (name == "external")
    throw Error(Errc::ConfigInvalid, "the external policy is driven through the session service");
  throw Error(Errc::ConfigInvalid, "unknown policy '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Trajectory log: one JSON object per line, versioned by "v".

inline json header_record(const EnvConfig& env, std::string_view game, std::uint64_t episode) {
  return {{"v", kLogSchemaVersion},
          {"kind", "header"},
          {"game", std::string(game)},
          {"episode", episode},
          {"seed_derivation", kSeedDerivationVersion},
          {"env", to_json(env)}};
}

inline json step_record(int t, std::int64_t action, std::int64_t executed, const StepResult& r) {
  json masks = json::array();
  for (const auto& m : r.info.masks) masks.push_back({m.center_row, m.center_col});
  return {{"v", kLogSchemaVersion}, {"kind", "step"},          {"t", t},
          {"action", action},       {"executed", executed},    {"raw", r.info.raw_reward},
          {"aux", r.info.aux_reward}, {"masks", masks},         {"terminal", r.terminal}};
}

/// Append-only record stream for one episode.
class TrajectoryLog {
 public:
  TrajectoryLog() = default;
  TrajectoryLog(const EnvConfig& env, std::string_view game, std::uint64_t episode) {
    lines_.push_back(header_record(env, game, episode).dump());
  }

  void append(int t, std::int64_t action, std::int64_t executed, const StepResult& r) {
    if (lines_.empty()) throw Error(Errc::IoFailure, "trajectory log has no header");
    lines_.push_back(step_record(t, action, executed, r).dump());
  }

  const std::vector<std::string>& lines() const noexcept { return lines_; }
  std::size_t size() const noexcept { return lines_.size(); }

  void write(std::ostream& os) const {
    for (const auto& l : lines_) os << l << '\n';
    if (!os) throw Error(Errc::IoFailure, "failed to write trajectory log");
  }

 private:
  std::vector<std::string> lines_;
};

struct EpisodeResult {
  std::uint64_t episode = 0;
  double total_return = 0.0;  // sum of raw game rewards
  double aux_return = 0.0;
  int steps = 0;
  long long raw_frames = 0;
  int noops = 0;
  TrajectoryLog log;
};

/// Plays one episode on `env`, which is reset to `episode` first.
inline EpisodeResult play_episode(Environment& env, std::string_view game, std::uint64_t episode,
                                  const Policy& policy, int max_steps = 0) {
  EpisodeResult result;
  result.episode = episode;
  env.reset(episode);
  result.log = TrajectoryLog(env.config(), game, episode);
  Rng policy_rng(stream_seed(env.episode_seed(), SeedStream::Policy));
  const ActionSpaceSpec space = env.action_space();
  for (int t = 0; !env.terminal() && (max_steps == 0 || t < max_steps); ++t) {
    const std::int64_t action = policy(env, policy_rng, t);
    StepResult r = env.step(action);
    result.total_return += r.info.raw_reward;
    result.aux_return += r.info.aux_reward;
    result.log.append(t, action, encode(r.info.executed, space), r);
    ++result.steps;
  }
  result.raw_frames = env.raw_frames();
  result.noops = env.noops();
  return result;
}

/// Mean of the final min(window, n) values; 0 for an empty list.
inline double mean_last(std::span<const double> values, std::size_t window = kMetricWindow) {
  if (values.empty()) return 0.0;
  const std::size_t n = std::min(window, values.size());
  double sum = 0.0;
  for (std::size_t i = values.size() - n; i < values.size(); ++i) sum += values[i];
  return sum / static_cast<double>(n);
}

struct RunMetrics {
  std::vector<double> returns;
  std::vector<int> lengths;
  std::vector<long long> raw_frames;
  double mean_last_100 = 0.0;
  double wall_clock_s = 0.0;

  /// Equality of everything except timing.
  bool same_results(const RunMetrics& o) const {
    return returns == o.returns && lengths == o.lengths && raw_frames == o.raw_frames &&
           mean_last_100 == o.mean_last_100;
  }
};

inline json to_json(const RunMetrics& m) {
  return {{"returns", m.returns},         {"lengths", m.lengths},
          {"raw_frames", m.raw_frames},   {"mean_last_100", m.mean_last_100},
          {"wall_clock_s", m.wall_clock_s}, {"episodes", m.returns.size()}};
}

struct RunOutput {
  RunMetrics metrics;
  std::vector<EpisodeResult> episodes;
};

/// Runs every episode on a pool of `parallel` workers. Each worker claims
/// episode indices from a shared counter and writes only its own slots.
inline RunOutput run_episodes(const RunConfig& cfg, const Policy& policy) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  RunOutput out;
  out.episodes.resize(static_cast<std::size_t>(cfg.episodes));
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.parallel));

  auto worker = [&](std::size_t slot) {
    try {
      for (int e = next.fetch_add(1); e < cfg.episodes; e = next.fetch_add(1)) {
        Environment env(cfg.env, make_game(cfg.game));
        out.episodes[static_cast<std::size_t>(e)] =
            play_episode(env, cfg.game, static_cast<std::uint64_t>(e), policy, cfg.max_steps);
      }
    } catch (...) {
      errors[slot] = std::current_exception();
    }
  };
  {
    const int workers = std::min(cfg.parallel, cfg.episodes);
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker, static_cast<std::size_t>(w));
  }
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);

  for (const auto& ep : out.episodes) {
    out.metrics.returns.push_back(ep.total_return);
    out.metrics.lengths.push_back(ep.steps);
    out.metrics.raw_frames.push_back(ep.raw_frames);
  }
  out.metrics.mean_last_100 = mean_last(out.metrics.returns);
  out.metrics.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << text;
  if (!os) throw Error(Errc::IoFailure, "cannot write " + path.string());
}

/// Writes config.json, metrics.json and trajectories.jsonl under out_dir.
inline void persist(const RunConfig& cfg, const RunOutput& out) {
  if (cfg.out_dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + cfg.out_dir + ": " + ec.message());
  const std::filesystem::path dir(cfg.out_dir);
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
  write_text(dir / "metrics.json", to_json(out.metrics).dump(2) + "\n");
  std::ofstream traj(dir / "trajectories.jsonl", std::ios::binary | std::ios::trunc);
  if (!traj) throw Error(Errc::IoFailure, "cannot write trajectories.jsonl");
  for (const auto& ep : out.episodes) ep.log.write(traj);
}

inline RunMetrics run(const RunConfig& cfg) {
  const RunOutput out = run_episodes(cfg, make_policy(cfg.policy));
  persist(cfg, out);
  return out.metrics;
}

// ---------------------------------------------------------------------------
// Replay

struct ReplayReport {
  int episodes = 0;
  int steps = 0;
  std::vector<double> returns;
  std::vector<std::string> mismatches;

  bool ok() const noexcept { return mismatches.empty(); }
};

/// Re-executes every logged action on a fresh environment and compares the
/// executed action, rewards, mask centers and terminal flags exactly.
inline ReplayReport replay(std::istream& in) {
  ReplayReport report;
  std::optional<Environment> env;
  std::string line;
  int line_no = 0;
  auto mismatch = [&](const std::string& what) {
    report.mismatches.push_back("line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(Errc::IoFailure, "line " + std::to_string(line_no) + " is not JSON: " + e.what());
    }
    if (rec.value("v", 0) != kLogSchemaVersion)
      throw Error(Errc::IoFailure, "unsupported log schema on line " + std::to_string(line_no));
    const std::string kind = rec.value("kind", "");
    if (kind == "header") {
      if (rec.value("seed_derivation", 0) != kSeedDerivationVersion)
        throw Error(Errc::IoFailure, "log was written with a different seed derivation");
      env.emplace(env_config_from_json(rec.at("env")), make_game(rec.at("game").get<std::string>()));
      env->reset(rec.at("episode").get<std::uint64_t>());
      ++report.episodes;
      report.returns.push_back(0.0);
      continue;
    }
    if (kind != "step") throw Error(Errc::IoFailure, "unknown record kind '" + kind + "'");
    if (!env) throw Error(Errc::IoFailure, "step record before any header");
    if (env->terminal()) {
      mismatch("episode already terminal in replay");
      continue;
    }
    const StepResult r = env->step(rec.at("action").get<std::int64_t>());
    ++report.steps;
    report.returns.back() += r.info.raw_reward;
    if (encode(r.info.executed, env->action_space()) != rec.at("executed").get<std::int64_t>())
      mismatch("executed action differs");
    if (r.info.raw_reward != rec.at("raw").get<double>()) mismatch("raw reward differs");
    if (r.info.aux_reward != rec.at("aux").get<double>()) mismatch("aux reward differs");
    if (r.terminal != rec.at("terminal").get<bool>()) mismatch("terminal flag differs");
    const json& masks = rec.at("masks");
    if (masks.size() != r.info.masks.size()) {
      mismatch("mask count differs");
    } else {
      for (std::size_t i = 0; i < masks.size(); ++i)
        if (masks[i][0].get<int>() != r.info.masks[i].center_row ||
            masks[i][1].get<int>() != r.info.masks[i].center_col)
          mismatch("mask " + std::to_string(i) + " position differs");
    }
  }
  return report;
}

inline ReplayReport replay_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  return replay(in);
}

// ---------------------------------------------------------------------------
// Sweeps

/// Cartesian grid over the non-empty axes. An axis overrides the value in
/// every mask of the base config; mask_counts replicates the first mask.
struct SweepGrid {
  std::vector<int> scales;
  std::vector<int> speeds;
  std::vector<int> mask_counts;

  bool empty() const noexcept { return scales.empty() && speeds.empty() && mask_counts.empty(); }
};

/// One-factor ablations around the defaults (scale 100, speed 50, 1 mask).
inline SweepGrid scale_ablation() { return {{70, 100, 130}, {50}, {1}}; }
inline SweepGrid speed_ablation() { return {{100}, {10, 30, 50}, {1}}; }
inline SweepGrid mask_count_ablation() { return {{100}, {50}, {1, 2}}; }

struct SweepRow {
  std::optional<int> scale;
  std::optional<int> speed;
  std::optional<int> masks;
  std::int64_t n_actions = 0;
  std::optional<RunMetrics> metrics;
  std::string error;
};

inline RunConfig apply_cell(RunConfig cfg, std::optional<int> scale, std::optional<int> speed,
                            std::optional<int> masks) {
  if (masks) {
    if (*masks < 0) throw Error(Errc::ConfigInvalid, "mask count must be >= 0");
    const MaskSpec proto = cfg.env.masks.empty() ? MaskSpec{} : cfg.env.masks.front();
    cfg.env.masks.assign(static_cast<std::size_t>(*masks), proto);
  }
  for (auto& m : cfg.env.masks) {
    if (scale) m.scale_h = m.scale_w = *scale;
    if (speed) m.speed = *speed;
  }
  return cfg;
}

inline std::vector<SweepRow> sweep(const RunConfig& base, const SweepGrid& grid) {
  std::vector<SweepRow> rows;
  if (grid.empty()) return rows;
  auto axis = [](const std::vector<int>& v) {
    std::vector<std::optional<int>> out;
    for (int x : v) out.emplace_back(x);
    if (out.empty()) out.emplace_back(std::nullopt);
    return out;
  };
  const std::string out_root = base.out_dir;
  for (auto scale : axis(grid.scales))
    for (auto speed : axis(grid.speeds))
      for (auto masks : axis(grid.mask_counts)) {
        SweepRow row{scale, speed, masks, 0, std::nullopt, {}};
        try {
          RunConfig cell = apply_cell(base, scale, speed, masks);
          if (!out_root.empty()) {
            std::ostringstream name;
            name << "scale" << (scale ? std::to_string(*scale) : "-") << "_speed"
                 << (speed ? std::to_string(*speed) : "-") << "_masks"
                 << (masks ? std::to_string(*masks) : "-");
            cell.out_dir = (std::filesystem::path(out_root) / name.str()).string();
          }
          row.n_actions = total_actions({make_game(cell.game)->n_game_actions(),
                                         static_cast<int>(cell.env.masks.size())});
          row.metrics = run(cell);
        } catch (const std::exception& e) {
          row.error = e.what();
        }
        rows.push_back(std::move(row));
      }
  return rows;
}

/// One line per cell, followed by a pivot (parameter values across, one
/// row of mean_last_100) when exactly one axis varies.
inline std::string render_table(const std::vector<SweepRow>& rows, std::string_view game) {
  std::ostringstream os;
  auto opt = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string("-"); };
  os << "| scale | speed | masks | actions | episodes | mean_last_100 |\n";
  os << "|-------|-------|-------|---------|----------|---------------|\n";
  for (const auto& r : rows) {
    os << "| " << opt(r.scale) << " | " << opt(r.speed) << " | " << opt(r.masks) << " | "
       << r.n_actions << " | ";
    if (r.metrics)
      os << r.metrics->returns.size() << " | " << std::fixed << std::setprecision(2)
         << r.metrics->mean_last_100 << " |\n";
    else
      os << "- | error: " << r.error << " |\n";
  }
  if (rows.size() < 2) return os.str();

  auto varies = [&](auto get) {
    for (const auto& r : rows)
      if (get(r) != get(rows.front())) return true;
    return false;
  };
  const bool v_scale = varies([](const SweepRow& r) { return r.scale; });
  const bool v_speed = varies([](const SweepRow& r) { return r.speed; });
  const bool v_masks = varies([](const SweepRow& r) { return r.masks; });
  if (v_scale + v_speed + v_masks != 1) return os.str();

  const char* label = v_scale ? "Scale" : v_speed ? "Speed" : "No. of masks";
  os << "\n| " << label;
  for (const auto& r : rows) os << " | " << opt(v_scale ? r.scale : v_speed ? r.speed : r.masks);
  os << " |\n|---";
  for (std::size_t i = 0; i < rows.size(); ++i) os << "|---";
  os << "|\n| " << game;
  for (const auto& r : rows) {
    os << " | ";
    if (r.metrics)
      os << std::fixed << std::setprecision(2) << r.metrics->mean_last_100;
    else
      os << "error";
  }
  os << " |\n";
  return os.str();
}

}  // namespace maskenv
