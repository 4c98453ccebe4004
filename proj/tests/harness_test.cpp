#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "maskenv/harness.hpp"

using namespace maskenv;
namespace fs = std::filesystem;

namespace {

RunConfig small_run(std::string game = "sprite_chase") {
  RunConfig c;
  c.game = std::move(game);
  c.episodes = 6;
  c.parallel = 3;
  c.max_steps = 150;
  c.env.seed = 17;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("maskenv_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(MeanLast, WindowOfHundred) {
  std::vector<double> v;
  for (int i = 1; i <= 150; ++i) v.push_back(i);
  EXPECT_DOUBLE_EQ(mean_last(v), 100.5);
  EXPECT_DOUBLE_EQ(mean_last(std::span<const double>(v).first(10)), 5.5);
  EXPECT_EQ(mean_last({}), 0.0);
}

TEST(Run, ResultsIndependentOfWorkerCount) {
  RunConfig c = small_run();
  c.parallel = 1;
  const RunMetrics serial = run(c);
  for (int p : {2, 6, 64}) {
    c.parallel = p;
    EXPECT_TRUE(run(c).same_results(serial)) << "parallel " << p;
  }
  EXPECT_EQ(serial.returns.size(), 6u);
}

TEST(Run, SameSeedSameMetricsDifferentSeedDiffers) {
  RunConfig c = small_run();
  c.max_steps = 0;
  const RunMetrics a = run(c), b = run(c);
  EXPECT_TRUE(a.same_results(b));
  c.env.seed = 18;
  EXPECT_FALSE(run(c).same_results(a));
}

TEST(Run, MaxStepsBoundsLength) {
  const RunMetrics m = run(small_run("rider"));
  for (int len : m.lengths) EXPECT_LE(len, 150);
}

TEST(Run, EpisodeZeroMatchesStandaloneEnvironment) {
  const RunConfig c = small_run();
  const RunOutput out = run_episodes(c, make_policy("scripted"));
  Environment env(c.env, make_game(c.game));
  const EpisodeResult solo = play_episode(env, c.game, 0, make_policy("scripted"), c.max_steps);
  EXPECT_EQ(solo.total_return, out.episodes[0].total_return);
  EXPECT_EQ(solo.log.lines(), out.episodes[0].log.lines());
}

TEST(Run, PersistWritesArtifacts) {
  RunConfig c = small_run();
  c.out_dir = scratch("persist").string();
  const RunMetrics m = run(c);
  const fs::path dir(c.out_dir);
  ASSERT_TRUE(fs::exists(dir / "config.json"));
  ASSERT_TRUE(fs::exists(dir / "metrics.json"));
  ASSERT_TRUE(fs::exists(dir / "trajectories.jsonl"));
  std::ifstream mj(dir / "metrics.json");
  const json metrics = json::parse(mj);
  EXPECT_EQ(metrics.at("returns").get<std::vector<double>>(), m.returns);
  EXPECT_EQ(metrics.at("mean_last_100").get<double>(), m.mean_last_100);
  const RunConfig reloaded = load_run_config(dir / "config.json");
  EXPECT_EQ(to_json(reloaded), to_json(c));
  fs::remove_all(dir);
}

TEST(Replay, ReproducesEveryEpisodeExactly) {
  for (AuxReward aux : {AuxReward::None, AuxReward::Novelty, AuxReward::Coverage}) {
    RunConfig c = small_run("rider");
    c.env.aux_reward = aux;
    c.env.masks.push_back(MaskSpec{});
    c.env.masks[1].init_mode = InitMode::Random;
    c.env.masks[1].boundary_mode = Boundary::SlipThrough;
    const RunOutput out = run_episodes(c, make_policy("random"));
    std::stringstream ss;
    for (const auto& ep : out.episodes) ep.log.write(ss);
    const ReplayReport rep = replay(ss);
    EXPECT_TRUE(rep.ok()) << (rep.mismatches.empty() ? "" : rep.mismatches.front());
    EXPECT_EQ(rep.episodes, 6);
    EXPECT_EQ(rep.returns, out.metrics.returns);
  }
}

TEST(Replay, DetectsTamperedRecord) {
  const RunOutput out = run_episodes(small_run(), make_policy("random"));
  auto lines = out.episodes[0].log.lines();
  json rec = json::parse(lines[3]);
  rec["masks"][0][0] = rec["masks"][0][0].get<int>() + 1;
  lines[3] = rec.dump();
  std::stringstream ss;
  for (const auto& l : lines) ss << l << '\n';
  const ReplayReport rep = replay(ss);
  EXPECT_FALSE(rep.ok());
}

TEST(Replay, RejectsForeignSchemaAndSeedVersion) {
  std::stringstream a(R"({"v":2,"kind":"header"})");
  EXPECT_THROW(replay(a), Error);
  std::stringstream b(R"({"v":1,"kind":"header","seed_derivation":99,"game":"rider","episode":0,"env":{}})");
  EXPECT_THROW(replay(b), Error);
  std::stringstream c("not json");
  EXPECT_THROW(replay(c), Error);
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  RunConfig c = small_run("rider");
  c.env.masks.push_back(MaskSpec{70, 90, 30, Boundary::SlipThrough, InitMode::Random});
  c.env.decay.enabled = false;
  c.env.aux_reward = AuxReward::Coverage;
  RunConfig back;
  apply_json(to_json(c), back);
  EXPECT_EQ(to_json(back), to_json(c));
  RunConfig bad;
  EXPECT_THROW(apply_json(json{{"episodez", 3}}, bad), Error);
  EXPECT_THROW(apply_json(json{{"env", {{"masks", {{{"boundary_mode", "bounce"}}}}}}}, bad), Error);
}

TEST(Config, ValidationErrors) {
  RunConfig c;
  c.episodes = 0;
  EXPECT_THROW(c.validate(), Error);
  c = RunConfig{};
  c.policy = "greedy";
  EXPECT_THROW(c.validate(), Error);
  c = RunConfig{};
  c.game = "pong";
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(make_policy("external"), Error);
}

TEST(Sweep, PresetsAndCartesianProduct) {
  EXPECT_EQ(scale_ablation().scales, (std::vector<int>{70, 100, 130}));
  EXPECT_EQ(speed_ablation().speeds, (std::vector<int>{10, 30, 50}));
  EXPECT_EQ(mask_count_ablation().mask_counts, (std::vector<int>{1, 2}));
  RunConfig base = small_run();
  base.episodes = 2;
  base.max_steps = 20;
  const auto rows = sweep(base, SweepGrid{{70, 100}, {10, 50}, {}});
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.metrics.has_value()) << r.error;
    EXPECT_EQ(r.n_actions, 45);
  }
  EXPECT_TRUE(sweep(base, SweepGrid{}).empty());
}

TEST(Sweep, MaskCountChangesActionSpace) {
  RunConfig base = small_run();
  base.episodes = 1;
  base.max_steps = 5;
  const auto rows = sweep(base, mask_count_ablation());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].n_actions, 45);
  EXPECT_EQ(rows[1].n_actions, 405);
  const std::string table = render_table(rows, "sprite_chase");
  EXPECT_NE(table.find("No. of masks"), std::string::npos);
}

TEST(Sweep, BadCellIsReportedWithoutAbortingTheRest) {
  RunConfig base = small_run();
  base.episodes = 1;
  base.max_steps = 5;
  const auto rows = sweep(base, SweepGrid{{100, 500}, {}, {}});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].metrics.has_value());
  EXPECT_FALSE(rows[1].metrics.has_value());
  EXPECT_FALSE(rows[1].error.empty());
  EXPECT_NE(render_table(rows, "sprite_chase").find("error"), std::string::npos);
}

TEST(Sweep, PerCellOutputDirectories) {
  RunConfig base = small_run();
  base.episodes = 1;
  base.max_steps = 5;
  base.out_dir = scratch("sweep").string();
  sweep(base, SweepGrid{{70, 100}, {}, {}});
  EXPECT_TRUE(fs::exists(fs::path(base.out_dir) / "scale70_speed-_masks-" / "metrics.json"));
  EXPECT_TRUE(fs::exists(fs::path(base.out_dir) / "scale100_speed-_masks-" / "metrics.json"));
  fs::remove_all(base.out_dir);
}

TEST(TrajectoryLog, HeaderThenOneRecordPerStep) {
  const TrajectoryLog empty(EnvConfig{}, "rider", 0);
  EXPECT_EQ(empty.size(), 1u);
  EXPECT_EQ(json::parse(empty.lines()[0]).at("kind"), "header");
  const RunOutput out = run_episodes(small_run("rider"), make_policy("random"));
  for (const auto& ep : out.episodes) {
    EXPECT_EQ(ep.log.size(), static_cast<std::size_t>(ep.steps) + 1);
    const json last = json::parse(ep.log.lines().back());
    EXPECT_EQ(last.at("t"), ep.steps - 1);
    for (const char* key : {"action", "executed", "raw", "aux", "masks", "terminal"}) EXPECT_TRUE(last.contains(key));
  }
}
