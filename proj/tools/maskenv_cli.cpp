#include <CLI11.hpp>
#include <boost/asio/signal_set.hpp>
#include <csignal>
#include <iostream>
#include <optional>

#include "maskenv/harness.hpp"
#include "maskenv/server.hpp"

using namespace maskenv;

namespace {

// Command-line values; only the ones given override the config file.
struct Overrides {
  std::string config;
  std::optional<std::string> game;
  std::optional<int> mask_scale;
  std::optional<int> mask_speed;
  std::optional<int> masks;
  std::optional<std::string> boundary;
  std::optional<std::string> init;
  std::optional<bool> decay;
  std::optional<std::string> aux;
  std::optional<double> aux_weight;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<int> parallel;
  std::optional<int> max_steps;
  std::optional<std::string> out;
  std::optional<std::string> policy;
};

void add_env_flags(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON run config; flags override its values")->check(CLI::ExistingFile);
  app->add_option("--game", o.game, "sprite_chase | rider");
  app->add_option("--mask-scale", o.mask_scale, "square mask side in pixels, applied to every mask");
  app->add_option("--mask-speed", o.mask_speed, "mask speed in pixels per step");
  app->add_option("--masks", o.masks, "number of masks (copies of the first)");
  app->add_option("--boundary", o.boundary, "stop | slip")->check(CLI::IsMember({"stop", "slip"}));
  app->add_option("--init", o.init, "center | random")->check(CLI::IsMember({"center", "random"}));
  app->add_flag("--decay,!--no-decay", o.decay, "foveated resolution decay (single mask)");
  app->add_option("--aux", o.aux, "none | novelty | coverage")->check(CLI::IsMember({"none", "novelty", "coverage"}));
  app->add_option("--aux-weight", o.aux_weight, "weight of the auxiliary reward");
  app->add_option("--seed", o.seed, "root seed");
}

void add_run_flags(CLI::App* app, Overrides& o) {
  app->add_option("--episodes", o.episodes, "episodes to play");
  app->add_option("--parallel", o.parallel, "worker threads");
  app->add_option("--max-steps", o.max_steps, "step cap per episode, 0 = none");
  app->add_option("--out", o.out, "directory for config, metrics and trajectories");
  app->add_option("--policy", o.policy, "random | scripted | noop")
      ->check(CLI::IsMember({"random", "scripted", "noop"}));
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (o.game) c.game = *o.game;
  if (o.masks) {
    const MaskSpec proto = c.env.masks.empty() ? MaskSpec{} : c.env.masks.front();
    c.env.masks.assign(static_cast<std::size_t>(std::max(0, *o.masks)), proto);
  }
  for (auto& m : c.env.masks) {
    if (o.mask_scale) m.scale_h = m.scale_w = *o.mask_scale;
    if (o.mask_speed) m.speed = *o.mask_speed;
    if (o.boundary) m.boundary_mode = *parse_boundary(*o.boundary);
    if (o.init) m.init_mode = *parse_init_mode(*o.init);
  }
  if (o.decay) c.env.decay.enabled = *o.decay;
  if (o.aux) c.env.aux_reward = *parse_aux_reward(*o.aux);
  if (o.aux_weight) c.env.aux_weight = *o.aux_weight;
  if (o.seed) c.env.seed = *o.seed;
  if (o.episodes) c.episodes = *o.episodes;
  if (o.parallel) c.parallel = *o.parallel;
  if (o.max_steps) c.max_steps = *o.max_steps;
  if (o.out) c.out_dir = *o.out;
  if (o.policy) c.policy = *o.policy;
  return c;
}

int cmd_run(const Overrides& o) {
  const RunConfig cfg = resolve(o);
  const RunMetrics m = run(cfg);
  const auto total = total_actions({make_game(cfg.game)->n_game_actions(), static_cast<int>(cfg.env.masks.size())});
  std::cout << "game " << cfg.game << ", " << cfg.env.masks.size() << " mask(s), " << total << " actions\n";
  std::cout << "episodes " << m.returns.size() << ", mean_last_100 " << m.mean_last_100 << ", wall "
            << m.wall_clock_s << " s\n";
  if (!cfg.out_dir.empty()) std::cout << "wrote " << cfg.out_dir << "\n";
  return 0;
}

std::vector<int> parse_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

int cmd_sweep(const Overrides& o, const std::string& preset, const std::string& scales, const std::string& speeds,
              const std::string& counts) {
  const RunConfig base = resolve(o);
  std::vector<SweepGrid> grids;
  if (preset == "scale" || preset == "all") grids.push_back(scale_ablation());
  if (preset == "speed" || preset == "all") grids.push_back(speed_ablation());
  if (preset == "masks" || preset == "all") grids.push_back(mask_count_ablation());
  if (preset.empty()) grids.push_back({parse_list(scales), parse_list(speeds), parse_list(counts)});
  bool any_error = false;
  for (const auto& g : grids) {
    if (g.empty()) {
      std::cout << "(empty grid)\n";
      continue;
    }
    const auto rows = sweep(base, g);
    for (const auto& r : rows) any_error |= !r.error.empty();
    std::cout << render_table(rows, base.game) << "\n";
  }
  return any_error ? 1 : 0;
}

int cmd_replay(const std::string& log) {
  const ReplayReport rep = replay_file(log);
  std::cout << rep.episodes << " episode(s), " << rep.steps << " step(s) replayed\n";
  for (const auto& m : rep.mismatches) std::cout << "mismatch: " << m << "\n";
  std::cout << (rep.ok() ? "replay matches" : "replay DIFFERS") << "\n";
  return rep.ok() ? 0 : 1;
}

int cmd_serve(const Overrides& o, const std::string& bind, bool human, double hz, const std::string& store) {
  ServerOptions opts;
  opts.defaults = resolve(o);
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::ConfigInvalid, "--bind expects host:port");
  opts.host = bind.substr(0, colon);
  opts.port = static_cast<unsigned short>(std::stoi(bind.substr(colon + 1)));
  opts.human = human;
  opts.step_hz = hz;
  opts.store_dir = store;
  Server server(opts);
  const unsigned short port = server.start();
  std::cout << "listening on ws://" << opts.host << ":" << port << " (" << (human ? "human" : "agent")
            << " mode)" << std::endl;
  net::io_context signals_io;
  net::signal_set signals(signals_io, SIGINT, SIGTERM);
  signals.async_wait([](const beast::error_code&, int) {});
  signals_io.run();
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked-observation game environments: batch runs, sweeps, replay and the session server"};
  app.require_subcommand(1);

  Overrides run_o, sweep_o, serve_o;
  auto* run_cmd = app.add_subcommand("run", "play episodes and report mean_last_100");
  add_env_flags(run_cmd, run_o);
  add_run_flags(run_cmd, run_o);

  std::string preset, scales, speeds, counts;
  auto* sweep_cmd = app.add_subcommand("sweep", "grid of runs over mask scale, speed and count");
  add_env_flags(sweep_cmd, sweep_o);
  add_run_flags(sweep_cmd, sweep_o);
  auto* preset_opt = sweep_cmd->add_option("--preset", preset, "scale | speed | masks | all")
                         ->check(CLI::IsMember({"scale", "speed", "masks", "all"}));
  sweep_cmd->add_option("--scales", scales, "comma list, e.g. 70,100,130")->excludes(preset_opt);
  sweep_cmd->add_option("--speeds", speeds, "comma list")->excludes(preset_opt);
  sweep_cmd->add_option("--mask-counts", counts, "comma list")->excludes(preset_opt);

  std::string log;
  auto* replay_cmd = app.add_subcommand("replay", "re-execute a trajectory log and compare");
  replay_cmd->add_option("--log", log, "trajectories.jsonl")->required()->check(CLI::ExistingFile);

  std::string bind = "127.0.0.1:8765", store;
  bool human = false;
  double hz = kDefaultStepHz;
  auto* serve_cmd = app.add_subcommand("serve", "WebSocket session service");
  add_env_flags(serve_cmd, serve_o);
  serve_cmd->add_option("--bind", bind, "host:port (port 0 picks a free one)");
  serve_cmd->add_flag("--human", human, "server-paced steps for human players");
  serve_cmd->add_option("--step-hz", hz, "human-mode step rate");
  serve_cmd->add_option("--store", store, "directory for recorded human episodes");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return cmd_run(run_o);
    if (*sweep_cmd) return cmd_sweep(sweep_o, preset, scales, speeds, counts);
    if (*replay_cmd) return cmd_replay(log);
    if (*serve_cmd) return cmd_serve(serve_o, bind, human, hz, store);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
