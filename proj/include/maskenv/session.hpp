#pragma once

// Live play sessions, independent of the transport.
//
// Protocol version "1". Client messages are JSON text:
//   {"kind":"hello","v":"1","player":"name"}
//   {"kind":"configure","config":{"game":"rider","env":{...}}}
//   {"kind":"reset"}
//   {"kind":"act","action":17}   or   {"kind":"act","game":1,"masks":["L"]}
//   {"kind":"bye"}
// Server messages are JSON text (hello, configure, score, terminal, bye,
// error) except frames, which are binary: a JSON envelope terminated by
// '\n' followed by the pixel body (see encode_frame).
//
// Agent mode answers every act with one frame. Human mode steps on tick():
// the latest act since the previous tick is used, or (noop, Stay) if none.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "maskenv/config_json.hpp"
#include "maskenv/env.hpp"
#include "maskenv/error.hpp"
#include "maskenv/games.hpp"
#include "maskenv/harness.hpp"

namespace maskenv {

inline constexpr std::string_view kProtocolVersion = "1";
inline constexpr double kDefaultStepHz = 15.0;  // 60 raw frames/s at frameskip 4

// ---------------------------------------------------------------------------
// Frame payload

struct FramePayload {
  std::int64_t step = 0;
  double score = 0.0;
  double reward = 0.0;
  bool terminal = false;
  GrayFrame observation;  // newest 84x84 agent frame
  GrayFrame view;         // native-resolution masked frame for display
  std::vector<RectPieces> rects;
  DecaySpec decay;

  bool operator==(const FramePayload&) const = default;
};

namespace detail {

inline json section(const GrayFrame& f, std::size_t offset) {
  return {{"height", f.height()}, {"width", f.width()}, {"offset", offset}, {"length", f.size()}};
}

inline GrayFrame read_section(const json& s, std::string_view body) {
  const int h = s.at("height").get<int>(), w = s.at("width").get<int>();
  const auto offset = s.at("offset").get<std::size_t>(), length = s.at("length").get<std::size_t>();
  if (h < 0 || w < 0 || length != static_cast<std::size_t>(h) * static_cast<std::size_t>(w) ||
      offset > body.size() || length > body.size() - offset)
    throw Error(Errc::Protocol, "frame section out of bounds");
  GrayFrame f(h, w);
  std::copy_n(reinterpret_cast<const std::uint8_t*>(body.data() + offset), length, f.pixels().begin());
  return f;
}

}  // namespace detail

inline std::string encode_frame(const FramePayload& p) {
  json rects = json::array();
  for (const auto& pieces : p.rects) {
    json mask = json::array();
    for (const Rect& r : pieces)
      mask.push_back({{"top", r.top}, {"left", r.left}, {"height", r.height}, {"width", r.width}});
    rects.push_back(mask);
  }
  const json envelope = {{"kind", "frame"},
                         {"v", kProtocolVersion},
                         {"step", p.step},
                         {"score", p.score},
                         {"reward", p.reward},
                         {"terminal", p.terminal},
                         {"obs", detail::section(p.observation, 0)},
                         {"view", detail::section(p.view, p.observation.size())},
                         {"rects", rects},
                         {"decay", to_json(p.decay)}};
  std::string out = envelope.dump();
  out.push_back('\n');
  for (auto px : p.observation.pixels()) out.push_back(static_cast<char>(px));
  for (auto px : p.view.pixels()) out.push_back(static_cast<char>(px));
  return out;
}

inline FramePayload decode_frame(std::string_view data) {
  const auto nl = data.find('\n');
  if (nl == std::string_view::npos) throw Error(Errc::Protocol, "frame has no envelope terminator");
  try {
    const json env = json::parse(data.substr(0, nl));
    if (env.at("kind") != "frame") throw Error(Errc::Protocol, "not a frame message");
    const std::string_view body = data.substr(nl + 1);
    FramePayload p;
    p.step = env.at("step").get<std::int64_t>();
    p.score = env.at("score").get<double>();
    p.reward = env.at("reward").get<double>();
    p.terminal = env.at("terminal").get<bool>();
    p.observation = detail::read_section(env.at("obs"), body);
    p.view = detail::read_section(env.at("view"), body);
    for (const json& mask : env.at("rects")) {
      RectPieces pieces;
      for (const json& r : mask)
        pieces.push_back({r.at("top").get<int>(), r.at("left").get<int>(), r.at("height").get<int>(),
                          r.at("width").get<int>()});
      p.rects.push_back(std::move(pieces));
    }
    apply_json(env.at("decay"), p.decay);
    return p;
  } catch (const json::exception& e) {
    throw Error(Errc::Protocol, std::string("bad frame envelope: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Episode store: one append-only JSON-lines file per UTC day.

class EpisodeStore {
 public:
  explicit EpisodeStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  static std::string utc_date(std::chrono::system_clock::time_point t) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[16];
    std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
    return buf;
  }

  std::filesystem::path path_for(std::chrono::system_clock::time_point t) const {
    return dir_ / ("episodes-" + utc_date(t) + ".jsonl");
  }

  std::filesystem::path append(const json& record,
                               std::chrono::system_clock::time_point t = std::chrono::system_clock::now()) {
    std::lock_guard lock(mutex_);
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(Errc::IoFailure, "cannot create " + dir_.string() + ": " + ec.message());
    const auto path = path_for(t);
    std::ofstream os(path, std::ios::app | std::ios::binary);
    os << record.dump() << '\n';
    if (!os) throw Error(Errc::IoFailure, "cannot append to " + path.string());
    return path;
  }

  /// All records in one day file.
  static std::vector<json> load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
    std::vector<json> out;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) out.push_back(json::parse(line));
    return out;
  }

 private:
  std::filesystem::path dir_;
  std::mutex mutex_;
};

/// Replays the trajectory embedded in a stored episode record.
inline ReplayReport replay_record(const json& record) {
  std::stringstream ss;
  for (const json& line : record.at("trajectory")) ss << line.dump() << '\n';
  return replay(ss);
}

// ---------------------------------------------------------------------------
// Session state machine

struct Outgoing {
  bool binary = false;
  std::string data;
};

struct Reply {
  std::vector<Outgoing> messages;
  bool close = false;
};

class Session {
 public:
  enum class Phase { AwaitHello, Ready, Running, Terminal, Closed };

  Session(std::string id, RunConfig defaults, bool human = false, EpisodeStore* store = nullptr)
      : id_(std::move(id)), config_(std::move(defaults)), human_(human), store_(store) {}

  ~Session() { abort(); }

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const noexcept { return id_; }
  Phase phase() const noexcept { return phase_; }
  bool human() const noexcept { return human_; }
  double score() const noexcept { return score_; }
  std::int64_t step_index() const noexcept { return steps_; }
  const std::string& player() const noexcept { return player_; }
  const RunConfig& config() const noexcept { return config_; }
  const Environment* environment() const noexcept { return env_ ? &*env_ : nullptr; }
  const std::optional<json>& last_record() const noexcept { return last_record_; }

  Reply handle(std::string_view text) {
    if (phase_ == Phase::Closed) return fatal("session is closed");
    json msg;
    try {
      msg = json::parse(text);
    } catch (const json::exception&) {
      return fatal("malformed message");
    }
    if (!msg.is_object() || !msg.contains("kind") || !msg.at("kind").is_string())
      return fatal("message needs a string 'kind'");
    const std::string kind = msg.at("kind").get<std::string>();
    try {
      if (kind == "hello") return on_hello(msg);
      if (phase_ == Phase::AwaitHello) return fatal("expected hello first");
      if (kind == "configure") return on_configure(msg);
      if (kind == "reset") return on_reset();
      if (kind == "act") return on_act(msg);
      if (kind == "bye") return on_bye();
    } catch (const Error& e) {
      return soft_error(e.what());
    } catch (const json::exception& e) {
      return fatal(std::string("malformed message: ") + e.what());
    }
    return fatal("unknown message kind '" + kind + "'");
  }

  /// One paced step in human mode. Returns nothing outside a running episode.
  Reply tick() {
    Reply reply;
    if (!human_ || phase_ != Phase::Running) return reply;
    const JointAction action = pending_ ? *pending_ : env_->noop_action();
    pending_.reset();
    advance(action, reply);
    return reply;
  }

  /// Connection lost: persists an unfinished human episode as incomplete.
  void abort() {
    if (phase_ == Phase::Running) record(false);
    phase_ = Phase::Closed;
  }

 private:
  static Outgoing text(const json& j) { return {false, j.dump()}; }

  Reply fatal(const std::string& message) {
    Reply r;
    r.messages.push_back(text({{"kind", "error"}, {"message", message}}));
    r.close = true;
    abort();
    return r;
  }

  static Reply soft_error(const std::string& message) {
    Reply r;
    r.messages.push_back(text({{"kind", "error"}, {"message", message}}));
    return r;
  }

  Reply on_hello(const json& msg) {
    if (phase_ != Phase::AwaitHello) return fatal("duplicate hello");
    if (!msg.contains("v") || msg.at("v") != kProtocolVersion)
      return fatal("protocol version mismatch: server speaks " + std::string(kProtocolVersion));
    player_ = msg.value("player", std::string("anonymous"));
    phase_ = Phase::Ready;
    Reply r;
    r.messages.push_back(text({{"kind", "hello"},
                               {"v", kProtocolVersion},
                               {"session", id_},
                               {"mode", human_ ? "human" : "agent"}}));
    return r;
  }

  Reply on_configure(const json& msg) {
    if (phase_ != Phase::Ready) return soft_error("configure is only allowed before the first reset");
    RunConfig next = config_;
    if (msg.contains("config")) {
      const json& c = msg.at("config");
      detail::require_object(c, "config");
      detail::reject_unknown(c, {"game", "env"}, "config");
      detail::read(c, "game", next.game);
      if (c.contains("env")) apply_json(c.at("env"), next.env);
    }
    const auto source = make_game(next.game);
    next.env.validate(source->window());
    config_ = std::move(next);
    Reply r;
    const ActionSpaceSpec space{source->n_game_actions(), static_cast<int>(config_.env.masks.size())};
    r.messages.push_back(text({{"kind", "configure"},
                               {"game", config_.game},
                               {"n_game", space.n_game},
                               {"n_masks", space.n_masks},
                               {"n_actions", total_actions(space)},
                               {"noop", source->noop_action_index()},
                               {"window", {{"height", source->window().height}, {"width", source->window().width}}},
                               {"env", to_json(config_.env)}}));
    return r;
  }

  Reply on_reset() {
    if (phase_ == Phase::Running) record(false);
    if (!env_) env_.emplace(config_.env, make_game(config_.game));
    env_->reset(episodes_++);
    log_ = TrajectoryLog(env_->config(), config_.game, env_->episode());
    score_ = 0.0;
    steps_ = 0;
    pending_.reset();
    phase_ = Phase::Running;
    Reply r;
    r.messages.push_back({true, encode_frame(current_frame(0.0))});
    return r;
  }

  JointAction parse_action(const json& msg) const {
    const ActionSpaceSpec space = env_->action_space();
    if (msg.contains("action")) return decode(msg.at("action").get<std::int64_t>(), space);
    JointAction a;
    a.game_action = msg.value("game", env_->source().noop_action_index());
    if (msg.contains("masks")) {
      for (const json& d : msg.at("masks")) {
        auto dir = parse_direction(d.get<std::string>());
        if (!dir) throw Error(Errc::IndexOutOfRange, "unknown direction " + d.dump());
        a.mask_dirs.push_back(*dir);
      }
    } else {
      a.mask_dirs.assign(static_cast<std::size_t>(space.n_masks), Direction::Stay);
    }
    encode(a, space);  // range check
    return a;
  }

  Reply on_act(const json& msg) {
    if (phase_ == Phase::Terminal)
      throw Error(Errc::SteppedAfterTerminal, "episode is over; send reset or bye");
    if (phase_ != Phase::Running) return soft_error("act before reset");
    JointAction action = parse_action(msg);
    Reply r;
    if (human_)
      pending_ = std::move(action);
    else
      advance(action, r);
    return r;
  }

  Reply on_bye() {
    Reply r;
    r.messages.push_back(text({{"kind", "bye"}, {"score", score_}}));
    r.close = true;
    abort();
    return r;
  }

  void advance(const JointAction& action, Reply& r) {
    const ActionSpaceSpec space = env_->action_space();
    const std::int64_t index = encode(action, space);
    const StepResult res = env_->step(action);
    log_.append(static_cast<int>(steps_), index, encode(res.info.executed, space), res);
    ++steps_;
    score_ += res.info.raw_reward;
    r.messages.push_back({true, encode_frame(current_frame(res.reward))});
    if (res.reward != 0.0)
      r.messages.push_back(text({{"kind", "score"},
                                 {"step", steps_},
                                 {"score", score_},
                                 {"raw", res.info.raw_reward},
                                 {"aux", res.info.aux_reward},
                                 {"reward", res.reward}}));
    if (res.terminal) {
      phase_ = Phase::Terminal;
      r.messages.push_back(text({{"kind", "terminal"}, {"score", score_}, {"steps", steps_}}));
      record(true);
    }
  }

  FramePayload current_frame(double reward) const {
    FramePayload p;
    p.step = steps_;
    p.score = score_;
    p.reward = reward;
    p.terminal = env_->terminal();
    p.observation = env_->observation().newest();
    p.view = env_->native_view();
    p.rects = env_->mask_rects();
    p.decay = env_->config().decay;
    return p;
  }

  void record(bool complete) {
    if (!human_ || !env_) return;
    json trajectory = json::array();
    for (const auto& line : log_.lines()) trajectory.push_back(json::parse(line));
    json rec = {{"v", kLogSchemaVersion},
                {"session", id_},
                {"player", player_},
                {"game", config_.game},
                {"episode", env_->episode()},
                {"final_score", score_},
                {"steps", steps_},
                {"complete", complete},
                {"trajectory", std::move(trajectory)}};
    if (store_) {
      try {
        store_->append(rec);
      } catch (const Error&) {
        // The live session keeps running; the record is still kept below.
      }
    }
    last_record_ = std::move(rec);
  }

  std::string id_;
  RunConfig config_;
  bool human_;
  EpisodeStore* store_;
  Phase phase_ = Phase::AwaitHello;
  std::string player_;
  std::optional<Environment> env_;
  std::uint64_t episodes_ = 0;
  TrajectoryLog log_;
  double score_ = 0.0;
  std::int64_t steps_ = 0;
  std::optional<JointAction> pending_;
  std::optional<json> last_record_;
};

}  // namespace maskenv
