#pragma once

// JSON mapping for configuration types. Keys mirror the struct field names.
// Parsing applies a partial document on top of an existing value, so a file
// or a session override only needs the keys it changes.

#include <nlohmann/json.hpp>

#include <set>
#include <string>

#include "maskenv/env.hpp"
#include "maskenv/error.hpp"
#include "maskenv/geometry.hpp"
#include "maskenv/observation.hpp"

namespace maskenv {

using nlohmann::json;

namespace detail {

inline void require_object(const json& j, std::string_view what) {
  if (!j.is_object()) throw Error(Errc::ConfigInvalid, std::string(what) + " must be an object");
}

inline void reject_unknown(const json& j, const std::set<std::string>& known, std::string_view what) {
  for (const auto& item : j.items())
    if (!known.contains(item.key()))
      throw Error(Errc::ConfigInvalid, "unknown key '" + item.key() + "' in " + std::string(what));
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename Enum, typename Parse>
void read_enum(const json& j, const char* key, Enum& out, Parse parse) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_string()) throw Error(Errc::ConfigInvalid, std::string("'") + key + "' must be a string");
  auto parsed = parse(j.at(key).get<std::string>());
  if (!parsed) throw Error(Errc::ConfigInvalid, std::string("bad value for '") + key + "'");
  out = *parsed;
}

}  // namespace detail

inline json to_json(const MaskSpec& m) {
  return {{"scale_h", m.scale_h},
          {"scale_w", m.scale_w},
          {"speed", m.speed},
          {"boundary_mode", std::string(to_string(m.boundary_mode))},
          {"init_mode", std::string(to_string(m.init_mode))}};
}

inline void apply_json(const json& j, MaskSpec& m) {
  detail::require_object(j, "mask");
  detail::reject_unknown(j, {"scale_h", "scale_w", "speed", "boundary_mode", "init_mode"}, "mask");
  detail::read(j, "scale_h", m.scale_h);
  detail::read(j, "scale_w", m.scale_w);
  detail::read(j, "speed", m.speed);
  detail::read_enum(j, "boundary_mode", m.boundary_mode, parse_boundary);
  detail::read_enum(j, "init_mode", m.init_mode, parse_init_mode);
}

inline json to_json(const DecaySpec& d) {
  return {{"enabled", d.enabled},
          {"middle_scale_factor", d.middle_scale_factor},
          {"resolutions", d.resolutions}};
}

inline void apply_json(const json& j, DecaySpec& d) {
  detail::require_object(j, "decay");
  detail::reject_unknown(j, {"enabled", "middle_scale_factor", "resolutions"}, "decay");
  detail::read(j, "enabled", d.enabled);
  detail::read(j, "middle_scale_factor", d.middle_scale_factor);
  detail::read(j, "resolutions", d.resolutions);
}

inline json to_json(const EnvConfig& c) {
  json masks = json::array();
  for (const auto& m : c.masks) masks.push_back(to_json(m));
  return {{"masks", masks},
          {"decay", to_json(c.decay)},
          {"frameskip", c.frameskip},
          {"sticky_prob", c.sticky_prob},
          {"noop_max", c.noop_max},
          {"noop_mode", std::string(to_string(c.noop_mode))},
          {"aux_reward", std::string(to_string(c.aux_reward))},
          {"aux_weight", c.aux_weight},
          {"fill", c.fill},
          {"seed", c.seed}};
}

/// A "masks" array replaces the list; each entry starts from the default mask.
inline void apply_json(const json& j, EnvConfig& c) {
  detail::require_object(j, "env");
  detail::reject_unknown(j,
                         {"masks", "decay", "frameskip", "sticky_prob", "noop_max", "noop_mode",
                          "aux_reward", "aux_weight", "fill", "seed"},
                         "env");
  if (j.contains("masks")) {
    const json& arr = j.at("masks");
    if (!arr.is_array()) throw Error(Errc::ConfigInvalid, "'masks' must be an array");
    c.masks.clear();
    for (const json& m : arr) {
      MaskSpec spec;
      apply_json(m, spec);
      c.masks.push_back(spec);
    }
  }
  if (j.contains("decay")) apply_json(j.at("decay"), c.decay);
  detail::read(j, "frameskip", c.frameskip);
  detail::read(j, "sticky_prob", c.sticky_prob);
  detail::read(j, "noop_max", c.noop_max);
  detail::read_enum(j, "noop_mode", c.noop_mode, parse_noop_mode);
  detail::read_enum(j, "aux_reward", c.aux_reward, parse_aux_reward);
  detail::read(j, "aux_weight", c.aux_weight);
  detail::read(j, "fill", c.fill);
  detail::read(j, "seed", c.seed);
}

inline EnvConfig env_config_from_json(const json& j) {
  EnvConfig c;
  apply_json(j, c);
  return c;
}

}  // namespace maskenv
