#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "iclab/errors.hpp"
#include "iclab/task_config.hpp"

namespace iclab {

SignalRegime SignalRegime::constant(double value) {
  SignalRegime s;
  s.kind = SignalKind::constant;
  s.constant_value = value;
  return s;
}

SignalRegime SignalRegime::dim_scaled(double factor) {
  SignalRegime s;
  s.kind = SignalKind::dim_scaled;
  s.scale_factor = factor;
  return s;
}

SignalRegime SignalRegime::fixed(double value) {
  SignalRegime s;
  s.kind = SignalKind::explicit_value;
  s.explicit_value = value;
  return s;
}

double SignalRegime::parameter() const noexcept {
  switch (kind) {
    case SignalKind::constant:
      return constant_value;
    case SignalKind::dim_scaled:
      return scale_factor;
    case SignalKind::explicit_value:
      return explicit_value;
  }
  return 0.0;
}

double resolve_signal_magnitude(const SignalRegime& signal, std::size_t d) {
  if (d == 0) throw ConfigError("signal magnitude: dimension must be >= 1");
  double r = 0.0;
  switch (signal.kind) {
    case SignalKind::constant:
      r = signal.constant_value;
      break;
    case SignalKind::dim_scaled:
      r = signal.scale_factor * std::sqrt(static_cast<double>(d));
      break;
    case SignalKind::explicit_value:
      r = signal.explicit_value;
      break;
  }
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw ConfigError("signal magnitude must resolve to a positive finite value, got " +
                      std::to_string(r));
  }
  return r;
}

void TaskConfig::validate() const {
  if (d < 1 || n < 1 || b < 1) throw ConfigError("d, n and b must all be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive and finite");
  }
  if (!(noise.epsilon >= 0.0 && noise.epsilon < 0.5)) {
    throw ConfigError("noise epsilon must lie in [0, 0.5)");
  }
  (void)signal_magnitude();
}

std::string_view to_string(SignalKind kind) noexcept {
  switch (kind) {
    case SignalKind::constant:
      return "constant";
    case SignalKind::dim_scaled:
      return "dim_scaled";
    case SignalKind::explicit_value:
      return "explicit";
  }
  return "?";
}

std::string_view to_string(NoiseScope scope) noexcept {
  switch (scope) {
    case NoiseScope::none:
      return "none";
    case NoiseScope::context_only:
      return "context_only";
    case NoiseScope::context_and_query:
      return "context_and_query";
  }
  return "?";
}

SignalKind parse_signal_kind(std::string_view name) {
  if (name == "constant") return SignalKind::constant;
  if (name == "dim_scaled" || name == "snr") return SignalKind::dim_scaled;
  if (name == "explicit") return SignalKind::explicit_value;
  throw ConfigError("unknown signal kind '" + std::string(name) + "'");
}

NoiseScope parse_noise_scope(std::string_view name) {
  if (name == "none") return NoiseScope::none;
  if (name == "context_only") return NoiseScope::context_only;
  if (name == "context_and_query") return NoiseScope::context_and_query;
  throw ConfigError("unknown noise scope '" + std::string(name) + "'");
}

nlohmann::json to_json(const TaskConfig& c) {
  nlohmann::json j;
  j["d"] = c.d;
  j["n"] = c.n;
  j["b"] = c.b;
  j["signal"] = {{"kind", to_string(c.signal.kind)}, {"value", c.signal.parameter()}};
  j["noise"] = {{"epsilon", c.noise.epsilon}, {"scope", to_string(c.noise.scope)}};
  j["seed"] = c.base_seed;
  j["eval_every"] = c.eval_every;
  j["max_steps"] = c.max_steps;
  j["lr"] = c.learning_rate;
  return j;
}

namespace {

// Accept both nested ({"signal": {"kind": ..}}) and dotted ("signal.kind") keys.
nlohmann::json unflatten(const nlohmann::json& j) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [key, value] : j.items()) {
    auto dot = key.find('.');
    if (dot == std::string::npos) {
      if (value.is_object() && out.contains(key)) {
        out[key].update(value);
      } else {
        out[key] = value;
      }
    } else {
      out[key.substr(0, dot)][key.substr(dot + 1)] = value;
    }
  }
  return out;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

std::size_t positive_count(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("config is missing '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 1) {
    throw ConfigError(std::string("config key '") + key + "' must be a positive integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

TaskConfig task_config_from_json(const nlohmann::json& raw) {
  if (!raw.is_object()) throw ConfigError("task config must be a JSON object");
  const nlohmann::json j = unflatten(raw);
  static const std::set<std::string> known = {"d",    "n",          "b",         "signal", "noise",
                                              "seed", "eval_every", "max_steps", "lr"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }

  TaskConfig c;
  c.d = positive_count(j, "d");
  c.n = positive_count(j, "n");
  c.b = positive_count(j, "b");

  if (j.contains("signal")) {
    const auto& s = j.at("signal");
    const auto kind = parse_signal_kind(get_or<std::string>(s, "kind", "constant"));
    switch (kind) {
      case SignalKind::constant:
        c.signal = SignalRegime::constant(get_or<double>(s, "value", 6.45));
        break;
      case SignalKind::dim_scaled:
        c.signal = SignalRegime::dim_scaled(get_or<double>(s, "value", 0.3));
        break;
      case SignalKind::explicit_value:
        if (!s.contains("value")) throw ConfigError("explicit signal requires signal.value");
        c.signal = SignalRegime::fixed(get_or<double>(s, "value", 0.0));
        break;
    }
  }
  if (j.contains("noise")) {
    const auto& nz = j.at("noise");
    c.noise.epsilon = get_or<double>(nz, "epsilon", 0.0);
    const std::string default_scope = c.noise.epsilon > 0.0 ? "context_only" : "none";
    c.noise.scope = parse_noise_scope(get_or<std::string>(nz, "scope", default_scope));
  }
  c.base_seed = get_or<std::uint64_t>(j, "seed", 0);
  c.eval_every = get_or<int>(j, "eval_every", 10);
  c.max_steps = get_or<int>(j, "max_steps", 1000);
  c.learning_rate = get_or<double>(j, "lr", 0.01);
  c.validate();
  return c;
}

TaskConfig load_task_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return task_config_from_json(j);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) noexcept {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string config_fingerprint(const TaskConfig& config) {
  return hex64(fnv1a64(to_json(config).dump()));
}

std::string recipe_fingerprint(const TaskConfig& config) {
  return config_fingerprint(config.with_seed(0));
}

}  // namespace iclab
