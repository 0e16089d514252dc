#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace iclab {

enum class SignalKind { constant, dim_scaled, explicit_value };

// How the mixture-mean norm R is chosen for a configuration.
struct SignalRegime {
  SignalKind kind = SignalKind::constant;
  double constant_value = 6.45;
  double scale_factor = 0.3;
  double explicit_value = 0.0;

  static SignalRegime constant(double value = 6.45);
  static SignalRegime dim_scaled(double factor = 0.3);
  static SignalRegime fixed(double value);

  // The parameter relevant to `kind` (the config file's signal.value).
  double parameter() const noexcept;
};

// R for dimension d. Throws ConfigError when the result is not positive.
double resolve_signal_magnitude(const SignalRegime& signal, std::size_t d);

enum class NoiseScope { none, context_only, context_and_query };

struct NoiseSpec {
  double epsilon = 0.0;
  NoiseScope scope = NoiseScope::none;

  double context_epsilon() const noexcept {
    return scope == NoiseScope::none ? 0.0 : epsilon;
  }
  double query_epsilon() const noexcept {
    return scope == NoiseScope::context_and_query ? epsilon : 0.0;
  }
};

struct TaskConfig {
  std::size_t d = 1;
  std::size_t n = 1;
  std::size_t b = 1;
  SignalRegime signal;
  NoiseSpec noise;
  std::uint64_t base_seed = 0;
  int eval_every = 10;
  int max_steps = 1000;
  double learning_rate = 0.01;

  // Throws ConfigError on any violated invariant.
  void validate() const;
  double signal_magnitude() const { return resolve_signal_magnitude(signal, d); }
  TaskConfig with_seed(std::uint64_t seed) const {
    TaskConfig c = *this;
    c.base_seed = seed;
    return c;
  }
};

std::string_view to_string(SignalKind kind) noexcept;
std::string_view to_string(NoiseScope scope) noexcept;
SignalKind parse_signal_kind(std::string_view name);
NoiseScope parse_noise_scope(std::string_view name);

// Config file schema: {d, n, b, signal:{kind, value}, noise:{epsilon, scope},
// seed, eval_every, max_steps, lr}. Missing optional keys take defaults.
nlohmann::json to_json(const TaskConfig& config);
TaskConfig task_config_from_json(const nlohmann::json& j);
TaskConfig load_task_config(const std::filesystem::path& path);

// 16 hex digits; FNV-1a over the canonical JSON form.
std::string config_fingerprint(const TaskConfig& config);
// Same, with base_seed zeroed: identifies the seed-independent recipe.
std::string recipe_fingerprint(const TaskConfig& config);

std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;
std::string hex64(std::uint64_t value);

}  // namespace iclab
