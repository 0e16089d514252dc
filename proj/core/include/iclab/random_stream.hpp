#pragma once

#include <cstdint>
#include <random>

namespace iclab {

enum class StreamRole : std::uint64_t {
  train = 0x7472,
  validation = 0x7661,
  probe = 0x7072,
  regression = 0x7267,
};

enum class StreamField : std::uint64_t {
  mu = 1,
  labels = 2,
  gaussian_noise = 3,
  label_flips = 4,
  query_label = 5,
  query_flip = 6,
  summary = 7,
  task_params = 8,
  inputs = 9,
};

// Coordinates of one independent random stream. Every random draw in the
// library comes from a stream addressed by such a key, so any batch can be
// regenerated from (seed, role, step) without storing it.
struct StreamKey {
  std::uint64_t base_seed = 0;
  StreamRole role = StreamRole::train;
  std::int64_t step = 0;
  std::uint64_t task = 0;
  StreamField field = StreamField::mu;
};

// SplitMix64 finalizer chained over every key component.
std::uint64_t derive_seed(const StreamKey& key) noexcept;

class RandomStream {
 public:
  using engine_type = std::mt19937_64;

  explicit RandomStream(const StreamKey& key) : engine_(derive_seed(key)) {}
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  double gaussian();
  double uniform(double lo, double hi);
  // +1 or -1 with probability 1/2 each.
  int rademacher();
  bool bernoulli(double p);
  int binomial(int trials, double p);

  engine_type& engine() noexcept { return engine_; }

 private:
  engine_type engine_;
};

}  // namespace iclab
