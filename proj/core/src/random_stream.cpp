#include "iclab/random_stream.hpp"

#include <boost/random/normal_distribution.hpp>

namespace iclab {

namespace {

constexpr std::uint64_t splitmix(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(const StreamKey& key) noexcept {
  std::uint64_t h = splitmix(key.base_seed);
  h = splitmix(h ^ static_cast<std::uint64_t>(key.role));
  h = splitmix(h ^ static_cast<std::uint64_t>(key.step));
  h = splitmix(h ^ key.task);
  h = splitmix(h ^ static_cast<std::uint64_t>(key.field));
  return h;
}

double RandomStream::gaussian() {
  // Boost's ziggurat sampler keeps no cached state between calls.
  return boost::random::normal_distribution<double>{}(engine_);
}

double RandomStream::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

int RandomStream::rademacher() { return (engine_() >> 63) ? 1 : -1; }

bool RandomStream::bernoulli(double p) {
  if (p <= 0.0) return false;
  return std::generate_canonical<double, 53>(engine_) < p;
}

int RandomStream::binomial(int trials, double p) {
  if (p <= 0.0 || trials <= 0) return 0;
  return std::binomial_distribution<int>(trials, p)(engine_);
}

}  // namespace iclab
