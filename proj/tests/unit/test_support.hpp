#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>

#include "iclab/task_config.hpp"

namespace iclab::testing {

inline TaskConfig small_config(std::size_t d = 6, std::size_t n = 5, std::size_t b = 16) {
  TaskConfig c;
  c.d = d;
  c.n = n;
  c.b = b;
  c.signal = SignalRegime::constant(2.0);
  c.eval_every = 5;
  c.max_steps = 20;
  c.base_seed = 11;
  return c;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto tick = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("iclab_test_" + std::to_string(tick) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace iclab::testing
