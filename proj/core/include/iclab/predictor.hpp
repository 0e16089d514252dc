#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace iclab {

enum class Transport { http_endpoint, subprocess };

// How to reach an out-of-process predictor.
//   http_endpoint: POST {model, prompt, max_tokens} as JSON, expect {text}.
//   subprocess:    a long-lived child fed one prompt per line on stdin that
//                  answers one completion per line on stdout. Newlines and
//                  backslashes inside a prompt are sent as "\n" and "\\".
struct PredictorSpec {
  Transport transport = Transport::http_endpoint;
  std::string target;  // URL or shell command
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  std::string model_id = "external";
  int max_tokens = 8;
  // Name of the environment variable holding a bearer token. The token
  // itself is never stored or written anywhere.
  std::string api_key_env;

  void validate() const;
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string model_id() const = 0;
  // One completion for `prompt`. Throws TransportError on failure.
  virtual std::string complete(const std::string& prompt) = 0;
};

class HttpPredictor final : public Predictor {
 public:
  explicit HttpPredictor(PredictorSpec spec);
  std::string model_id() const override { return spec_.model_id; }
  std::string complete(const std::string& prompt) override;

 private:
  PredictorSpec spec_;
  std::string origin_;
  std::string path_;
};

class SubprocessPredictor final : public Predictor {
 public:
  explicit SubprocessPredictor(PredictorSpec spec);
  ~SubprocessPredictor() override;
  SubprocessPredictor(const SubprocessPredictor&) = delete;
  SubprocessPredictor& operator=(const SubprocessPredictor&) = delete;

  std::string model_id() const override { return spec_.model_id; }
  std::string complete(const std::string& prompt) override;

 private:
  void start();
  void stop() noexcept;

  PredictorSpec spec_;
  std::mutex mutex_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string pending_;
};

// In-process predictor backed by a callable; used for built-in baselines and tests.
class FunctionPredictor final : public Predictor {
 public:
  FunctionPredictor(std::string model_id, std::function<std::string(const std::string&)> fn)
      : model_id_(std::move(model_id)), fn_(std::move(fn)) {}
  std::string model_id() const override { return model_id_; }
  std::string complete(const std::string& prompt) override { return fn_(prompt); }

 private:
  std::string model_id_;
  std::function<std::string(const std::string&)> fn_;
};

// On-disk request/response store keyed by (model id, prompt hash). One JSON
// file per entry: <dir>/<model>/<32 hex digits>.json = {model, prompt, response}.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> lookup(std::string_view model_id, const std::string& prompt) const;
  void store(std::string_view model_id, const std::string& prompt, const std::string& response);
  std::filesystem::path entry_path(std::string_view model_id, const std::string& prompt) const;
  const std::filesystem::path& directory() const noexcept { return dir_; }

  static std::string prompt_hash(const std::string& prompt);

 private:
  std::filesystem::path dir_;
  std::mutex write_mutex_;
};

// Serves from the cache and falls through to `backend` on a miss, recording
// the answer. With no backend it is a pure replay: misses throw TransportError.
class CachedPredictor final : public Predictor {
 public:
  CachedPredictor(std::shared_ptr<Predictor> backend, std::filesystem::path cache_dir,
                  std::string model_id = {});

  std::string model_id() const override { return model_id_; }
  std::string complete(const std::string& prompt) override;

  std::size_t hits() const noexcept { return hits_; }
  std::size_t backend_calls() const noexcept { return backend_calls_; }

 private:
  std::shared_ptr<Predictor> backend_;
  ResponseCache cache_;
  std::string model_id_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> backend_calls_{0};
};

// Parses "http://..." / "https://...", "subprocess:<command>",
// "builtin:centroid" and "builtin:constant:<text>".
PredictorSpec parse_predictor_target(std::string_view text);

// Builds the predictor for a spec; "builtin:" targets map to in-process
// predictors (see make_builtin_predictor).
std::shared_ptr<Predictor> make_predictor(const PredictorSpec& spec);

// builtin:centroid reads the labelled "x: ... -> y: k" lines of a prompt,
// forms the label-weighted mean and answers the sign of its inner product
// with the query line. builtin:constant:<text> always answers <text>.
std::shared_ptr<Predictor> make_builtin_predictor(std::string_view name);

}  // namespace iclab
