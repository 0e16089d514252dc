#include "iclab/predictor.hpp"

#include <cerrno>
#include <charconv>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "iclab/errors.hpp"
#include "iclab/task_config.hpp"
#include "io_util.hpp"

namespace iclab {

void PredictorSpec::validate() const {
  if (timeout.count() <= 0) throw ConfigError("predictor timeout must be positive");
  if (max_retries < 0) throw ConfigError("predictor max_retries must be >= 0");
  if (target.empty()) throw ConfigError("predictor target is empty");
  if (max_tokens < 1) throw ConfigError("predictor max_tokens must be >= 1");
}

// ---------------------------------------------------------------------------
// HTTP

HttpPredictor::HttpPredictor(PredictorSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const auto scheme_end = spec_.target.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("HTTP predictor needs a URL, got " + spec_.target);
  const auto path_start = spec_.target.find('/', scheme_end + 3);
  origin_ = spec_.target.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : spec_.target.substr(path_start);
}

std::string HttpPredictor::complete(const std::string& prompt) {
  httplib::Client client(origin_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(spec_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(spec_.timeout - secs);
  client.set_connection_timeout(secs.count(), static_cast<time_t>(usecs.count()));
  client.set_read_timeout(secs.count(), static_cast<time_t>(usecs.count()));
  client.set_write_timeout(secs.count(), static_cast<time_t>(usecs.count()));

  httplib::Headers headers;
  if (!spec_.api_key_env.empty()) {
    if (const char* key = std::getenv(spec_.api_key_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const nlohmann::json body = {{"model", spec_.model_id}, {"prompt", prompt}, {"max_tokens", spec_.max_tokens}};
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw TransportError("HTTP predictor " + origin_ + ": " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw TransportError("HTTP predictor " + origin_ + " returned status " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body).at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("HTTP predictor response is not {\"text\": ...}: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Subprocess

SubprocessPredictor::SubprocessPredictor(PredictorSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  // Writing to a child that exited must surface as EPIPE, not kill us.
  std::signal(SIGPIPE, SIG_IGN);
}

SubprocessPredictor::~SubprocessPredictor() { stop(); }

void SubprocessPredictor::start() {
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw TransportError("subprocess predictor: pipe() failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw TransportError("subprocess predictor: pipe() failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw TransportError("subprocess predictor: fork() failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", spec_.target.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);
  pending_.clear();
}

void SubprocessPredictor::stop() noexcept {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    ::kill(pid_, SIGTERM);
    ::waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
}

std::string SubprocessPredictor::complete(const std::string& prompt) {
  std::lock_guard lock(mutex_);
  if (pid_ < 0) start();

  std::string line;
  line.reserve(prompt.size() + 1);
  for (char c : prompt) {
    if (c == '\\') {
      line += "\\\\";
    } else if (c == '\n') {
      line += "\\n";
    } else {
      line += c;
    }
  }
  line += '\n';

  auto fail = [this](const std::string& why) -> TransportError {
    stop();
    return TransportError("subprocess predictor '" + spec_.target + "': " + why);
  };

  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t w = ::write(to_child_, line.data() + written, line.size() - written);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw fail("write failed");
    }
    written += static_cast<std::size_t>(w);
  }

  const auto deadline = std::chrono::steady_clock::now() + spec_.timeout;
  for (;;) {
    const auto nl = pending_.find('\n');
    if (nl != std::string::npos) {
      std::string out = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      if (!out.empty() && out.back() == '\r') out.pop_back();
      return out;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw fail("timed out");
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) throw fail("timed out");
    char buf[4096];
    const ssize_t r = ::read(from_child_, buf, sizeof(buf));
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) throw fail("child closed its output");
    pending_.append(buf, static_cast<std::size_t>(r));
  }
}

// ---------------------------------------------------------------------------
// Cache

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string ResponseCache::prompt_hash(const std::string& prompt) {
  return hex64(fnv1a64(prompt)) + hex64(fnv1a64(prompt, 0x84222325cbf29ce4ULL));
}

std::filesystem::path ResponseCache::entry_path(std::string_view model_id, const std::string& prompt) const {
  std::string safe(model_id);
  for (char& c : safe) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  if (safe.empty()) safe = "_";
  return dir_ / safe / (prompt_hash(prompt) + ".json");
}

std::optional<std::string> ResponseCache::lookup(std::string_view model_id, const std::string& prompt) const {
  const auto path = entry_path(model_id, prompt);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(detail::read_file(path));
    if (j.at("prompt").get<std::string>() != prompt || j.at("model").get<std::string>() != model_id) {
      return std::nullopt;
    }
    return j.at("response").get<std::string>();
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void ResponseCache::store(std::string_view model_id, const std::string& prompt, const std::string& response) {
  const nlohmann::json j = {{"model", model_id}, {"prompt", prompt}, {"response", response}};
  std::lock_guard lock(write_mutex_);
  detail::write_file_atomic(entry_path(model_id, prompt), j.dump(2) + "\n");
}

CachedPredictor::CachedPredictor(std::shared_ptr<Predictor> backend, std::filesystem::path cache_dir,
                                 std::string model_id)
    : backend_(std::move(backend)), cache_(std::move(cache_dir)), model_id_(std::move(model_id)) {
  if (model_id_.empty()) {
    if (!backend_) throw ConfigError("replay-only cache needs an explicit model id");
    model_id_ = backend_->model_id();
  }
}

std::string CachedPredictor::complete(const std::string& prompt) {
  if (auto hit = cache_.lookup(model_id_, prompt)) {
    ++hits_;
    return *hit;
  }
  if (!backend_) throw TransportError("replay cache miss for model '" + model_id_ + "'");
  ++backend_calls_;
  std::string response = backend_->complete(prompt);
  cache_.store(model_id_, prompt, response);
  return response;
}

// ---------------------------------------------------------------------------
// Factories

PredictorSpec parse_predictor_target(std::string_view text) {
  PredictorSpec spec;
  if (text.starts_with("http://") || text.starts_with("https://")) {
    spec.transport = Transport::http_endpoint;
    spec.target = std::string(text);
  } else if (text.starts_with("subprocess:")) {
    spec.transport = Transport::subprocess;
    spec.target = std::string(text.substr(std::string_view("subprocess:").size()));
    spec.model_id = "subprocess";
  } else if (text.starts_with("builtin:")) {
    spec.transport = Transport::subprocess;
    spec.target = std::string(text);
    spec.model_id = std::string(text);
  } else {
    throw ConfigError("unrecognised predictor '" + std::string(text) +
                      "' (expected http(s)://..., subprocess:<cmd> or builtin:<name>)");
  }
  return spec;
}

std::shared_ptr<Predictor> make_predictor(const PredictorSpec& spec) {
  if (spec.target.starts_with("builtin:")) {
    return make_builtin_predictor(std::string_view(spec.target).substr(std::string_view("builtin:").size()));
  }
  if (spec.transport == Transport::http_endpoint) return std::make_shared<HttpPredictor>(spec);
  return std::make_shared<SubprocessPredictor>(spec);
}

namespace {

bool parse_features(std::string_view s, std::vector<double>& out) {
  out.clear();
  while (!s.empty()) {
    while (!s.empty() && (s.front() == ' ' || s.front() == ',')) s.remove_prefix(1);
    if (s.empty()) break;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{}) return false;
    out.push_back(v);
    s.remove_prefix(static_cast<std::size_t>(ptr - s.data()));
  }
  return !out.empty();
}

std::string centroid_answer(const std::string& prompt) {
  std::vector<double> mean;
  std::vector<double> query;
  std::vector<double> x;
  std::size_t labelled = 0;
  std::string_view rest(prompt);
  while (!rest.empty()) {
    const auto eol = rest.find('\n');
    std::string_view line = rest.substr(0, eol);
    rest = eol == std::string_view::npos ? std::string_view{} : rest.substr(eol + 1);
    if (!line.starts_with("x: ")) continue;
    const auto arrow = line.find(" -> y:");
    if (arrow == std::string_view::npos) continue;
    if (!parse_features(line.substr(3, arrow - 3), x)) continue;
    std::string_view label = line.substr(arrow + 6);
    while (!label.empty() && label.front() == ' ') label.remove_prefix(1);
    if (label.empty()) {
      query = x;
      continue;
    }
    const double y = label.front() == '1' ? 1.0 : -1.0;
    if (mean.empty()) mean.assign(x.size(), 0.0);
    if (mean.size() != x.size()) continue;
    for (std::size_t k = 0; k < x.size(); ++k) mean[k] += y * x[k];
    ++labelled;
  }
  if (labelled == 0 || query.size() != mean.size()) return "unknown";
  double score = 0.0;
  for (std::size_t k = 0; k < query.size(); ++k) score += mean[k] * query[k];
  return score >= 0.0 ? "1" : "0";
}

}  // namespace

std::shared_ptr<Predictor> make_builtin_predictor(std::string_view name) {
  if (name == "centroid") {
    return std::make_shared<FunctionPredictor>("builtin:centroid", centroid_answer);
  }
  if (name.starts_with("constant:")) {
    std::string answer(name.substr(std::string_view("constant:").size()));
    return std::make_shared<FunctionPredictor>("builtin:constant:" + answer,
                                               [answer](const std::string&) { return answer; });
  }
  throw ConfigError("unknown builtin predictor '" + std::string(name) + "'");
}

}  // namespace iclab
