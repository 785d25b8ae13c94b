#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace capbench {

// ===== Errors =====

class ModelClientError : public std::runtime_error {
 public:
  explicit ModelClientError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a replay cassette has no entry for a request digest. Means the
// fixtures and the code that builds requests have drifted apart.
class ReplayMissError : public ModelClientError {
 public:
  explicit ReplayMissError(const std::string& digest)
      : ModelClientError("replay miss: no cassette entry for request digest " + digest),
        digest_(digest) {}
  const std::string& digest() const { return digest_; }

 private:
  std::string digest_;
};

class CredentialError : public ModelClientError {
 public:
  explicit CredentialError(const std::string& env_name)
      : ModelClientError("credential environment variable " + env_name + " is not set") {}
};

// ===== Configuration =====

struct EndpointConfig {
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env;  // name of the env var holding the key; value never logged
  double temperature = 0.0;
  int seed = 41;
  bool send_seed = true;  // some endpoints reject a seed field
  int timeout_s = 60;
  int max_retries = 2;
  int max_in_flight = 4;

  static EndpointConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// ===== Requests and exchanges =====

struct ModelRequest {
  std::string system;
  std::string user;
  std::vector<std::uint8_t> image;  // empty for text-only requests

  // Routing hints for scripted backends. Never sent on the wire and never part
  // of the request digest.
  std::string meta_puzzle_id;
  std::string meta_stage;
};

// Canonical form of a request: sorted keys, newline-normalized text, image
// replaced by its hash. The digest of these bytes keys the replay cassette.
std::string canonical_request(const ModelRequest& req, const EndpointConfig& config);
std::string request_digest(const ModelRequest& req, const EndpointConfig& config);

struct Exchange {
  std::string digest;
  nlohmann::json request;  // canonical request object; contains no credentials
  std::string response;
  double latency_ms = 0.0;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
  std::string note;

  nlohmann::json to_json() const;
  static Exchange from_json(const nlohmann::json& j);
};

std::vector<Exchange> load_cassette(const std::filesystem::path& path);

// ===== Backends =====

class Backend {
 public:
  explicit Backend(EndpointConfig config) : config_(std::move(config)) {}
  virtual ~Backend() = default;

  const EndpointConfig& config() const { return config_; }

  // Text-only completion; throws if an image is attached.
  Exchange complete(const ModelRequest& req);
  // Completion with an image; throws if none is attached.
  Exchange complete_vision(const ModelRequest& req);

 protected:
  virtual Exchange run(const ModelRequest& req) = 0;

 private:
  EndpointConfig config_;
};

// Deterministic backend for tests and fixture corpora. Replies are routed by
// the request's (meta_puzzle_id, meta_stage) pair; each key holds a queue so a
// re-prompt can see a different reply (the last entry is sticky). A plain FIFO
// of replies serves requests without a matching key.
class ScriptedBackend : public Backend {
 public:
  ScriptedBackend();

  void add_script(const std::string& puzzle_id, const std::string& stage,
                  const std::string& reply);
  void push_reply(const std::string& reply);

  // Loads JSONL lines of {"puzzle_id", "stage", "reply"}.
  static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

 protected:
  Exchange run(const ModelRequest& req) override;

 private:
  std::mutex mu_;
  std::map<std::pair<std::string, std::string>, std::deque<std::string>> scripts_;
  std::deque<std::string> fifo_;
};

// Replays recorded exchanges by request digest. Network-free; needs the same
// endpoint config that was active at record time so digests line up.
class ReplayBackend : public Backend {
 public:
  ReplayBackend(EndpointConfig config, const std::filesystem::path& cassette);

  std::size_t size() const { return entries_.size(); }

 protected:
  Exchange run(const ModelRequest& req) override;

 private:
  std::map<std::string, Exchange> entries_;
};

// Wraps another backend and appends every exchange to a cassette file.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> inner, const std::filesystem::path& cassette);

 protected:
  Exchange run(const ModelRequest& req) override;

 private:
  std::shared_ptr<Backend> inner_;
  std::mutex mu_;
  std::ofstream out_;
};

// Live client speaking the standard chat-completions wire shape. The API key
// is read from the environment variable named in the config at call time.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(EndpointConfig config);
  ~HttpBackend() override;

 protected:
  Exchange run(const ModelRequest& req) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace capbench
