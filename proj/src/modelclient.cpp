#include "capbench/modelclient.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "capbench/ioutil.hpp"
#include "capbench/sha256.hpp"

namespace capbench {

using nlohmann::json;

// ===== Canonicalization =====

namespace {

std::string normalize_newlines(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r') {
      out.push_back('\n');
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

json canonical_object(const ModelRequest& req, const EndpointConfig& config) {
  json c;
  c["model"] = config.model;
  c["temperature"] = config.temperature;
  c["seed"] = config.seed;
  c["system"] = normalize_newlines(req.system);
  c["user"] = normalize_newlines(req.user);
  if (!req.image.empty()) c["image_sha256"] = sha256_hex(req.image);
  return c;
}

}  // namespace

std::string canonical_request(const ModelRequest& req, const EndpointConfig& config) {
  return canonical_object(req, config).dump();
}

std::string request_digest(const ModelRequest& req, const EndpointConfig& config) {
  const std::string canon = canonical_request(req, config);
  return sha256_hex(std::vector<std::uint8_t>(canon.begin(), canon.end()));
}

// ===== EndpointConfig =====

EndpointConfig EndpointConfig::from_json(const json& j) {
  EndpointConfig c;
  c.base_url = j.value("base_url", std::string());
  c.path = j.value("path", c.path);
  c.model = j.value("model", std::string());
  c.api_key_env = j.value("api_key_env", std::string());
  c.temperature = j.value("temperature", c.temperature);
  c.seed = j.value("seed", c.seed);
  c.send_seed = j.value("send_seed", c.send_seed);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  if (c.temperature < 0.0) throw ModelClientError("temperature must be >= 0");
  return c;
}

json EndpointConfig::to_json() const {
  json j;
  j["base_url"] = base_url;
  j["path"] = path;
  j["model"] = model;
  j["api_key_env"] = api_key_env;
  j["temperature"] = temperature;
  j["seed"] = seed;
  j["send_seed"] = send_seed;
  j["timeout_s"] = timeout_s;
  j["max_retries"] = max_retries;
  j["max_in_flight"] = max_in_flight;
  return j;
}

// ===== Exchange =====

json Exchange::to_json() const {
  json j;
  j["digest"] = digest;
  j["request"] = request;
  j["response"] = response;
  j["latency_ms"] = latency_ms;
  j["prompt_tokens"] = prompt_tokens ? json(*prompt_tokens) : json(nullptr);
  j["completion_tokens"] = completion_tokens ? json(*completion_tokens) : json(nullptr);
  j["note"] = note;
  return j;
}

Exchange Exchange::from_json(const json& j) {
  Exchange e;
  e.digest = j.at("digest").get<std::string>();
  e.request = j.value("request", json::object());
  e.response = j.at("response").get<std::string>();
  e.latency_ms = j.value("latency_ms", 0.0);
  if (j.contains("prompt_tokens") && !j["prompt_tokens"].is_null())
    e.prompt_tokens = j["prompt_tokens"].get<int>();
  if (j.contains("completion_tokens") && !j["completion_tokens"].is_null())
    e.completion_tokens = j["completion_tokens"].get<int>();
  e.note = j.value("note", std::string());
  return e;
}

std::vector<Exchange> load_cassette(const std::filesystem::path& path) {
  std::vector<Exchange> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(Exchange::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ModelClientError("cassette " + path.string() + " line " +
                             std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ===== Backend base =====

Exchange Backend::complete(const ModelRequest& req) {
  if (!req.image.empty())
    throw ModelClientError("complete() got a request with an image; use complete_vision()");
  return run(req);
}

Exchange Backend::complete_vision(const ModelRequest& req) {
  if (req.image.empty())
    throw ModelClientError("complete_vision() requires image bytes");
  return run(req);
}

// ===== ScriptedBackend =====

namespace {

EndpointConfig scripted_config() {
  EndpointConfig c;
  c.model = "scripted";
  return c;
}

}  // namespace

ScriptedBackend::ScriptedBackend() : Backend(scripted_config()) {}

void ScriptedBackend::add_script(const std::string& puzzle_id, const std::string& stage,
                                 const std::string& reply) {
  std::lock_guard<std::mutex> lock(mu_);
  scripts_[{puzzle_id, stage}].push_back(reply);
}

void ScriptedBackend::push_reply(const std::string& reply) {
  std::lock_guard<std::mutex> lock(mu_);
  fifo_.push_back(reply);
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(
    const std::filesystem::path& path) {
  auto backend = std::make_shared<ScriptedBackend>();
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      backend->add_script(j.at("puzzle_id").get<std::string>(),
                          j.at("stage").get<std::string>(),
                          j.at("reply").get<std::string>());
    } catch (const json::exception& e) {
      throw ModelClientError("script " + path.string() + " line " +
                             std::to_string(line_no) + ": " + e.what());
    }
  }
  return backend;
}

Exchange ScriptedBackend::run(const ModelRequest& req) {
  std::string reply;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = scripts_.find({req.meta_puzzle_id, req.meta_stage});
    if (it != scripts_.end() && !it->second.empty()) {
      // Queues let a re-prompt see the next entry; the final entry repeats so
      // replays of a settled stage stay stable.
      reply = it->second.front();
      if (it->second.size() > 1) it->second.pop_front();
    } else if (!fifo_.empty()) {
      reply = fifo_.front();
      fifo_.pop_front();
    } else {
      throw ModelClientError("scripted backend has no reply for puzzle '" +
                             req.meta_puzzle_id + "' stage '" + req.meta_stage + "'");
    }
  }
  Exchange e;
  e.digest = request_digest(req, config());
  e.request = canonical_object(req, config());
  e.response = reply;
  return e;
}

// ===== ReplayBackend =====

ReplayBackend::ReplayBackend(EndpointConfig config, const std::filesystem::path& cassette)
    : Backend(std::move(config)) {
  for (auto& e : load_cassette(cassette)) entries_[e.digest] = std::move(e);
}

Exchange ReplayBackend::run(const ModelRequest& req) {
  const std::string digest = request_digest(req, config());
  auto it = entries_.find(digest);
  if (it == entries_.end()) throw ReplayMissError(digest);
  return it->second;
}

// ===== RecordingBackend =====

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner,
                                   const std::filesystem::path& cassette)
    : Backend(inner->config()), inner_(std::move(inner)) {
  if (cassette.has_parent_path()) std::filesystem::create_directories(cassette.parent_path());
  out_.open(cassette, std::ios::app);
  if (!out_) throw ModelClientError("cannot open cassette for append: " + cassette.string());
}

Exchange RecordingBackend::run(const ModelRequest& req) {
  Exchange e = req.image.empty() ? inner_->complete(req) : inner_->complete_vision(req);
  std::lock_guard<std::mutex> lock(mu_);
  out_ << e.to_json().dump() << "\n";
  out_.flush();
  return e;
}

// ===== HttpBackend =====

namespace {

std::string base64_encode(const std::vector<std::uint8_t>& data) {
  static const char tab[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= data.size(); i += 3) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out.push_back(tab[(v >> 18) & 63]);
    out.push_back(tab[(v >> 12) & 63]);
    out.push_back(tab[(v >> 6) & 63]);
    out.push_back(tab[v & 63]);
  }
  if (i + 1 == data.size()) {
    const unsigned v = data[i] << 16;
    out.push_back(tab[(v >> 18) & 63]);
    out.push_back(tab[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == data.size()) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8);
    out.push_back(tab[(v >> 18) & 63]);
    out.push_back(tab[(v >> 12) & 63]);
    out.push_back(tab[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

// Simple counting gate; avoids the compile-time ceiling of std::counting_semaphore.
class Gate {
 public:
  explicit Gate(int slots) : slots_(slots) {}
  void acquire() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return slots_ > 0; });
    --slots_;
  }
  void release() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++slots_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int slots_;
};

constexpr int kProcessMaxInFlight = 8;

Gate& process_gate() {
  static Gate gate(kProcessMaxInFlight);
  return gate;
}

struct GateGuard {
  explicit GateGuard(Gate& g) : gate(g) { gate.acquire(); }
  ~GateGuard() { gate.release(); }
  Gate& gate;
};

json wire_body(const ModelRequest& req, const EndpointConfig& config) {
  json body;
  body["model"] = config.model;
  body["temperature"] = config.temperature;
  if (config.send_seed) body["seed"] = config.seed;
  json messages = json::array();
  if (!req.system.empty())
    messages.push_back({{"role", "system"}, {"content", req.system}});
  if (req.image.empty()) {
    messages.push_back({{"role", "user"}, {"content", req.user}});
  } else {
    json parts = json::array();
    parts.push_back({{"type", "text"}, {"text", req.user}});
    parts.push_back(
        {{"type", "image_url"},
         {"image_url", {{"url", "data:image/png;base64," + base64_encode(req.image)}}}});
    messages.push_back({{"role", "user"}, {"content", parts}});
  }
  body["messages"] = messages;
  return body;
}

}  // namespace

struct HttpBackend::Impl {
  explicit Impl(int slots) : endpoint_gate(slots) {}
  Gate endpoint_gate;
};

HttpBackend::HttpBackend(EndpointConfig config) : Backend(std::move(config)) {
  if (this->config().base_url.empty()) throw ModelClientError("base_url is empty");
  if (this->config().api_key_env.empty()) throw ModelClientError("api_key_env is empty");
  impl_ = std::make_unique<Impl>(this->config().max_in_flight);
}

HttpBackend::~HttpBackend() = default;

Exchange HttpBackend::run(const ModelRequest& req) {
  const EndpointConfig& cfg = config();
  const char* key = std::getenv(cfg.api_key_env.c_str());
  if (key == nullptr || *key == '\0') throw CredentialError(cfg.api_key_env);

  GateGuard process_slot(process_gate());
  GateGuard endpoint_slot(impl_->endpoint_gate);

  const std::string body = wire_body(req, cfg).dump();
  httplib::Client client(cfg.base_url);
  client.set_connection_timeout(cfg.timeout_s);
  client.set_read_timeout(cfg.timeout_s);
  client.set_default_headers({{"Authorization", std::string("Bearer ") + key}});

  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(500 << (attempt - 1)));
    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(cfg.path, body, "application/json");
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw ModelClientError("endpoint returned status " + std::to_string(res->status) +
                             ": " + res->body);
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::exception& e) {
      throw ModelClientError(std::string("unparseable endpoint reply: ") + e.what());
    }
    Exchange e;
    e.digest = request_digest(req, cfg);
    e.request = canonical_object(req, cfg);
    try {
      e.response = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw ModelClientError("endpoint reply missing choices[0].message.content");
    }
    e.latency_ms = ms;
    if (reply.contains("usage")) {
      const json& u = reply["usage"];
      if (u.contains("prompt_tokens")) e.prompt_tokens = u["prompt_tokens"].get<int>();
      if (u.contains("completion_tokens"))
        e.completion_tokens = u["completion_tokens"].get<int>();
    }
    if (!cfg.send_seed) e.note = "seed not sent: endpoint profile does not accept one";
    return e;
  }
  throw ModelClientError("request failed after " + std::to_string(cfg.max_retries + 1) +
                         " attempts; last error: " + last_error);
}

}  // namespace capbench
