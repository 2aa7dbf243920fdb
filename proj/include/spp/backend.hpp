#pragma once

// Chat-completion inference behind one interface: an HTTP client for
// OpenAI-compatible endpoints plus a record/replay store that makes whole
// runs deterministic. Requests are keyed by a content hash so identical
// requests always hit the same cache entry.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "spp/core.hpp"
#include "spp/detail/sha256.hpp"

namespace spp {

enum class FinishReason { Stop, Length, ContentFilter };

inline std::string to_string(FinishReason r) {
  switch (r) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::ContentFilter: return "content_filter";
  }
  throw std::logic_error("bad FinishReason");
}

inline FinishReason finish_reason_from_string(const std::string& s) {
  if (s == "stop") return FinishReason::Stop;
  if (s == "length") return FinishReason::Length;
  if (s == "content_filter") return FinishReason::ContentFilter;
  // Unknown finish reasons from live endpoints degrade to Stop.
  return FinishReason::Stop;
}

struct Completion {
  std::string text;
  FinishReason finish_reason = FinishReason::Stop;
};

struct BackendError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingRecording : BackendError {
  explicit MissingRecording(const std::string& key)
      : BackendError("no recorded response for request key " + key), key(key) {}
  std::string key;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual Completion complete(const PromptBundle& bundle,
                              const GenerationParams& params) = 0;
};

// ---------------------------------------------------------------------------
// Request keys

// Key version. Bump when the canonical encoding below changes; stores record
// it so stale fixtures fail loudly instead of silently missing.
inline constexpr const char* kCacheKeyVersion = "k1";

// Content hash of everything that determines a chat completion request:
// model name, the exact message bytes, temperature, top_p, max_tokens, and
// whether a system message is present. Encoding: JSON with alphabetically
// sorted keys, no whitespace, hashed with SHA-256.
inline std::string cache_key(const PromptBundle& bundle,
                             const GenerationParams& params) {
  nlohmann::json j;  // plain json sorts object keys
  bool has_system =
      !bundle.messages.empty() && bundle.messages.front().role == Role::System;
  j["has_system_message"] = has_system;
  j["max_tokens"] = params.max_tokens;
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : bundle.messages)
    msgs.push_back({{"content", m.content}, {"role", to_string(m.role)}});
  j["messages"] = msgs;
  j["model_name"] = params.model_name;
  j["temperature"] = params.temperature;
  j["top_p"] = params.top_p;
  return std::string(kCacheKeyVersion) + "-" +
         detail::sha256_hex(j.dump());
}

struct CacheEntry {
  std::string key;
  std::string response_text;
  FinishReason finish_reason = FinishReason::Stop;
  std::string created_at;  // ISO-8601 UTC
};

template <typename J>
void to_json(J& j, const CacheEntry& e) {
  j = J{{"key", e.key},
        {"response_text", e.response_text},
        {"finish_reason", to_string(e.finish_reason)},
        {"created_at", e.created_at}};
}
template <typename J>
void from_json(const J& j, CacheEntry& e) {
  j.at("key").get_to(e.key);
  j.at("response_text").get_to(e.response_text);
  e.finish_reason =
      finish_reason_from_string(j.at("finish_reason").template get<std::string>());
  e.created_at = j.value("created_at", std::string());
}

inline std::string iso8601_utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Replay store: append-only JSONL of CacheEntry records.

class ReplayStore {
 public:
  ReplayStore() = default;

  // Loads an existing store. Corrupt lines abort with the line number and
  // the parse error.
  void load_from(const std::filesystem::path& path) {
    path_ = path;
    entries_.clear();
    std::ifstream in(path);
    if (!in) throw BackendError("cannot open replay store: " + path.string());
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      CacheEntry entry;
      try {
        nlohmann::json j = nlohmann::json::parse(line);
        entry = j.get<CacheEntry>();
      } catch (const std::exception& e) {
        throw BackendError("corrupt replay store " + path.string() + " at line " +
                           std::to_string(line_no) + ": " + e.what());
      }
      entries_[entry.key] = entry;
    }
  }

  // Opens a store for recording, loading any existing entries.
  void create_at(const std::filesystem::path& path) {
    if (std::filesystem::exists(path)) {
      load_from(path);
      return;
    }
    path_ = path;
    entries_.clear();
    if (path.has_parent_path())
      std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app);
    if (!out) throw BackendError("cannot create replay store: " + path.string());
  }

  std::optional<CacheEntry> lookup(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void append(const CacheEntry& entry) {
    std::lock_guard<std::mutex> lock(mu_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw BackendError("cannot append to replay store: " + path_.string());
    nlohmann::ordered_json j = entry;
    out << j.dump() << '\n';
    entries_[entry.key] = entry;
  }

  size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.size();
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::string, CacheEntry> entries_;
};

enum class ReplayMode { Record, Replay, Passthrough };

inline ReplayMode replay_mode_from_string(const std::string& s) {
  std::string v = text::to_lower_ascii(text::trim(s));
  if (v == "record") return ReplayMode::Record;
  if (v == "replay") return ReplayMode::Replay;
  if (v == "passthrough") return ReplayMode::Passthrough;
  throw std::invalid_argument("unknown replay mode: " + s);
}

inline std::string to_string(ReplayMode m) {
  switch (m) {
    case ReplayMode::Record: return "record";
    case ReplayMode::Replay: return "replay";
    case ReplayMode::Passthrough: return "passthrough";
  }
  throw std::logic_error("bad ReplayMode");
}

// Wraps an inner backend with record/replay semantics:
//   Record      — serve from the store when present, otherwise call the inner
//                 backend and append the response (warm caches mean re-runs
//                 issue zero new calls)
//   Replay      — serve only stored responses; a miss is MissingRecording
//   Passthrough — always call the inner backend
class RecordReplayBackend : public ChatBackend {
 public:
  RecordReplayBackend(ReplayMode mode, const std::filesystem::path& store_path,
                      ChatBackend* inner,
                      std::function<std::string()> clock = iso8601_utc_now)
      : mode_(mode), inner_(inner), clock_(std::move(clock)) {
    if (mode == ReplayMode::Replay) {
      store_.load_from(store_path);
    } else if (mode == ReplayMode::Record) {
      store_.create_at(store_path);
    }
    if (mode != ReplayMode::Replay && inner_ == nullptr)
      throw BackendError("record/passthrough modes require an inner backend");
  }

  Completion complete(const PromptBundle& bundle,
                      const GenerationParams& params) override {
    if (mode_ == ReplayMode::Passthrough) return inner_->complete(bundle, params);
    std::string key = cache_key(bundle, params);
    if (auto hit = store_.lookup(key))
      return Completion{hit->response_text, hit->finish_reason};
    if (mode_ == ReplayMode::Replay) throw MissingRecording(key);
    Completion c = inner_->complete(bundle, params);
    store_.append(CacheEntry{key, c.text, c.finish_reason, clock_()});
    return c;
  }

  const ReplayStore& store() const { return store_; }

 private:
  ReplayMode mode_;
  ChatBackend* inner_;
  std::function<std::string()> clock_;
  ReplayStore store_;
};

// ---------------------------------------------------------------------------
// HTTP backend

struct ChatBackendConfig {
  std::string endpoint_url;  // e.g. "https://api.openai.com/v1"
  std::string api_key_env_var = "OPENAI_API_KEY";
  std::string model_name = "gpt-4";
  int timeout_ms = 120000;
  int max_retries = 3;
  std::vector<int> retry_backoff_ms = {500, 1000, 2000};
  int max_parallel_requests = 4;
  // Path appended to endpoint_url. Kept configurable because some gateways
  // (notably Azure-style deployments) use a different URL shape.
  std::string completions_path = "/chat/completions";
  bool debug_log = false;
};

template <typename J>
void to_json(J& j, const ChatBackendConfig& c) {
  j = J{{"endpoint_url", c.endpoint_url},
        {"api_key_env_var", c.api_key_env_var},
        {"model_name", c.model_name},
        {"timeout_ms", c.timeout_ms},
        {"max_retries", c.max_retries},
        {"retry_backoff_ms", c.retry_backoff_ms},
        {"max_parallel_requests", c.max_parallel_requests},
        {"completions_path", c.completions_path}};
}
template <typename J>
void from_json(const J& j, ChatBackendConfig& c) {
  c.endpoint_url = j.value("endpoint_url", std::string());
  c.api_key_env_var = j.value("api_key_env_var", std::string("OPENAI_API_KEY"));
  c.model_name = j.value("model_name", std::string("gpt-4"));
  c.timeout_ms = j.value("timeout_ms", 120000);
  c.max_retries = j.value("max_retries", 3);
  c.retry_backoff_ms = j.value("retry_backoff_ms", std::vector<int>{500, 1000, 2000});
  c.max_parallel_requests = j.value("max_parallel_requests", 4);
  c.completions_path = j.value("completions_path", std::string("/chat/completions"));
}

inline void validate(const ChatBackendConfig& c) {
  if (c.max_parallel_requests < 1)
    throw std::invalid_argument("max_parallel_requests must be >= 1");
  if (c.max_retries < 0)
    throw std::invalid_argument("max_retries must be >= 0");
}

// OpenAI-compatible chat completions client. Retries transport errors,
// HTTP 429 and 5xx with the configured backoff schedule; other HTTP errors
// fail immediately. The API key is read from the environment on each call
// and never persisted or logged.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(ChatBackendConfig config,
                           std::function<void(int)> sleep_ms = default_sleep)
      : config_(std::move(config)), sleep_ms_(std::move(sleep_ms)) {
    validate(config_);
    if (config_.endpoint_url.empty())
      throw BackendError("endpoint_url must be set for live runs");
  }

  Completion complete(const PromptBundle& bundle,
                      const GenerationParams& params) override {
    nlohmann::ordered_json body;
    body["model"] = params.model_name;
    body["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : bundle.messages)
      body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
    body["temperature"] = params.temperature;
    body["top_p"] = params.top_p;
    body["max_tokens"] = params.max_tokens;
    std::string payload = body.dump();

    httplib::Headers headers;
    const char* key = std::getenv(config_.api_key_env_var.c_str());
    if (key != nullptr && *key != '\0')
      headers.emplace("Authorization", std::string("Bearer ") + key);

    if (config_.debug_log)
      std::cerr << "[http] POST " << config_.completions_path << " " << payload
                << "\n";

    std::string last_error;
    int attempts = config_.max_retries + 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
      if (attempt > 0) {
        const auto& sched = config_.retry_backoff_ms;
        int idx = std::min<int>(attempt - 1, static_cast<int>(sched.size()) - 1);
        if (idx >= 0) sleep_ms_(sched[idx]);
      }
      httplib::Client client(config_.endpoint_url);
      client.set_read_timeout(config_.timeout_ms / 1000,
                              (config_.timeout_ms % 1000) * 1000);
      client.set_connection_timeout(config_.timeout_ms / 1000,
                                    (config_.timeout_ms % 1000) * 1000);
      auto res = client.Post(config_.completions_path, headers, payload,
                             "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body);
      if (config_.debug_log) std::cerr << "[http] response " << res->body << "\n";
      return parse_response(res->body);
    }
    throw BackendError("request failed after " + std::to_string(attempts) +
                       " attempts: " + last_error);
  }

 private:
  static void default_sleep(int ms) {
    std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  }

  static Completion parse_response(const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const std::exception& e) {
      throw BackendError("malformed completion response: " + std::string(e.what()));
    }
    if (!j.contains("choices") || j["choices"].empty())
      throw BackendError("completion response has no choices");
    const auto& choice = j["choices"][0];
    Completion c;
    if (choice.contains("message") && choice["message"].contains("content") &&
        !choice["message"]["content"].is_null())
      c.text = choice["message"]["content"].get<std::string>();
    std::string finish = choice.value("finish_reason", std::string("stop"));
    c.finish_reason = finish_reason_from_string(finish);
    return c;
  }

  ChatBackendConfig config_;
  std::function<void(int)> sleep_ms_;
};

}  // namespace spp
