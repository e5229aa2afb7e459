#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "taskgen/prompt.hpp"

namespace taskgen::llm {

using prompt::Component;
using prompt::PromptMessages;

struct ComponentModelConfig {
  Component component = Component::description;
  std::string model_id = "gpt-4o";
  double temperature = 0.2;
  int max_output_tokens = 2048;
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  /// Name of the environment variable holding the API key; empty means no auth.
  std::string credential_env_var = "OPENAI_API_KEY";
  int request_timeout_ms = 60000;
};

void validate(const ComponentModelConfig& cfg);

using ModelConfigs = std::map<Component, ComponentModelConfig>;

/// One entry per component, all at library defaults.
ModelConfigs default_model_configs();
/// `{"defaults": {...}, "components": {"tests": {...}, ...}}`; every field optional.
ModelConfigs model_configs_from_json(const nlohmann::json& j);
ModelConfigs load_model_configs(const std::string& path);

struct CompletionRecord {
  PromptMessages messages;
  std::string response_text;
  std::string model_id;
  std::int64_t latency_ms = 0;
  int attempt_count = 1;
};

class LlmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
/// Retryable transport failure (connection reset, HTTP 429/5xx).
class TransientError : public LlmError {
 public:
  using LlmError::LlmError;
};
class ProviderUnavailable : public LlmError {
 public:
  using LlmError::LlmError;
};
class AuthFailure : public LlmError {
 public:
  using LlmError::LlmError;
};
class ResponseMalformed : public LlmError {
 public:
  using LlmError::LlmError;
};
class ScriptExhausted : public LlmError {
 public:
  using LlmError::LlmError;
};
class ReplayMiss : public LlmError {
 public:
  explicit ReplayMiss(std::string hash)
      : LlmError("no archived response for prompt " + hash), hash_(std::move(hash)) {}
  const std::string& hash() const { return hash_; }

 private:
  std::string hash_;
};

/// A single completion attempt. Implementations must be safe for concurrent calls.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string complete(const PromptMessages& messages, const ComponentModelConfig& cfg) = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};
  double factor = 2.0;
};

/// Retries transient failures with exponential backoff and full jitter, and
/// keeps an audit log of recent completions.
class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit Gateway(std::shared_ptr<Provider> provider, RetryPolicy policy = {},
                   std::uint64_t jitter_seed = std::random_device{}(), Sleeper sleeper = {});

  std::string complete(const PromptMessages& messages, const ComponentModelConfig& cfg);
  CompletionRecord complete_with_record(const PromptMessages& messages,
                                        const ComponentModelConfig& cfg);

  /// Most recent completions, oldest first (bounded).
  std::vector<CompletionRecord> records() const;

 private:
  std::chrono::milliseconds backoff(int failed_attempts);

  std::shared_ptr<Provider> provider_;
  RetryPolicy policy_;
  Sleeper sleeper_;
  mutable std::mutex mutex_;
  std::mt19937_64 rng_;
  std::deque<CompletionRecord> records_;
};

/// Answers from a fixed script. Each call takes the first unconsumed entry whose
/// `match` is a substring of the final user message; `repeat` entries are never
/// consumed. Call-order determinism needs externally serialized calls.
class ScriptedProvider : public Provider {
 public:
  struct Entry {
    std::string match;
    std::string response;
    bool repeat = false;
  };

  explicit ScriptedProvider(std::vector<Entry> script);
  /// JSON file: `[{"match": "...", "response": "...", "repeat": false}, ...]`.
  static std::shared_ptr<ScriptedProvider> from_file(const std::string& path);

  std::string complete(const PromptMessages& messages, const ComponentModelConfig& cfg) override;
  std::size_t remaining() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Entry> script_;
  std::vector<bool> consumed_;
};

/// Chat-completions over HTTP(S): POST {model, messages, temperature, max_tokens}
/// with bearer auth, reading choices[0].message.content.
class HttpProvider : public Provider {
 public:
  std::string complete(const PromptMessages& messages, const ComponentModelConfig& cfg) override;
  static nlohmann::json request_body(const PromptMessages& messages, const ComponentModelConfig& cfg);
  static std::string parse_response(const std::string& body);
};

class RecordReplayProvider : public Provider {
 public:
  enum class Mode { record, replay };

  /// Archive lives in `<archive_dir>/archive.jsonl`. Replay requires it to exist;
  /// record appends to it and needs `inner`.
  RecordReplayProvider(Mode mode, std::string archive_dir, std::shared_ptr<Provider> inner = nullptr);

  std::string complete(const PromptMessages& messages, const ComponentModelConfig& cfg) override;

  static std::string prompt_hash(const PromptMessages& messages, const ComponentModelConfig& cfg);

 private:
  Mode mode_;
  std::string archive_path_;
  std::shared_ptr<Provider> inner_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::vector<std::string>> archive_;
  std::unordered_map<std::string, std::size_t> cursor_;
};

/// `live`, `scripted:FILE`, `replay:DIR` or `record:DIR`.
std::shared_ptr<Provider> make_provider(const std::string& spec);

}  // namespace taskgen::llm
