#include "taskgen/llm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "taskgen/text.hpp"

namespace taskgen::llm {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxRecords = 1024;

const PromptMessages& require_messages(const PromptMessages& m) {
  if (m.empty() || m.front().role != prompt::Role::system) {
    throw std::invalid_argument("prompt messages must start with a system message");
  }
  return m;
}

const std::string& final_user_message(const PromptMessages& m) {
  static const std::string empty;
  for (auto it = m.rbegin(); it != m.rend(); ++it) {
    if (it->role == prompt::Role::user) return it->content;
  }
  return empty;
}

ComponentModelConfig apply(ComponentModelConfig cfg, const json& j) {
  if (j.contains("model_id")) cfg.model_id = j.at("model_id").get<std::string>();
  if (j.contains("temperature")) cfg.temperature = j.at("temperature").get<double>();
  if (j.contains("max_output_tokens")) cfg.max_output_tokens = j.at("max_output_tokens").get<int>();
  if (j.contains("endpoint_url")) cfg.endpoint_url = j.at("endpoint_url").get<std::string>();
  if (j.contains("credential_env_var")) {
    cfg.credential_env_var = j.at("credential_env_var").get<std::string>();
  }
  if (j.contains("request_timeout_ms")) cfg.request_timeout_ms = j.at("request_timeout_ms").get<int>();
  return cfg;
}

}  // namespace

void validate(const ComponentModelConfig& cfg) {
  if (!(cfg.temperature >= 0.0 && cfg.temperature <= 2.0)) {
    throw std::invalid_argument("temperature must be in [0, 2]");
  }
  if (cfg.max_output_tokens <= 0) throw std::invalid_argument("max_output_tokens must be > 0");
  if (cfg.request_timeout_ms <= 0) throw std::invalid_argument("request_timeout_ms must be > 0");
}

ModelConfigs default_model_configs() {
  ModelConfigs configs;
  for (auto c : prompt::kAllComponents) {
    ComponentModelConfig cfg;
    cfg.component = c;
    configs[c] = cfg;
  }
  return configs;
}

ModelConfigs model_configs_from_json(const json& j) {
  ComponentModelConfig base;
  if (j.contains("defaults")) base = apply(base, j.at("defaults"));
  ModelConfigs configs;
  for (auto c : prompt::kAllComponents) {
    auto cfg = base;
    cfg.component = c;
    if (j.contains("components") && j.at("components").contains(prompt::to_string(c))) {
      cfg = apply(cfg, j.at("components").at(prompt::to_string(c)));
    }
    validate(cfg);
    configs[c] = cfg;
  }
  if (j.contains("components")) {
    for (auto it = j.at("components").begin(); it != j.at("components").end(); ++it) {
      prompt::component_from_string(it.key());
    }
  }
  return configs;
}

ModelConfigs load_model_configs(const std::string& path) {
  return model_configs_from_json(json::parse(text::read_file(path)));
}

// --- Gateway ---------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<Provider> provider, RetryPolicy policy, std::uint64_t jitter_seed,
                 Sleeper sleeper)
    : provider_(std::move(provider)),
      policy_(policy),
      sleeper_(sleeper ? std::move(sleeper)
                       : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
      rng_(jitter_seed) {
  if (!provider_) throw std::invalid_argument("gateway needs a provider");
  if (policy_.max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
}

std::chrono::milliseconds Gateway::backoff(int failed_attempts) {
  const double cap = static_cast<double>(policy_.base_delay.count()) *
                     std::pow(policy_.factor, failed_attempts - 1);
  std::lock_guard lock(mutex_);
  std::uniform_real_distribution<double> dist(0.0, cap);
  return std::chrono::milliseconds(static_cast<std::int64_t>(dist(rng_)));
}

CompletionRecord Gateway::complete_with_record(const PromptMessages& messages,
                                               const ComponentModelConfig& cfg) {
  require_messages(messages);
  validate(cfg);
  const auto start = std::chrono::steady_clock::now();
  for (int attempt = 1;; ++attempt) {
    try {
      CompletionRecord rec;
      rec.response_text = provider_->complete(messages, cfg);
      rec.messages = messages;
      rec.model_id = cfg.model_id;
      rec.attempt_count = attempt;
      rec.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
      std::lock_guard lock(mutex_);
      records_.push_back(rec);
      if (records_.size() > kMaxRecords) records_.pop_front();
      return rec;
    } catch (const TransientError& e) {
      if (attempt >= policy_.max_attempts) {
        throw ProviderUnavailable("provider unavailable after " + std::to_string(attempt) +
                                  " attempts: " + e.what());
      }
      sleeper_(backoff(attempt));
    }
  }
}

std::string Gateway::complete(const PromptMessages& messages, const ComponentModelConfig& cfg) {
  return complete_with_record(messages, cfg).response_text;
}

std::vector<CompletionRecord> Gateway::records() const {
  std::lock_guard lock(mutex_);
  return {records_.begin(), records_.end()};
}

// --- ScriptedProvider ------------------------------------------------------

ScriptedProvider::ScriptedProvider(std::vector<Entry> script)
    : script_(std::move(script)), consumed_(script_.size(), false) {
  if (script_.empty()) throw std::invalid_argument("script must not be empty");
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::string& path) {
  auto j = json::parse(text::read_file(path));
  const json& entries = j.is_object() ? j.at("entries") : j;
  std::vector<Entry> script;
  for (const auto& e : entries) {
    script.push_back({e.value("match", std::string{}), e.at("response").get<std::string>(),
                      e.value("repeat", false)});
  }
  return std::make_shared<ScriptedProvider>(std::move(script));
}

std::string ScriptedProvider::complete(const PromptMessages& messages, const ComponentModelConfig&) {
  const auto& user = final_user_message(messages);
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < script_.size(); ++i) {
    if (consumed_[i] || user.find(script_[i].match) == std::string::npos) continue;
    if (!script_[i].repeat) consumed_[i] = true;
    return script_[i].response;
  }
  throw ScriptExhausted("no script entry matches the prompt");
}

std::size_t ScriptedProvider::remaining() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count(consumed_.begin(), consumed_.end(), false));
}

// --- HttpProvider ----------------------------------------------------------

json HttpProvider::request_body(const PromptMessages& messages, const ComponentModelConfig& cfg) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", prompt::to_string(m.role)}, {"content", m.content}});
  return {{"model", cfg.model_id},
          {"messages", std::move(msgs)},
          {"temperature", cfg.temperature},
          {"max_tokens", cfg.max_output_tokens}};
}

std::string HttpProvider::parse_response(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error&) {
    throw ResponseMalformed("provider response is not JSON");
  }
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw ResponseMalformed("message content is not text");
    return content.get<std::string>();
  } catch (const json::exception&) {
    throw ResponseMalformed("provider response lacks choices[0].message.content");
  }
}

std::string HttpProvider::complete(const PromptMessages& messages, const ComponentModelConfig& cfg) {
  const auto& url = cfg.endpoint_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ProviderUnavailable("endpoint_url lacks a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Headers headers;
  if (!cfg.credential_env_var.empty()) {
    const char* key = std::getenv(cfg.credential_env_var.c_str());
    if (!key || !*key) throw AuthFailure("environment variable " + cfg.credential_env_var + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  httplib::Client client(origin);
  const auto timeout = std::chrono::milliseconds(cfg.request_timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  auto res = client.Post(path, headers, request_body(messages, cfg).dump(), "application/json");
  if (!res) throw TransientError("transport failure: " + httplib::to_string(res.error()));
  if (res->status == 401 || res->status == 403) {
    throw AuthFailure("provider rejected credentials (HTTP " + std::to_string(res->status) + ")");
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransientError("HTTP " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw ProviderUnavailable("provider rejected the request (HTTP " + std::to_string(res->status) + ")");
  }
  return parse_response(res->body);
}

// --- RecordReplayProvider --------------------------------------------------

RecordReplayProvider::RecordReplayProvider(Mode mode, std::string archive_dir,
                                           std::shared_ptr<Provider> inner)
    : mode_(mode),
      archive_path_((std::filesystem::path(archive_dir) / "archive.jsonl").string()),
      inner_(std::move(inner)) {
  namespace fs = std::filesystem;
  if (mode_ == Mode::record) {
    if (!inner_) throw std::invalid_argument("record mode needs an inner provider");
    fs::create_directories(archive_dir);
  } else if (!fs::exists(archive_path_)) {
    throw LlmError("replay archive not found: " + archive_path_);
  }
  if (fs::exists(archive_path_)) {
    std::ifstream in(archive_path_);
    std::string line;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      auto j = json::parse(line);
      archive_[j.at("hash").get<std::string>()].push_back(j.at("response").get<std::string>());
    }
  }
}

std::string RecordReplayProvider::prompt_hash(const PromptMessages& messages,
                                              const ComponentModelConfig& cfg) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", prompt::to_string(m.role)}, {"content", m.content}});
  json key{{"model", cfg.model_id}, {"messages", std::move(msgs)}};
  return text::sha256_hex(key.dump());
}

std::string RecordReplayProvider::complete(const PromptMessages& messages,
                                           const ComponentModelConfig& cfg) {
  const auto hash = prompt_hash(messages, cfg);
  if (mode_ == Mode::replay) {
    std::lock_guard lock(mutex_);
    auto it = archive_.find(hash);
    if (it == archive_.end()) throw ReplayMiss(hash);
    // Repeated prompts replay in recorded order, then stick to the last answer.
    auto& cur = cursor_[hash];
    const auto& answer = it->second[std::min(cur, it->second.size() - 1)];
    ++cur;
    return answer;
  }
  auto response = inner_->complete(messages, cfg);
  std::lock_guard lock(mutex_);
  archive_[hash].push_back(response);
  std::ofstream out(archive_path_, std::ios::app);
  out << json{{"hash", hash}, {"model_id", cfg.model_id}, {"response", response}}.dump() << "\n";
  out.flush();
  if (!out) throw LlmError("cannot append to " + archive_path_);
  return response;
}

std::shared_ptr<Provider> make_provider(const std::string& spec) {
  if (spec == "live") return std::make_shared<HttpProvider>();
  auto colon = spec.find(':');
  if (colon != std::string::npos) {
    auto kind = spec.substr(0, colon);
    auto arg = spec.substr(colon + 1);
    if (kind == "scripted") return ScriptedProvider::from_file(arg);
    if (kind == "replay") {
      return std::make_shared<RecordReplayProvider>(RecordReplayProvider::Mode::replay, arg);
    }
    if (kind == "record") {
      return std::make_shared<RecordReplayProvider>(RecordReplayProvider::Mode::record, arg,
                                                    std::make_shared<HttpProvider>());
    }
  }
  throw std::invalid_argument("provider must be live, scripted:FILE, replay:DIR or record:DIR; got '" +
                              spec + "'");
}

}  // namespace taskgen::llm
