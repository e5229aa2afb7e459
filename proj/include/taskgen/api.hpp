#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>

#include "json.hpp"
#include "taskgen/pipeline.hpp"
#include "taskgen/sandbox.hpp"
#include "taskgen/store.hpp"

namespace taskgen::api {

using nlohmann::json;

inline constexpr std::string_view kSessionCookie = "taskgen_session";

struct ApiRequest {
  std::string method;
  std::string path;
  std::string body;
  /// Session token from the cookie, if the client sent one.
  std::optional<std::string> session;
};

struct ApiResponse {
  int status = 200;
  /// Null for 204.
  json body;
  /// Set when the server issued a new session token.
  std::optional<std::string> new_session;
};

/// The only task shape students receive.
json student_view(const Task& t);

/// Replaces every test-source line (six characters or longer, trimmed) found
/// in `text` so grading feedback cannot reveal test code.
std::string redact(std::string text, const std::string& secret_source);

/// Request handling independent of the HTTP transport. Safe for concurrent use.
class ApiService {
 public:
  using IdSource = std::function<std::string(std::string_view prefix)>;

  ApiService(std::shared_ptr<store::Store> store, std::shared_ptr<pipeline::Pipeline> pipeline,
             std::shared_ptr<sandbox::Runner> runner, sandbox::SandboxLimits limits,
             std::string teaching_language = "python", IdSource ids = {});

  ApiResponse handle(const ApiRequest& req);

  ApiResponse create_task(const std::string& body);
  ApiResponse get_task(const std::string& id);
  ApiResponse submit(const std::string& task_id, const std::string& body);
  ApiResponse rate(const std::string& task_id, const std::string& body, const std::string& session);
  ApiResponse survey(const std::string& body, const std::string& session);
  ApiResponse stats();

 private:
  std::string next_id(std::string_view prefix);

  std::shared_ptr<store::Store> store_;
  std::shared_ptr<pipeline::Pipeline> pipeline_;
  std::shared_ptr<sandbox::Runner> runner_;
  sandbox::SandboxLimits limits_;
  std::string teaching_language_;
  IdSource ids_;
  std::mutex rng_mutex_;
  std::mt19937_64 rng_;
};

/// Stats document from whatever the store holds.
json compute_stats(const store::Store& store);

/// HTTP/1.1 transport over an ApiService; the session token travels in a cookie.
class HttpFrontend {
 public:
  explicit HttpFrontend(ApiService& service);
  ~HttpFrontend();

  /// Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  void run();
  void stop();
  void wait_until_ready();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Blocks serving HTTP until the process is stopped.
void serve(ApiService& service, const std::string& host, int port);

}  // namespace taskgen::api
