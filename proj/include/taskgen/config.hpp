#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "taskgen/sandbox.hpp"

namespace taskgen {

/// One JSON file configures the service. Relative paths resolve against the
/// file's directory. Credentials never live here: model configs name the
/// environment variable that holds the key.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// `live`, `scripted:FILE`, `replay:DIR` or `record:DIR`.
  std::string provider = "live";
  /// Per-component model settings (see llm::model_configs_from_json).
  std::optional<std::string> provider_config;
  /// Empty means the built-in templates.
  std::string template_dir;
  std::string store_root = "taskgen-data";
  std::string teaching_language = "python";
  int max_iterations = 5;
  sandbox::SandboxConfig sandbox;
  sandbox::SandboxLimits limits;
};

ServiceConfig service_config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
ServiceConfig load_service_config(const std::string& path);

}  // namespace taskgen
