#include "taskgen/config.hpp"

#include <filesystem>

#include "taskgen/domain.hpp"
#include "taskgen/text.hpp"

namespace taskgen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

template <class T>
T field(const json& j, const char* name, T fallback) {
  if (!j.contains(name) || j.at(name).is_null()) return fallback;
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(name, e.what());
  }
}

}  // namespace

ServiceConfig service_config_from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw SchemaError("config", "must be a JSON object");
  static const std::vector<std::string> known{
      "listen", "provider", "provider_config", "template_dir", "store_root", "interpreter",
      "teaching_language", "max_iterations", "sandbox"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw SchemaError(k, "unknown configuration key");
    }
  }
  ServiceConfig c;
  const auto listen = field<std::string>(j, "listen", c.host + ":" + std::to_string(c.port));
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw SchemaError("listen", "expected host:port");
  c.host = listen.substr(0, colon);
  try {
    c.port = std::stoi(listen.substr(colon + 1));
  } catch (const std::exception&) {
    throw SchemaError("listen", "invalid port");
  }
  if (c.port < 0 || c.port > 65535) throw SchemaError("listen", "port out of range");

  c.provider = field<std::string>(j, "provider", c.provider);
  for (const char* prefix : {"scripted:", "replay:", "record:"}) {
    if (text::starts_with(c.provider, prefix)) {
      const std::string p(prefix);
      c.provider = p + resolve(base_dir, c.provider.substr(p.size()));
    }
  }
  if (auto pc = field<std::string>(j, "provider_config", ""); !pc.empty()) {
    c.provider_config = resolve(base_dir, pc);
  }
  c.template_dir = resolve(base_dir, field<std::string>(j, "template_dir", ""));
  c.store_root = resolve(base_dir, field<std::string>(j, "store_root", c.store_root));
  c.teaching_language = field<std::string>(j, "teaching_language", c.teaching_language);
  c.sandbox.interpreter = field<std::vector<std::string>>(j, "interpreter", c.sandbox.interpreter);
  if (c.sandbox.interpreter.empty()) throw SchemaError("interpreter", "must not be empty");
  c.max_iterations = field<int>(j, "max_iterations", c.max_iterations);
  if (c.max_iterations < 1) throw SchemaError("max_iterations", "must be >= 1");

  if (j.contains("sandbox")) {
    const auto& s = j.at("sandbox");
    if (!s.is_object()) throw SchemaError("sandbox", "must be an object");
    c.limits.wall_timeout_ms = field<int>(s, "wall_timeout_ms", c.limits.wall_timeout_ms);
    c.limits.max_output_bytes = field<std::size_t>(s, "max_output_bytes", c.limits.max_output_bytes);
    if (field<bool>(s, "network_allowed", false)) {
      throw SchemaError("sandbox.network_allowed", "network access cannot be enabled");
    }
    c.sandbox.max_concurrent = field<int>(s, "max_concurrent", c.sandbox.max_concurrent);
    c.sandbox.memory_limit_mb = field<std::size_t>(s, "memory_limit_mb", c.sandbox.memory_limit_mb);
    c.sandbox.read_only_paths =
        field<std::vector<std::string>>(s, "read_only_paths", c.sandbox.read_only_paths);
    c.sandbox.work_root = resolve(base_dir, field<std::string>(s, "work_root", ""));
    c.sandbox.keep_workdirs = field<bool>(s, "keep_workdirs", false);
  }
  try {
    sandbox::validate(c.limits);
  } catch (const std::invalid_argument& e) {
    throw SchemaError("sandbox", e.what());
  }
  if (c.sandbox.max_concurrent < 1) throw SchemaError("sandbox.max_concurrent", "must be >= 1");
  return c;
}

ServiceConfig load_service_config(const std::string& path) {
  json j;
  try {
    j = json::parse(text::read_file(path));
  } catch (const json::exception& e) {
    throw SchemaError("config", std::string("invalid JSON: ") + e.what());
  }
  auto base = fs::path(path).parent_path().string();
  return service_config_from_json(j, base.empty() ? "." : base);
}

}  // namespace taskgen
