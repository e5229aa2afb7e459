#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "taskgen/llm.hpp"
#include "taskgen/pipeline.hpp"
#include "taskgen/sandbox.hpp"
#include "taskgen/text.hpp"

namespace testing_support {

using nlohmann::json;
using namespace taskgen;

inline std::string test_path(const std::string& rel) {
  return (std::filesystem::path(TASKGEN_TEST_DIR) / rel).string();
}

inline json load_json(const std::string& rel) { return json::parse(text::read_file(test_path(rel))); }

/// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  ScratchDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "taskgen-test-XXXXXX").string();
    path_ = ::mkdtemp(tmpl.data());
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::string& path() const { return path_; }
  std::string operator/(const std::string& rel) const { return (std::filesystem::path(path_) / rel).string(); }

 private:
  std::string path_;
};

inline constexpr const char* kDescription =
    "Write a function `total_points(scores)` that returns the sum of a list of integer scores.";
inline constexpr const char* kSkeleton = "def total_points(scores):\n    # TODO: add up the scores\n    pass";
inline constexpr const char* kTests =
    "def test_total_points_basic():\n    assert total_points([3, 4, 5]) == 12\n\n"
    "def test_total_points_empty():\n    assert total_points([]) == 0\n";
inline constexpr const char* kSolution =
    "def total_points(scores):\n    total = 0\n    for s in scores:\n        total += s\n    return total\n";
inline constexpr const char* kBrokenSolution = "def total_points(scores:\n    return 0\n";

inline std::string fenced(const std::string& code) { return "```python\n" + code + "\n```"; }

/// Description, skeleton and tests as repeat entries.
inline std::vector<llm::ScriptedProvider::Entry> stage_entries() {
  return {{"Task component: description", kDescription, true},
          {"Task component: skeleton", fenced(kSkeleton), true},
          {"Task component: tests", fenced(kTests), true}};
}

inline std::shared_ptr<llm::Gateway> gateway_for(std::shared_ptr<llm::Provider> p) {
  return std::make_shared<llm::Gateway>(std::move(p), llm::RetryPolicy{}, 1,
                                        [](std::chrono::milliseconds) {});
}

inline std::shared_ptr<llm::Gateway> scripted_gateway(std::vector<llm::ScriptedProvider::Entry> e) {
  return gateway_for(std::make_shared<llm::ScriptedProvider>(std::move(e)));
}

inline std::shared_ptr<sandbox::PythonSandbox> shared_sandbox() {
  static auto sb = std::make_shared<sandbox::PythonSandbox>();
  return sb;
}

inline sandbox::SandboxLimits quick_limits(int timeout_ms = 3000) {
  sandbox::SandboxLimits l;
  l.wall_timeout_ms = timeout_ms;
  return l;
}

/// Fixed clock so generated tasks are byte-comparable.
inline Timestamp fixed_time() { return Timestamp{std::chrono::milliseconds{1700000000000}}; }

inline std::shared_ptr<pipeline::Pipeline> make_pipeline(std::shared_ptr<llm::Gateway> gw,
                                                         std::shared_ptr<sandbox::Runner> runner = nullptr,
                                                         int max_iterations = 5) {
  pipeline::PipelineConfig cfg;
  cfg.max_iterations = max_iterations;
  cfg.limits = quick_limits();
  return std::make_shared<pipeline::Pipeline>(std::move(gw), runner ? runner : shared_sandbox(),
                                              prompt::default_templates(), cfg, fixed_time);
}

/// Runner driven by a callback; counts calls.
class FakeRunner : public sandbox::Runner {
 public:
  using Fn = std::function<ExecutionOutcome(const std::string&, const std::string&)>;
  explicit FakeRunner(Fn fn) : fn_(std::move(fn)) {}
  ExecutionOutcome run_solution_against_tests(const std::string& solution, const std::string& tests,
                                              const sandbox::SandboxLimits&) override {
    ++calls;
    return fn_(solution, tests);
  }
  int calls = 0;

 private:
  Fn fn_;
};

inline ExecutionOutcome passing_outcome(int n = 2) {
  ExecutionOutcome o;
  o.compile_ok = true;
  for (int i = 0; i < n; ++i) o.tests.push_back({"test_" + std::to_string(i), true, ""});
  return o;
}

}  // namespace testing_support
