#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "taskgen/domain.hpp"

namespace taskgen::sandbox {

struct SandboxLimits {
  int wall_timeout_ms = 10000;
  std::size_t max_output_bytes = 65536;
  bool network_allowed = false;
};

void validate(const SandboxLimits& limits);

/// Deployment-level settings for the child process.
struct SandboxConfig {
  /// Interpreter command prefix; the harness path is appended.
  std::vector<std::string> interpreter{"python3", "-I", "-S", "-B"};
  /// Read/execute-only trees the interpreter needs. The interpreter's own
  /// install prefix is added automatically.
  std::vector<std::string> read_only_paths{"/usr", "/lib", "/lib64", "/bin", "/etc/ld.so.cache"};
  /// Parent of the per-run working directories; empty means the system temp dir.
  std::string work_root;
  int max_concurrent = 4;
  std::size_t memory_limit_mb = 1024;
  bool keep_workdirs = false;
};

class SandboxSetupFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TaskNotFunctional : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Strips Markdown code fences from model output. If the text holds at least
/// one complete fenced block, returns the interiors of all complete blocks
/// joined by newlines; otherwise returns the text unchanged. Idempotent.
std::string sanitize_source(std::string_view text);

/// Executes a solution against tests and reports a structured outcome.
class Runner {
 public:
  virtual ~Runner() = default;
  virtual ExecutionOutcome run_solution_against_tests(const std::string& solution,
                                                      const std::string& tests,
                                                      const SandboxLimits& limits) = 0;
};

/// Which isolation layers the kernel accepted on the last run.
struct IsolationReport {
  bool network_namespace = false;
  bool landlock = false;
  bool seccomp = false;
};

/// Runs Python code in a child process: fresh working directory, empty
/// environment, resource limits, no network, filesystem confined to the
/// working directory plus read-only interpreter trees.
class PythonSandbox : public Runner {
 public:
  explicit PythonSandbox(SandboxConfig config = {});

  ExecutionOutcome run_solution_against_tests(const std::string& solution, const std::string& tests,
                                              const SandboxLimits& limits) override;

  /// Runs an arbitrary script in the same confinement with no harness. Used by
  /// isolation probes.
  ExecutionOutcome run_script(const std::string& script, const SandboxLimits& limits);

  IsolationReport last_isolation() const;
  const SandboxConfig& config() const { return config_; }

  static std::string_view harness_source();

 private:
  struct RawResult {
    std::string out;
    std::string err;
    bool timed_out = false;
    bool exited = false;
    int exit_code = -1;
    int signal = 0;
    std::int64_t wall_time_ms = 0;
  };
  RawResult execute(const std::vector<std::pair<std::string, std::string>>& files,
                    const std::string& entry, const SandboxLimits& limits);
  std::string resolve_interpreter() const;

  SandboxConfig config_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
  mutable std::mutex report_mutex_;
  IsolationReport last_report_;
};

/// Parses the harness protocol (`TEST <name> PASS`, `TEST <name> FAIL <msg>`,
/// `SUMMARY <passed>/<total>`) plus process status into an outcome.
ExecutionOutcome interpret_run(const std::string& protocol_out, const std::string& err,
                               bool exited, int exit_code, int signal, bool timed_out,
                               std::int64_t wall_time_ms);

/// Grades student code against a functional task's tests. The model solution
/// never enters the child's working directory.
ExecutionOutcome run_submission(Runner& runner, const Task& task, const std::string& student_code,
                                const SandboxLimits& limits);

}  // namespace taskgen::sandbox
