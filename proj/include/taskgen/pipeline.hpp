#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "taskgen/domain.hpp"
#include "taskgen/llm.hpp"
#include "taskgen/prompt.hpp"
#include "taskgen/sandbox.hpp"

namespace taskgen::pipeline {

struct PipelineConfig {
  int max_iterations = kMaxIterations;
  llm::ModelConfigs component_configs = llm::default_model_configs();
  sandbox::SandboxLimits limits;
};

void validate(const PipelineConfig& cfg);

/// Infrastructure failure during generation. Carries the task (status
/// generation_failed) and whatever trace was recorded before the failure.
class GenerationFailed : public std::runtime_error {
 public:
  GenerationFailed(const std::string& what, Task task, GenerationTrace trace)
      : std::runtime_error(what), task_(std::move(task)), trace_(std::move(trace)) {}
  const Task& task() const { return task_; }
  const GenerationTrace& trace() const { return trace_; }

 private:
  Task task_;
  GenerationTrace trace_;
};

struct GenerationResult {
  Task task;
  GenerationTrace trace;
};

/// Splits a reflection response into revised tests and solution. Sections are
/// introduced by `### UNIT TESTS` and `### MODEL SOLUTION` header lines; a
/// response with neither header is taken as a solution only.
struct ReflectionParts {
  std::optional<std::string> tests;
  std::string solution;
};
ReflectionParts parse_reflection(const std::string& response);

inline constexpr std::string_view kTestsHeader = "### UNIT TESTS";
inline constexpr std::string_view kSolutionHeader = "### MODEL SOLUTION";

/// Diagnostics handed to the reflection prompt.
std::string compiler_output(const ExecutionOutcome& o);
std::string test_results(const ExecutionOutcome& o);
/// Both of the above, as stored in IterationRecord::reflection_feedback.
std::string reflection_feedback(const ExecutionOutcome& o);

class Pipeline {
 public:
  using Clock = std::function<Timestamp()>;

  Pipeline(std::shared_ptr<llm::Gateway> gateway, std::shared_ptr<sandbox::Runner> runner,
           prompt::TemplateSet templates, PipelineConfig cfg = {}, Clock clock = now_ms);

  /// Runs the four generation stages and the reflection loop. Returns
  /// functional or non_functional tasks; throws GenerationFailed when the
  /// provider or sandbox fails.
  GenerationResult generate_task(const GenerationRequest& request, const std::string& task_id);

  const PipelineConfig& config() const { return cfg_; }

 private:
  std::string complete(prompt::Component c, const GenerationRequest& request,
                       const std::map<std::string, std::string>& prior);

  std::shared_ptr<llm::Gateway> gateway_;
  std::shared_ptr<sandbox::Runner> runner_;
  prompt::TemplateSet templates_;
  PipelineConfig cfg_;
  Clock clock_;
};

/// compile_ok, not timed out, at least one test, every test passed.
bool evaluate_e1(const ExecutionOutcome& outcome);

struct IterationStatistics {
  /// first_functional[k-1] = tasks whose first passing run was iteration k.
  std::vector<int> first_functional;
  int never_functional = 0;
  int total = 0;
  int initially_failing = 0;
  int repaired = 0;
  /// repaired / initially_failing; empty when nothing failed initially.
  std::optional<double> repair_rate() const;
};

/// Traces with no iterations (failed before the first run) are skipped.
IterationStatistics iteration_statistics(const std::vector<GenerationTrace>& traces,
                                         int max_iterations = kMaxIterations);

}  // namespace taskgen::pipeline
