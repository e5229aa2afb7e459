#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace taskgen {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

inline constexpr int kSchemaVersion = 1;
inline constexpr std::size_t kMaxFieldChars = 200;
inline constexpr int kMaxIterations = 5;

/// Raised when a document or value violates a type invariant. `field()` names
/// the offending field so callers can report it.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct GenerationRequest {
  std::vector<std::string> concepts;
  std::string context;
  std::string teaching_language = "python";
  std::optional<std::map<std::string, std::string>> seed_metadata;

  bool operator==(const GenerationRequest&) const = default;
};

/// Trims, truncates to 200 characters, drops empty concepts and removes
/// case-insensitive duplicates (first occurrence wins). Total.
GenerationRequest normalize_request(GenerationRequest raw);

enum class TaskStatus { functional, non_functional, generation_failed };

std::string to_string(TaskStatus s);
TaskStatus task_status_from_string(const std::string& s);

struct TestResult {
  std::string name;
  bool passed = false;
  std::string message;

  bool operator==(const TestResult&) const = default;
};

struct ExecutionOutcome {
  bool compile_ok = false;
  std::vector<TestResult> tests;
  std::string stdout_text;
  std::string stderr_text;
  bool timed_out = false;
  std::int64_t wall_time_ms = 0;

  bool all_tests_passed() const;
  /// compile_ok, not timed out, every reported test passed.
  bool passing() const;

  bool operator==(const ExecutionOutcome&) const = default;
};

struct Task {
  std::string id;
  GenerationRequest request;
  std::string description;
  std::string code_skeleton;
  std::string unit_tests;
  std::string model_solution;
  TaskStatus status = TaskStatus::generation_failed;
  int iterations_used = 0;
  Timestamp created_at{};

  std::size_t concept_count() const { return request.concepts.size(); }
  bool operator==(const Task&) const = default;
};

struct IterationRecord {
  int index = 1;
  std::string model_solution;
  std::string unit_tests;
  ExecutionOutcome outcome;
  std::optional<std::string> reflection_feedback;

  bool operator==(const IterationRecord&) const = default;
};

struct GenerationTrace {
  std::string task_id;
  std::vector<IterationRecord> iterations;

  bool operator==(const GenerationTrace&) const = default;
};

struct ExpertRating {
  std::string task_id;
  std::string rater_id;
  bool e2_solvable = false;
  bool e3_concepts = false;
  int e3_concepts_count = 0;
  bool e4_context = false;
  std::optional<bool> e5_solution;
  std::optional<bool> e6_tests;
  std::string issue_notes;

  bool operator==(const ExpertRating&) const = default;
};

struct StudentTaskRating {
  std::string task_id;
  int a1_context = 0;
  int a2_sensible = 0;
  bool a3_solvable = false;

  bool operator==(const StudentTaskRating&) const = default;
};

struct SurveyResponse {
  std::string respondent_id;
  int b1 = 0;
  int b2 = 0;
  int b3 = 0;
  int b4 = 0;

  bool operator==(const SurveyResponse&) const = default;
};

struct Submission {
  std::string id;
  std::string task_id;
  std::string submitted_code;
  ExecutionOutcome outcome;
  bool solved = false;
  Timestamp submitted_at{};

  bool operator==(const Submission&) const = default;
};

// Invariant checks. Each throws SchemaError naming the first violated field.
void validate(const GenerationRequest& r);
void validate(const ExecutionOutcome& o);
void validate(const Task& t);
void validate(const GenerationTrace& tr);
void validate(const Task& t, const GenerationTrace& tr);
void validate(const ExpertRating& r);
/// Cross-checks the E3 count against the task's requested concepts.
void validate(const ExpertRating& r, const Task& t);
void validate(const StudentTaskRating& r);
void validate(const SurveyResponse& s);
void validate(const Submission& s);

bool is_likert(int v);
/// Identifiers double as file names in the store: [A-Za-z0-9._-], 1..128 chars.
bool is_valid_id(const std::string& id);

Timestamp now_ms();

}  // namespace taskgen
