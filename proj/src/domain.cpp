#include "taskgen/domain.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "taskgen/text.hpp"

namespace taskgen {

GenerationRequest normalize_request(GenerationRequest raw) {
  GenerationRequest out;
  out.teaching_language = raw.teaching_language;
  out.seed_metadata = std::move(raw.seed_metadata);
  out.context = text::utf8_truncate(text::trim(raw.context), kMaxFieldChars);

  std::set<std::string> seen;
  for (const auto& c : raw.concepts) {
    auto trimmed = text::utf8_truncate(text::trim(c), kMaxFieldChars);
    if (trimmed.empty()) continue;
    if (!seen.insert(text::to_lower_ascii(trimmed)).second) continue;
    out.concepts.push_back(std::move(trimmed));
  }
  return out;
}

std::string to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::functional: return "functional";
    case TaskStatus::non_functional: return "non_functional";
    case TaskStatus::generation_failed: return "generation_failed";
  }
  return "generation_failed";
}

TaskStatus task_status_from_string(const std::string& s) {
  if (s == "functional") return TaskStatus::functional;
  if (s == "non_functional") return TaskStatus::non_functional;
  if (s == "generation_failed") return TaskStatus::generation_failed;
  throw SchemaError("status", "unknown task status '" + s + "'");
}

bool ExecutionOutcome::all_tests_passed() const {
  return std::all_of(tests.begin(), tests.end(), [](const TestResult& t) { return t.passed; });
}

bool ExecutionOutcome::passing() const { return compile_ok && !timed_out && all_tests_passed(); }

bool is_likert(int v) { return v >= 1 && v <= 5; }

bool is_valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

Timestamp now_ms() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

namespace {

void require(bool ok, const char* field, const std::string& message) {
  if (!ok) throw SchemaError(field, message);
}

std::size_t utf8_length(const std::string& s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
}

}  // namespace

void validate(const GenerationRequest& r) {
  std::set<std::string> seen;
  for (const auto& c : r.concepts) {
    require(!c.empty() && text::trim(c) == c, "concepts", "concepts must be trimmed and non-empty");
    require(utf8_length(c) <= kMaxFieldChars, "concepts", "concept longer than 200 characters");
    require(seen.insert(text::to_lower_ascii(c)).second, "concepts", "duplicate concept '" + c + "'");
  }
  require(utf8_length(r.context) <= kMaxFieldChars, "context", "context longer than 200 characters");
}

void validate(const ExecutionOutcome& o) {
  require(o.compile_ok || o.tests.empty(), "tests", "tests must be empty when compile_ok is false");
  require(o.wall_time_ms >= 0, "wall_time_ms", "must be non-negative");
}

void validate(const Task& t) {
  require(is_valid_id(t.id), "id", "invalid task id '" + t.id + "'");
  validate(t.request);
  if (t.status == TaskStatus::generation_failed) {
    require(t.iterations_used >= 0 && t.iterations_used <= kMaxIterations, "iterations_used",
            "must be in [0, 5]");
  } else {
    require(t.iterations_used >= 1 && t.iterations_used <= kMaxIterations, "iterations_used",
            "must be in [1, 5]");
  }
}

void validate(const GenerationTrace& tr) {
  require(tr.iterations.size() <= static_cast<std::size_t>(kMaxIterations), "iterations",
          "at most 5 iterations");
  for (std::size_t i = 0; i < tr.iterations.size(); ++i) {
    const auto& it = tr.iterations[i];
    require(it.index == static_cast<int>(i) + 1, "index", "iteration indices must be 1..n");
    validate(it.outcome);
    const bool has_next = i + 1 < tr.iterations.size();
    require(it.reflection_feedback.has_value() == has_next, "reflection_feedback",
            "present exactly on iterations that have a successor");
  }
}

void validate(const Task& t, const GenerationTrace& tr) {
  validate(t);
  validate(tr);
  require(tr.task_id == t.id, "task_id", "trace does not belong to task");
  require(static_cast<int>(tr.iterations.size()) == t.iterations_used, "iterations_used",
          "must equal the number of trace iterations");
  const bool final_pass = !tr.iterations.empty() && tr.iterations.back().outcome.passing() &&
                          !tr.iterations.back().outcome.tests.empty();
  if (t.status != TaskStatus::generation_failed) {
    require((t.status == TaskStatus::functional) == final_pass, "status",
            "functional iff the final run passed all tests");
  }
}

void validate(const ExpertRating& r) {
  require(!r.task_id.empty(), "task_id", "missing");
  require(!r.rater_id.empty(), "rater_id", "missing");
  require(r.e5_solution.has_value() == r.e2_solvable, "e5_solution",
          "present exactly when e2_solvable is true");
  require(r.e6_tests.has_value() == r.e2_solvable, "e6_tests",
          "present exactly when e2_solvable is true");
  require(r.e3_concepts_count >= 0, "e3_concepts_count", "must be non-negative");
}

void validate(const ExpertRating& r, const Task& t) {
  validate(r);
  const int n = static_cast<int>(t.concept_count());
  require(r.e3_concepts_count <= n, "e3_concepts_count", "exceeds the number of requested concepts");
  require(r.e3_concepts == (r.e3_concepts_count == n), "e3_concepts",
          "true exactly when every requested concept was incorporated");
}

void validate(const StudentTaskRating& r) {
  require(!r.task_id.empty(), "task_id", "missing");
  require(is_likert(r.a1_context), "a1_context", "must be in 1..5");
  require(is_likert(r.a2_sensible), "a2_sensible", "must be in 1..5");
}

void validate(const SurveyResponse& s) {
  require(!s.respondent_id.empty(), "respondent_id", "missing");
  require(is_likert(s.b1), "b1", "must be in 1..5");
  require(is_likert(s.b2), "b2", "must be in 1..5");
  require(is_likert(s.b3), "b3", "must be in 1..5");
  require(is_likert(s.b4), "b4", "must be in 1..5");
}

void validate(const Submission& s) {
  require(is_valid_id(s.id), "id", "invalid submission id");
  require(!s.task_id.empty(), "task_id", "missing");
  validate(s.outcome);
  require(s.solved == (s.outcome.passing() && !s.outcome.tests.empty()), "solved",
          "true exactly when the outcome compiled, ran and passed at least one test and did not time out");
}

}  // namespace taskgen
