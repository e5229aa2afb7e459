#include "taskgen/codec.hpp"

#include "taskgen/text.hpp"

namespace taskgen {

namespace {

const json& field(const json& j, const char* name) {
  if (!j.is_object()) throw SchemaError(name, "enclosing value is not an object");
  auto it = j.find(name);
  if (it == j.end()) throw SchemaError(name, "missing field");
  return *it;
}

std::string get_string(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) throw SchemaError(name, "expected a string");
  return v.get<std::string>();
}

bool get_bool(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_boolean()) throw SchemaError(name, "expected a boolean");
  return v.get<bool>();
}

std::int64_t get_int(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_number_integer()) throw SchemaError(name, "expected an integer");
  return v.get<std::int64_t>();
}

std::optional<bool> get_optional_bool(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (v.is_null()) return std::nullopt;
  if (!v.is_boolean()) throw SchemaError(name, "expected a boolean or null");
  return v.get<bool>();
}

Timestamp get_timestamp(const json& j, const char* name) {
  try {
    return text::parse_timestamp(get_string(j, name));
  } catch (const std::invalid_argument& e) {
    throw SchemaError(name, e.what());
  }
}

void check_version(const json& doc) {
  if (!doc.is_object()) throw SchemaError("schema_version", "document is not an object");
  auto v = get_int(doc, "schema_version");
  if (v != kSchemaVersion) {
    throw SchemaError("schema_version", "unsupported schema version " + std::to_string(v));
  }
}

json versioned(json body) {
  body["schema_version"] = kSchemaVersion;
  return body;
}

json tests_to_json(const std::vector<TestResult>& tests) {
  json arr = json::array();
  for (const auto& t : tests) {
    arr.push_back({{"name", t.name}, {"passed", t.passed}, {"message", t.message}});
  }
  return arr;
}

}  // namespace

json to_json(const GenerationRequest& r) {
  json j{{"concepts", r.concepts},
         {"context", r.context},
         {"teaching_language", r.teaching_language},
         {"seed_metadata", nullptr}};
  if (r.seed_metadata) j["seed_metadata"] = *r.seed_metadata;
  return j;
}

GenerationRequest request_from_json(const json& j) {
  GenerationRequest r;
  const auto& concepts = field(j, "concepts");
  if (!concepts.is_array()) throw SchemaError("concepts", "expected an array");
  for (const auto& c : concepts) {
    if (!c.is_string()) throw SchemaError("concepts", "expected strings");
    r.concepts.push_back(c.get<std::string>());
  }
  r.context = get_string(j, "context");
  r.teaching_language = get_string(j, "teaching_language");
  const auto& meta = field(j, "seed_metadata");
  if (!meta.is_null()) {
    if (!meta.is_object()) throw SchemaError("seed_metadata", "expected an object or null");
    std::map<std::string, std::string> m;
    for (auto it = meta.begin(); it != meta.end(); ++it) {
      if (!it.value().is_string()) throw SchemaError("seed_metadata", "values must be strings");
      m[it.key()] = it.value().get<std::string>();
    }
    r.seed_metadata = std::move(m);
  }
  return r;
}

json to_json(const ExecutionOutcome& o) {
  return {{"compile_ok", o.compile_ok}, {"tests", tests_to_json(o.tests)},
          {"stdout", o.stdout_text},    {"stderr", o.stderr_text},
          {"timed_out", o.timed_out},   {"wall_time_ms", o.wall_time_ms}};
}

ExecutionOutcome outcome_from_json(const json& j) {
  ExecutionOutcome o;
  o.compile_ok = get_bool(j, "compile_ok");
  const auto& tests = field(j, "tests");
  if (!tests.is_array()) throw SchemaError("tests", "expected an array");
  for (const auto& t : tests) {
    o.tests.push_back({get_string(t, "name"), get_bool(t, "passed"), get_string(t, "message")});
  }
  o.stdout_text = get_string(j, "stdout");
  o.stderr_text = get_string(j, "stderr");
  o.timed_out = get_bool(j, "timed_out");
  o.wall_time_ms = get_int(j, "wall_time_ms");
  validate(o);
  return o;
}

json to_document(const Task& t) {
  return versioned({{"id", t.id},
                    {"request", to_json(t.request)},
                    {"description", t.description},
                    {"code_skeleton", t.code_skeleton},
                    {"unit_tests", t.unit_tests},
                    {"model_solution", t.model_solution},
                    {"status", to_string(t.status)},
                    {"iterations_used", t.iterations_used},
                    {"created_at", text::format_timestamp(t.created_at)}});
}

template <>
Task from_document<Task>(const json& doc) {
  check_version(doc);
  Task t;
  t.id = get_string(doc, "id");
  t.request = request_from_json(field(doc, "request"));
  t.description = get_string(doc, "description");
  t.code_skeleton = get_string(doc, "code_skeleton");
  t.unit_tests = get_string(doc, "unit_tests");
  t.model_solution = get_string(doc, "model_solution");
  t.status = task_status_from_string(get_string(doc, "status"));
  t.iterations_used = static_cast<int>(get_int(doc, "iterations_used"));
  t.created_at = get_timestamp(doc, "created_at");
  validate(t);
  return t;
}

json to_document(const GenerationTrace& tr) {
  json iterations = json::array();
  for (const auto& it : tr.iterations) {
    json j{{"index", it.index},
           {"model_solution", it.model_solution},
           {"unit_tests", it.unit_tests},
           {"outcome", to_json(it.outcome)},
           {"reflection_feedback", nullptr}};
    if (it.reflection_feedback) j["reflection_feedback"] = *it.reflection_feedback;
    iterations.push_back(std::move(j));
  }
  return versioned({{"task_id", tr.task_id}, {"iterations", std::move(iterations)}});
}

template <>
GenerationTrace from_document<GenerationTrace>(const json& doc) {
  check_version(doc);
  GenerationTrace tr;
  tr.task_id = get_string(doc, "task_id");
  const auto& iterations = field(doc, "iterations");
  if (!iterations.is_array()) throw SchemaError("iterations", "expected an array");
  for (const auto& j : iterations) {
    IterationRecord it;
    it.index = static_cast<int>(get_int(j, "index"));
    it.model_solution = get_string(j, "model_solution");
    it.unit_tests = get_string(j, "unit_tests");
    it.outcome = outcome_from_json(field(j, "outcome"));
    const auto& fb = field(j, "reflection_feedback");
    if (!fb.is_null()) {
      if (!fb.is_string()) throw SchemaError("reflection_feedback", "expected a string or null");
      it.reflection_feedback = fb.get<std::string>();
    }
    tr.iterations.push_back(std::move(it));
  }
  validate(tr);
  return tr;
}

json to_document(const ExpertRating& r) {
  json j{{"task_id", r.task_id},
         {"rater_id", r.rater_id},
         {"e2_solvable", r.e2_solvable},
         {"e3_concepts", r.e3_concepts},
         {"e3_concepts_count", r.e3_concepts_count},
         {"e4_context", r.e4_context},
         {"e5_solution", nullptr},
         {"e6_tests", nullptr},
         {"issue_notes", r.issue_notes}};
  if (r.e5_solution) j["e5_solution"] = *r.e5_solution;
  if (r.e6_tests) j["e6_tests"] = *r.e6_tests;
  return versioned(std::move(j));
}

template <>
ExpertRating from_document<ExpertRating>(const json& doc) {
  check_version(doc);
  ExpertRating r;
  r.task_id = get_string(doc, "task_id");
  r.rater_id = get_string(doc, "rater_id");
  r.e2_solvable = get_bool(doc, "e2_solvable");
  r.e3_concepts = get_bool(doc, "e3_concepts");
  r.e3_concepts_count = static_cast<int>(get_int(doc, "e3_concepts_count"));
  r.e4_context = get_bool(doc, "e4_context");
  r.e5_solution = get_optional_bool(doc, "e5_solution");
  r.e6_tests = get_optional_bool(doc, "e6_tests");
  r.issue_notes = get_string(doc, "issue_notes");
  validate(r);
  return r;
}

json to_document(const StudentTaskRating& r) {
  return versioned({{"task_id", r.task_id},
                    {"a1_context", r.a1_context},
                    {"a2_sensible", r.a2_sensible},
                    {"a3_solvable", r.a3_solvable}});
}

template <>
StudentTaskRating from_document<StudentTaskRating>(const json& doc) {
  check_version(doc);
  StudentTaskRating r;
  r.task_id = get_string(doc, "task_id");
  r.a1_context = static_cast<int>(get_int(doc, "a1_context"));
  r.a2_sensible = static_cast<int>(get_int(doc, "a2_sensible"));
  r.a3_solvable = get_bool(doc, "a3_solvable");
  validate(r);
  return r;
}

json to_document(const SurveyResponse& s) {
  return versioned({{"respondent_id", s.respondent_id},
                    {"b1", s.b1},
                    {"b2", s.b2},
                    {"b3", s.b3},
                    {"b4", s.b4}});
}

template <>
SurveyResponse from_document<SurveyResponse>(const json& doc) {
  check_version(doc);
  SurveyResponse s;
  s.respondent_id = get_string(doc, "respondent_id");
  s.b1 = static_cast<int>(get_int(doc, "b1"));
  s.b2 = static_cast<int>(get_int(doc, "b2"));
  s.b3 = static_cast<int>(get_int(doc, "b3"));
  s.b4 = static_cast<int>(get_int(doc, "b4"));
  validate(s);
  return s;
}

json to_document(const Submission& s) {
  return versioned({{"id", s.id},
                    {"task_id", s.task_id},
                    {"submitted_code", s.submitted_code},
                    {"outcome", to_json(s.outcome)},
                    {"solved", s.solved},
                    {"submitted_at", text::format_timestamp(s.submitted_at)}});
}

template <>
Submission from_document<Submission>(const json& doc) {
  check_version(doc);
  Submission s;
  s.id = get_string(doc, "id");
  s.task_id = get_string(doc, "task_id");
  s.submitted_code = get_string(doc, "submitted_code");
  s.outcome = outcome_from_json(field(doc, "outcome"));
  s.solved = get_bool(doc, "solved");
  s.submitted_at = get_timestamp(doc, "submitted_at");
  validate(s);
  return s;
}

std::string canonical(const json& doc) {
  return doc.dump(-1, ' ', false, json::error_handler_t::replace);
}

template <class T>
T deserialize(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("document", std::string("malformed JSON: ") + e.what());
  }
  return from_document<T>(doc);
}

template Task deserialize<Task>(std::string_view);
template GenerationTrace deserialize<GenerationTrace>(std::string_view);
template ExpertRating deserialize<ExpertRating>(std::string_view);
template StudentTaskRating deserialize<StudentTaskRating>(std::string_view);
template SurveyResponse deserialize<SurveyResponse>(std::string_view);
template Submission deserialize<Submission>(std::string_view);

Task deserialize_task(std::string_view text) { return deserialize<Task>(text); }

}  // namespace taskgen
