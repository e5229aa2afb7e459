#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "taskgen/domain.hpp"

namespace taskgen {

using json = nlohmann::json;

// Nested values (no schema_version of their own).
json to_json(const GenerationRequest& r);
json to_json(const ExecutionOutcome& o);
GenerationRequest request_from_json(const json& j);
ExecutionOutcome outcome_from_json(const json& j);

// Top-level documents carry "schema_version": 1 and are validated on decode.
json to_document(const Task& t);
json to_document(const GenerationTrace& t);
json to_document(const ExpertRating& r);
json to_document(const StudentTaskRating& r);
json to_document(const SurveyResponse& s);
json to_document(const Submission& s);

template <class T>
T from_document(const json& doc);
template <> Task from_document<Task>(const json& doc);
template <> GenerationTrace from_document<GenerationTrace>(const json& doc);
template <> ExpertRating from_document<ExpertRating>(const json& doc);
template <> StudentTaskRating from_document<StudentTaskRating>(const json& doc);
template <> SurveyResponse from_document<SurveyResponse>(const json& doc);
template <> Submission from_document<Submission>(const json& doc);

/// Canonical text: compact, keys sorted. Identical values produce identical bytes.
std::string canonical(const json& doc);

template <class T>
std::string serialize(const T& value) {
  return canonical(to_document(value));
}

/// Parses and validates; throws SchemaError naming the failed field.
template <class T>
T deserialize(std::string_view text);

inline std::string serialize_task(const Task& t) { return serialize(t); }
Task deserialize_task(std::string_view text);

}  // namespace taskgen
