#pragma once

#include <map>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "taskgen/codec.hpp"
#include "taskgen/domain.hpp"

namespace taskgen::store {

enum class Kind { tasks, traces, expert_ratings, student_ratings, surveys, submissions };
std::string to_string(Kind k);

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ConflictingWrite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class IoFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class T> struct KindOf;
template <> struct KindOf<Task> { static constexpr Kind value = Kind::tasks; };
template <> struct KindOf<GenerationTrace> { static constexpr Kind value = Kind::traces; };
template <> struct KindOf<ExpertRating> { static constexpr Kind value = Kind::expert_ratings; };
template <> struct KindOf<StudentTaskRating> { static constexpr Kind value = Kind::student_ratings; };
template <> struct KindOf<SurveyResponse> { static constexpr Kind value = Kind::surveys; };
template <> struct KindOf<Submission> { static constexpr Kind value = Kind::submissions; };

// Natural document ids. Student ratings have none: callers supply one.
std::string document_id(const Task& t);
std::string document_id(const GenerationTrace& t);
std::string document_id(const ExpertRating& r);
std::string document_id(const SurveyResponse& s);
std::string document_id(const Submission& s);

struct TaskFilter {
  std::optional<TaskStatus> status;
  /// Exact number of requested concepts.
  std::optional<std::size_t> concept_count;
  /// Inclusive bounds on created_at.
  std::optional<Timestamp> created_from;
  std::optional<Timestamp> created_to;

  bool matches(const Task& t) const;
};

/// Task counts per concept-count bucket. Keys "1", "2" and "3" are always
/// present; "other" only when nonzero.
std::map<std::string, long> bucket_counts(const std::vector<Task>& tasks);

/// SHA-256 over the canonical task and trace documents in id order, with the
/// volatile fields (created_at, wall_time_ms) removed.
std::string corpus_hash(const std::vector<Task>& tasks, const std::vector<GenerationTrace>& traces);

struct BundleManifest {
  long task_count = 0;
  std::map<std::string, long> buckets;
  std::vector<std::string> task_ids;
  std::string corpus_hash;

  json to_json() const;
};

/// Document store laid out as `<root>/<kind>/<id>.json`. Every write is a
/// temp-file-then-rename; writes are serialized, reads may run concurrently.
class Store {
 public:
  explicit Store(std::string root);

  const std::string& root() const { return root_; }

  template <class T>
  void put(const T& doc, bool overwrite = false) {
    put_raw(KindOf<T>::value, document_id(doc), serialize(doc), overwrite);
  }
  template <class T>
  void put(const T& doc, const std::string& id, bool overwrite) {
    put_raw(KindOf<T>::value, id, serialize(doc), overwrite);
  }
  template <class T>
  T get(const std::string& id) const {
    return deserialize<T>(get_raw(KindOf<T>::value, id));
  }
  template <class T>
  std::optional<T> find(const std::string& id) const {
    if (!exists(KindOf<T>::value, id)) return std::nullopt;
    return get<T>(id);
  }
  /// All documents of a kind, in id order.
  template <class T>
  std::vector<T> list() const {
    std::vector<T> out;
    for (const auto& id : ids(KindOf<T>::value)) out.push_back(get<T>(id));
    return out;
  }

  std::vector<Task> list_tasks(const TaskFilter& filter) const;

  bool exists(Kind kind, const std::string& id) const;
  std::vector<std::string> ids(Kind kind) const;
  std::string get_raw(Kind kind, const std::string& id) const;
  /// Same id with identical bytes is a no-op; different bytes need `overwrite`.
  void put_raw(Kind kind, const std::string& id, const std::string& canonical_doc, bool overwrite);

  /// Writes `manifest.json` plus `tasks/<id>.json` ({task, trace, expert_ratings})
  /// for every task that passes the filter.
  BundleManifest export_corpus(const TaskFilter& filter, const std::string& out_dir) const;
  /// Loads an export bundle. Returns the number of tasks imported.
  std::size_t import_corpus(const std::string& bundle_dir, bool overwrite = false);

 private:
  std::string path_for(Kind kind, const std::string& id) const;

  std::string root_;
  mutable std::shared_mutex mutex_;
};

}  // namespace taskgen::store
