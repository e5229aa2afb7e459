#include "taskgen/store.hpp"

#include <algorithm>
#include <filesystem>
#include <mutex>

#include "taskgen/text.hpp"

namespace taskgen::store {

namespace fs = std::filesystem;

std::string to_string(Kind k) {
  switch (k) {
    case Kind::tasks: return "tasks";
    case Kind::traces: return "traces";
    case Kind::expert_ratings: return "expert_ratings";
    case Kind::student_ratings: return "student_ratings";
    case Kind::surveys: return "surveys";
    case Kind::submissions: return "submissions";
  }
  return "unknown";
}

std::string document_id(const Task& t) { return t.id; }
std::string document_id(const GenerationTrace& t) { return t.task_id; }
std::string document_id(const ExpertRating& r) { return r.task_id + "__" + r.rater_id; }
std::string document_id(const SurveyResponse& s) { return s.respondent_id; }
std::string document_id(const Submission& s) { return s.id; }

bool TaskFilter::matches(const Task& t) const {
  if (status && t.status != *status) return false;
  if (concept_count && t.concept_count() != *concept_count) return false;
  if (created_from && t.created_at < *created_from) return false;
  if (created_to && t.created_at > *created_to) return false;
  return true;
}

std::map<std::string, long> bucket_counts(const std::vector<Task>& tasks) {
  std::map<std::string, long> b{{"1", 0}, {"2", 0}, {"3", 0}};
  for (const auto& t : tasks) {
    const auto n = t.concept_count();
    ++b[n >= 1 && n <= 3 ? std::to_string(n) : "other"];
  }
  return b;
}

std::string corpus_hash(const std::vector<Task>& tasks, const std::vector<GenerationTrace>& traces) {
  std::map<std::string, std::string> parts;
  for (const auto& t : tasks) {
    auto doc = to_document(t);
    doc.erase("created_at");
    parts["task/" + t.id] = canonical(doc);
  }
  for (const auto& tr : traces) {
    auto doc = to_document(tr);
    for (auto& it : doc["iterations"]) it["outcome"].erase("wall_time_ms");
    parts["trace/" + tr.task_id] = canonical(doc);
  }
  std::string all;
  for (const auto& [key, value] : parts) {
    all += key;
    all += '\n';
    all += value;
    all += '\n';
  }
  return text::sha256_hex(all);
}

json BundleManifest::to_json() const {
  json b = json::object();
  for (const auto& [k, v] : buckets) b[k] = v;
  return json{{"schema_version", kSchemaVersion},
              {"task_count", task_count},
              {"buckets", b},
              {"task_ids", task_ids},
              {"corpus_hash", corpus_hash}};
}

Store::Store(std::string root) : root_(std::move(root)) {
  std::error_code ec;
  for (auto k : {Kind::tasks, Kind::traces, Kind::expert_ratings, Kind::student_ratings,
                 Kind::surveys, Kind::submissions}) {
    fs::create_directories(fs::path(root_) / to_string(k), ec);
    if (ec) throw IoFailure("cannot create store directory " + root_ + ": " + ec.message());
  }
}

std::string Store::path_for(Kind kind, const std::string& id) const {
  if (!is_valid_id(id)) throw std::invalid_argument("invalid document id: " + id);
  return (fs::path(root_) / to_string(kind) / (id + ".json")).string();
}

bool Store::exists(Kind kind, const std::string& id) const {
  if (!is_valid_id(id)) return false;
  std::shared_lock lock(mutex_);
  return fs::exists(path_for(kind, id));
}

std::vector<std::string> Store::ids(Kind kind) const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(fs::path(root_) / to_string(kind), ec)) {
    const auto name = entry.path().filename().string();
    if (entry.path().extension() != ".json") continue;  // skips in-flight temp files
    auto id = name.substr(0, name.size() - 5);
    if (is_valid_id(id)) out.push_back(id);
  }
  if (ec) throw IoFailure("cannot list " + to_string(kind) + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

std::string Store::get_raw(Kind kind, const std::string& id) const {
  if (!is_valid_id(id)) throw NotFound(to_string(kind) + "/" + id);
  std::shared_lock lock(mutex_);
  const auto path = path_for(kind, id);
  if (!fs::exists(path)) throw NotFound(to_string(kind) + "/" + id);
  try {
    return text::read_file(path);
  } catch (const std::exception& e) {
    throw IoFailure(e.what());
  }
}

void Store::put_raw(Kind kind, const std::string& id, const std::string& doc, bool overwrite) {
  const auto path = path_for(kind, id);
  std::unique_lock lock(mutex_);
  if (!overwrite && fs::exists(path)) {
    if (text::read_file(path) == doc) return;
    throw ConflictingWrite(to_string(kind) + "/" + id + " already exists with different content");
  }
  try {
    text::write_file_atomic(path, doc);
  } catch (const std::exception& e) {
    throw IoFailure(e.what());
  }
}

std::vector<Task> Store::list_tasks(const TaskFilter& filter) const {
  std::vector<Task> out;
  for (auto& t : list<Task>()) {
    if (filter.matches(t)) out.push_back(std::move(t));
  }
  return out;
}

BundleManifest Store::export_corpus(const TaskFilter& filter, const std::string& out_dir) const {
  const auto tasks = list_tasks(filter);
  const auto ratings = list<ExpertRating>();
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "tasks", ec);
  if (ec) throw IoFailure("cannot create bundle directory " + out_dir + ": " + ec.message());

  BundleManifest m;
  std::vector<GenerationTrace> traces;
  for (const auto& t : tasks) {
    json doc{{"schema_version", kSchemaVersion}, {"task", to_document(t)}, {"trace", nullptr}};
    if (auto tr = find<GenerationTrace>(t.id)) {
      doc["trace"] = to_document(*tr);
      traces.push_back(*tr);
    }
    json rs = json::array();
    for (const auto& r : ratings) {
      if (r.task_id == t.id) rs.push_back(to_document(r));
    }
    doc["expert_ratings"] = rs;
    try {
      text::write_file_atomic((fs::path(out_dir) / "tasks" / (t.id + ".json")).string(), canonical(doc));
    } catch (const std::exception& e) {
      throw IoFailure(e.what());
    }
    m.task_ids.push_back(t.id);
  }
  m.task_count = static_cast<long>(tasks.size());
  m.buckets = bucket_counts(tasks);
  m.corpus_hash = corpus_hash(tasks, traces);
  try {
    text::write_file_atomic((fs::path(out_dir) / "manifest.json").string(), m.to_json().dump(2) + "\n");
  } catch (const std::exception& e) {
    throw IoFailure(e.what());
  }
  return m;
}

std::size_t Store::import_corpus(const std::string& bundle_dir, bool overwrite) {
  json manifest;
  try {
    manifest = json::parse(text::read_file((fs::path(bundle_dir) / "manifest.json").string()));
  } catch (const json::exception& e) {
    throw SchemaError("manifest", e.what());
  } catch (const std::exception& e) {
    throw IoFailure(e.what());
  }
  if (manifest.value("schema_version", 0) != kSchemaVersion) {
    throw SchemaError("schema_version", "unsupported bundle version");
  }
  std::size_t n = 0;
  for (const auto& id : manifest.at("task_ids")) {
    const auto path = fs::path(bundle_dir) / "tasks" / (id.get<std::string>() + ".json");
    json doc;
    try {
      doc = json::parse(text::read_file(path.string()));
    } catch (const json::exception& e) {
      throw SchemaError(path.string(), e.what());
    } catch (const std::exception& e) {
      throw IoFailure(e.what());
    }
    auto task = from_document<Task>(doc.at("task"));
    put(task, overwrite);
    if (!doc.at("trace").is_null()) put(from_document<GenerationTrace>(doc.at("trace")), overwrite);
    for (const auto& r : doc.at("expert_ratings")) put(from_document<ExpertRating>(r), overwrite);
    ++n;
  }
  return n;
}

}  // namespace taskgen::store
