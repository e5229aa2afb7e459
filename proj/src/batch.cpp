#include "taskgen/batch.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>

#include "taskgen/text.hpp"

namespace taskgen::batch {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<std::string> parse_catalog(const std::string& content, const std::string& name) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& raw : text::split_lines(content)) {
    auto line = text::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (!seen.insert(text::to_lower_ascii(line)).second) {
      throw UsageError(name + ": duplicate entry '" + line + "'");
    }
    out.push_back(line);
  }
  if (out.empty()) throw UsageError(name + " is empty");
  return out;
}

std::vector<std::string> load_catalog(const std::string& path) {
  std::string content;
  try {
    content = text::read_file(path);
  } catch (const std::exception& e) {
    throw UsageError("cannot read catalog " + path + ": " + e.what());
  }
  return parse_catalog(content, path);
}

std::array<int, 3> parse_buckets(const std::string& spec) {
  std::array<int, 3> b{};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    auto end = spec.find(':', pos);
    if ((i < 2) != (end != std::string::npos)) throw UsageError("--buckets must look like a:b:c");
    auto part = spec.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    if (part.empty() || part.size() > 7 ||
        !std::all_of(part.begin(), part.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw UsageError("--buckets entries must be non-negative integers");
    }
    b[static_cast<std::size_t>(i)] = std::stoi(part);
    pos = end + 1;
  }
  return b;
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_below(0)");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

void validate(const BatchOptions& o) {
  if (o.count <= 0) throw UsageError("--count must be positive");
  if (o.buckets[0] + o.buckets[1] + o.buckets[2] != o.count) {
    throw UsageError("--buckets must add up to --count (" + std::to_string(o.buckets[0]) + "+" +
                     std::to_string(o.buckets[1]) + "+" + std::to_string(o.buckets[2]) +
                     " != " + std::to_string(o.count) + ")");
  }
  if (o.contexts.empty()) throw UsageError("context catalog is empty");
  for (std::size_t k = 1; k <= 3; ++k) {
    if (o.buckets[k - 1] > 0 && o.concepts.size() < k) {
      throw UsageError("concept catalog has fewer than " + std::to_string(k) + " entries");
    }
  }
  if (o.workers < 1) throw UsageError("--workers must be >= 1");
}

std::string task_id(std::uint64_t seed, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "task-%llu-%04zu", static_cast<unsigned long long>(seed), index);
  return buf;
}

std::vector<GenerationRequest> draw_requests(const BatchOptions& opts) {
  validate(opts);
  std::mt19937_64 rng(opts.seed);
  std::vector<GenerationRequest> out;
  for (std::size_t k = 1; k <= 3; ++k) {
    for (int i = 0; i < opts.buckets[k - 1]; ++i) {
      GenerationRequest r;
      r.teaching_language = opts.teaching_language;
      r.context = opts.contexts[uniform_below(rng, opts.contexts.size())];
      std::vector<std::size_t> idx(opts.concepts.size());
      for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = j;
      for (std::size_t j = 0; j < k; ++j) {
        auto pick = j + uniform_below(rng, idx.size() - j);
        std::swap(idx[j], idx[pick]);
        r.concepts.push_back(opts.concepts[idx[j]]);
      }
      r.seed_metadata = std::map<std::string, std::string>{
          {"seed", std::to_string(opts.seed)}, {"index", std::to_string(out.size())}};
      out.push_back(normalize_request(std::move(r)));
    }
  }
  return out;
}

json corpus_manifest(const store::Store& store, const BatchOptions* opts) {
  const auto tasks = store.list<Task>();
  const auto traces = store.list<GenerationTrace>();
  std::map<std::string, long> status{{"functional", 0}, {"non_functional", 0}, {"generation_failed", 0}};
  std::vector<std::string> ids;
  for (const auto& t : tasks) {
    ++status[to_string(t.status)];
    ids.push_back(t.id);
  }
  json buckets = json::object();
  for (const auto& [k, v] : store::bucket_counts(tasks)) buckets[k] = v;
  json m{{"schema_version", kSchemaVersion},
         {"task_count", tasks.size()},
         {"buckets", buckets},
         {"status", status},
         {"task_ids", ids},
         {"corpus_hash", store::corpus_hash(tasks, traces)}};
  if (opts) {
    m["seed"] = opts->seed;
    m["requested_buckets"] = {{"1", opts->buckets[0]}, {"2", opts->buckets[1]}, {"3", opts->buckets[2]}};
    m["contexts_catalog_size"] = opts->contexts.size();
    m["concepts_catalog_size"] = opts->concepts.size();
  }
  return m;
}

BatchResult run_batch(const BatchOptions& opts, pipeline::Pipeline& pipeline, store::Store& store) {
  const auto requests = draw_requests(opts);
  BatchResult result;
  std::atomic<std::size_t> next{0};
  std::atomic<int> functional{0}, non_functional{0}, failed{0};
  std::atomic<bool> abort{false};
  std::mutex error_mutex;
  std::exception_ptr fatal;

  auto worker = [&] {
    while (!abort) {
      const auto i = next++;
      if (i >= requests.size()) return;
      try {
        try {
          auto r = pipeline.generate_task(requests[i], task_id(opts.seed, i));
          store.put(r.task, true);
          store.put(r.trace, true);
          (r.task.status == TaskStatus::functional ? functional : non_functional)++;
        } catch (const pipeline::GenerationFailed& e) {
          store.put(e.task(), true);
          store.put(e.trace(), true);
          if (++failed > opts.failure_budget) abort = true;
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!fatal) fatal = std::current_exception();
        abort = true;
      }
    }
  };
  const auto n = static_cast<std::size_t>(std::min<int>(opts.workers, static_cast<int>(requests.size())));
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (fatal) std::rethrow_exception(fatal);

  result.functional = functional;
  result.non_functional = non_functional;
  result.generation_failed = failed;
  result.aborted = abort;
  result.manifest = corpus_manifest(store, &opts);
  text::write_file_atomic((fs::path(store.root()) / "manifest.json").string(),
                          result.manifest.dump(2) + "\n");
  return result;
}

std::vector<std::string> sample_ids(std::vector<std::string> ids, std::size_t n, std::uint64_t seed) {
  if (n > ids.size()) {
    throw UsageError("sample size " + std::to_string(n) + " exceeds corpus size " +
                     std::to_string(ids.size()));
  }
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    auto j = i + uniform_below(rng, ids.size() - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(n);
  return ids;
}

}  // namespace taskgen::batch
