#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "taskgen/domain.hpp"
#include "taskgen/pipeline.hpp"
#include "taskgen/store.hpp"

namespace taskgen::batch {

/// Bad flags or catalogs (CLI exit code 2).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One entry per line; blank lines and `#` comments skipped; duplicates rejected.
std::vector<std::string> parse_catalog(const std::string& content, const std::string& name = "catalog");
std::vector<std::string> load_catalog(const std::string& path);

/// `a:b:c` task counts for one, two and three concepts.
std::array<int, 3> parse_buckets(const std::string& spec);

/// Uniform integer in [0, n) by rejection sampling on raw engine output, so
/// draws are identical across standard libraries.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

struct BatchOptions {
  int count = 0;
  std::array<int, 3> buckets{};
  std::vector<std::string> contexts;
  std::vector<std::string> concepts;
  std::uint64_t seed = 0;
  std::string teaching_language = "python";
  int workers = 4;
  /// Infrastructure failures tolerated before the run is abandoned.
  int failure_budget = 5;
};

void validate(const BatchOptions& opts);

/// Task ids are `task-<seed>-<index>` with a four-digit index.
std::string task_id(std::uint64_t seed, std::size_t index);

/// Draws every request up front, in index order: buckets in order, one
/// uniform context, then k distinct uniform concepts.
std::vector<GenerationRequest> draw_requests(const BatchOptions& opts);

struct BatchResult {
  nlohmann::json manifest;
  int functional = 0;
  int non_functional = 0;
  int generation_failed = 0;
  /// True when failures exceeded the budget and remaining tasks were skipped.
  bool aborted = false;
};

/// Generates the corpus into `store`, writes `<store root>/manifest.json`.
BatchResult run_batch(const BatchOptions& opts, pipeline::Pipeline& pipeline, store::Store& store);

/// Manifest for the tasks and traces currently in `store`.
nlohmann::json corpus_manifest(const store::Store& store, const BatchOptions* opts = nullptr);

/// Uniform sample without replacement, seeded; order is the shuffle order.
std::vector<std::string> sample_ids(std::vector<std::string> ids, std::size_t n, std::uint64_t seed);

}  // namespace taskgen::batch
