#include <gtest/gtest.h>

#include <set>

#include "api_harness.hpp"
#include "support.hpp"
#include "taskgen/batch.hpp"

using namespace taskgen;
using namespace taskgen::batch;
using nlohmann::json;
using testing_support::ScratchDir;

namespace {

std::vector<std::string> shipped(const char* name) {
  return load_catalog(std::string(TASKGEN_DATA_DIR) + "/catalogs/" + name);
}

BatchOptions options(int count, std::array<int, 3> buckets, std::uint64_t seed = 7) {
  BatchOptions o;
  o.count = count;
  o.buckets = buckets;
  o.contexts = shipped("contexts.txt");
  o.concepts = shipped("concepts.txt");
  o.seed = seed;
  return o;
}

std::shared_ptr<pipeline::Pipeline> passing_pipeline() {
  auto entries = testing_support::stage_entries();
  entries.push_back({"Task component: solution", testing_support::fenced(testing_support::kSolution), true});
  auto runner = std::make_shared<testing_support::FakeRunner>(
      [](const std::string&, const std::string&) { return testing_support::passing_outcome(); });
  return testing_support::make_pipeline(testing_support::scripted_gateway(entries), runner);
}

}  // namespace

TEST(Catalog, CommentsBlanksAndDuplicates) {
  EXPECT_EQ(parse_catalog("# header\n\nloops\n  lists  \n"), (std::vector<std::string>{"loops", "lists"}));
  EXPECT_THROW(parse_catalog("loops\nLoops\n"), UsageError);
  EXPECT_THROW(parse_catalog("# only a comment\n"), UsageError);
  EXPECT_THROW(load_catalog("/nonexistent/catalog.txt"), UsageError);
}

TEST(Catalog, ShippedSizes) {
  EXPECT_EQ(shipped("concepts.txt").size(), 14u);
  EXPECT_EQ(shipped("contexts.txt").size(), 20u);
}

TEST(Buckets, Parse) {
  EXPECT_EQ(parse_buckets("100:50:50"), (std::array<int, 3>{100, 50, 50}));
  EXPECT_EQ(parse_buckets("0:0:3"), (std::array<int, 3>{0, 0, 3}));
  for (const char* bad : {"1:2", "1:2:3:4", "a:1:1", ":1:1", "-1:1:1", ""}) {
    EXPECT_THROW(parse_buckets(bad), UsageError) << bad;
  }
}

TEST(Validate, CountMustMatchBuckets) {
  auto o = options(2, {1, 0, 0});
  EXPECT_THROW(validate(o), UsageError);
  o.count = 1;
  EXPECT_NO_THROW(validate(o));
  o.concepts = {"only"};
  o.buckets = {0, 1, 0};
  EXPECT_THROW(validate(o), UsageError);
  o = options(1, {1, 0, 0});
  o.workers = 0;
  EXPECT_THROW(validate(o), UsageError);
}

TEST(Rng, UniformBelowStaysInRange) {
  std::mt19937_64 rng(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[uniform_below(rng, 7)];
  for (int h : hits) {
    EXPECT_GT(h, 800);
    EXPECT_LT(h, 1200);
  }
  EXPECT_THROW(uniform_below(rng, 0), std::invalid_argument);
}

TEST(Ids, Format) {
  EXPECT_EQ(task_id(7, 1), "task-7-0001");
  EXPECT_EQ(task_id(42, 199), "task-42-0199");
}

TEST(Draw, BucketsAndCatalogMembership) {
  auto o = options(200, {100, 50, 50});
  auto reqs = draw_requests(o);
  ASSERT_EQ(reqs.size(), 200u);
  const std::set<std::string> concepts(o.concepts.begin(), o.concepts.end());
  const std::set<std::string> contexts(o.contexts.begin(), o.contexts.end());
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    const std::size_t k = i < 100 ? 1 : i < 150 ? 2 : 3;
    ASSERT_EQ(reqs[i].concepts.size(), k) << i;
    std::set<std::string> distinct(reqs[i].concepts.begin(), reqs[i].concepts.end());
    EXPECT_EQ(distinct.size(), k);
    for (const auto& c : reqs[i].concepts) EXPECT_TRUE(concepts.count(c)) << c;
    EXPECT_TRUE(contexts.count(reqs[i].context)) << reqs[i].context;
    EXPECT_EQ(reqs[i].seed_metadata->at("index"), std::to_string(i));
  }
  EXPECT_EQ(draw_requests(o), reqs);
  EXPECT_NE(draw_requests(options(200, {100, 50, 50}, 8)), reqs);
}

TEST(Draw, EveryContextEventuallyDrawn) {
  auto reqs = draw_requests(options(400, {400, 0, 0}, 1));
  std::set<std::string> seen;
  for (const auto& r : reqs) seen.insert(r.context);
  EXPECT_EQ(seen.size(), 20u);
}

TEST(RunBatch, ManifestAndRerunHash) {
  ScratchDir a, b;
  auto o = options(12, {6, 3, 3});
  store::Store sa(a.path()), sb(b.path());
  auto ra = run_batch(o, *passing_pipeline(), sa);
  auto rb = run_batch(o, *passing_pipeline(), sb);
  EXPECT_EQ(ra.functional, 12);
  EXPECT_FALSE(ra.aborted);
  EXPECT_EQ(ra.manifest["task_count"], 12);
  EXPECT_EQ(ra.manifest["buckets"], (json{{"1", 6}, {"2", 3}, {"3", 3}}));
  EXPECT_EQ(ra.manifest["status"]["functional"], 12);
  EXPECT_EQ(ra.manifest["corpus_hash"], rb.manifest["corpus_hash"]);
  EXPECT_EQ(ra.manifest["task_ids"][0], "task-7-0000");
  EXPECT_EQ(json::parse(text::read_file(a / "manifest.json")), ra.manifest);
  EXPECT_EQ(sa.ids(store::Kind::traces).size(), 12u);
}

TEST(RunBatch, FailureBudgetAbandonsRun) {
  ScratchDir dir;
  auto o = options(10, {10, 0, 0});
  o.contexts = {"outage"};
  o.workers = 1;
  o.failure_budget = 2;
  store::Store st(dir.path());
  auto pipe = testing_support::make_pipeline(
      testing_support::gateway_for(std::make_shared<testing_support::RoutingProvider>()));
  auto r = run_batch(o, *pipe, st);
  EXPECT_TRUE(r.aborted);
  EXPECT_EQ(r.generation_failed, 3);
  EXPECT_EQ(r.manifest["status"]["generation_failed"], 3);
  for (const auto& t : st.list<Task>()) EXPECT_EQ(t.status, TaskStatus::generation_failed);
}

TEST(Sample, DistinctSeededSubset) {
  std::vector<std::string> ids;
  for (int i = 0; i < 200; ++i) ids.push_back(task_id(7, i));
  auto s = sample_ids(ids, 30, 1);
  ASSERT_EQ(s.size(), 30u);
  EXPECT_EQ(std::set<std::string>(s.begin(), s.end()).size(), 30u);
  EXPECT_EQ(sample_ids(ids, 30, 1), s);
  auto shuffled = ids;
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(sample_ids(shuffled, 30, 1), s);  // input order does not matter
  EXPECT_NE(sample_ids(ids, 30, 2), s);
  auto all = sample_ids(ids, 200, 5);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, ids);
  EXPECT_THROW(sample_ids(ids, 201, 1), UsageError);
}
