#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "support.hpp"
#include "rubric_fixture.hpp"
#include "taskgen/assessment.hpp"

using namespace taskgen;
using namespace taskgen::assessment;

namespace {

std::vector<Pair> decode(const std::string& s) {
  std::vector<Pair> out;
  for (std::size_t i = 0; i + 1 < s.size(); i += 2) out.emplace_back(s[i] == 'T', s[i + 1] == 'T');
  return out;
}

Submission sub(const std::string& task, bool solved) {
  Submission s;
  s.id = "s";
  s.task_id = task;
  s.solved = solved;
  return s;
}

const char* kCsvHeader = "task_id,rater_id,e2,e3,e3_count,e4,e5,e6,notes\n";

}  // namespace

TEST(Percent, MatchesDecimalOracle) {
  for (const auto& c : testing_support::load_json("oracles/percent_expected.json")) {
    EXPECT_EQ(format_percent(c["num"], c["den"]), c["text"].get<std::string>()) << c.dump();
  }
}

TEST(Percent, Conventions) {
  EXPECT_EQ(format_percent(200, 200), "100%");
  EXPECT_EQ(format_percent(0, 0), "n/a");
  EXPECT_EQ(format_percent(0, 5), "0.0%");
  EXPECT_EQ(format_percent(1, 8), "12.5%");
  EXPECT_EQ(format_fixed2(4.475), "4.48");
  EXPECT_EQ(format_fixed2(0.0), "0.00");
}

TEST(Ac1, MatchesBruteForceOracle) {
  auto cases = testing_support::load_json("oracles/ac1_expected.json");
  ASSERT_GE(cases.size(), 1000u);
  for (const auto& c : cases) {
    auto s = gwet_ac1(decode(c["pairs"]));
    EXPECT_NEAR(s.pa, c["pa"].get<double>(), 1e-12);
    EXPECT_NEAR(s.pi_hat, c["pi_hat"].get<double>(), 1e-12);
    EXPECT_NEAR(s.pe, c["pe"].get<double>(), 1e-12);
    EXPECT_NEAR(s.ac1, c["ac1"].get<double>(), 1e-12) << c["pairs"];
  }
}

TEST(Ac1, WorkedExample) {
  auto s = gwet_ac1({{true, true}, {true, false}, {false, false}, {true, true}});
  EXPECT_EQ(s.pa, 0.75);
  EXPECT_EQ(s.yes_a, 3u);
  EXPECT_EQ(s.yes_b, 2u);
  EXPECT_EQ(s.pi_hat, 0.625);
  EXPECT_EQ(s.pe, 0.46875);
  EXPECT_NEAR(s.ac1, 0.5294, 5e-5);
}

TEST(Ac1, PerfectAgreementIsOne) {
  EXPECT_EQ(gwet_ac1({{true, true}, {false, false}}).ac1, 1.0);
  auto s = gwet_ac1(std::vector<Pair>(5, {true, true}));
  EXPECT_EQ(s.pe, 0.0);
  EXPECT_EQ(s.ac1, 1.0);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 500; ++i) {
    std::vector<Pair> pairs;
    const auto n = 1 + rng() % 40;
    for (std::size_t k = 0; k < n; ++k) {
      bool v = rng() % 2;
      pairs.emplace_back(v, v);
    }
    EXPECT_DOUBLE_EQ(gwet_ac1(pairs).ac1, 1.0);
    EXPECT_LE(gwet_ac1(pairs).pe, 0.5);
  }
}

TEST(Ac1, EmptyInputRejected) {
  EXPECT_THROW(gwet_ac1({}), EmptyInput);
  EXPECT_THROW(percent_agreement({}), EmptyInput);
}

TEST(Agreement, Fraction) {
  EXPECT_EQ(percent_agreement({{true, true}, {false, false}}), 1.0);
  EXPECT_EQ(percent_agreement({{true, false}, {true, true}}), 0.5);
  // 92% of 30 pairs is 27.6 matches, so the nearest attainable values are 27/30 and 28/30.
  std::vector<Pair> thirty(30, {true, true});
  for (int i = 0; i < 3; ++i) thirty[i] = {true, false};
  EXPECT_DOUBLE_EQ(percent_agreement(thirty), 27.0 / 30.0);
  thirty[2] = {true, true};
  EXPECT_DOUBLE_EQ(percent_agreement(thirty), 28.0 / 30.0);
}

TEST(Likert, MatchesOracle) {
  for (const auto& c : testing_support::load_json("oracles/likert_expected.json")) {
    auto s = likert_summary(c["values"].get<std::vector<int>>());
    EXPECT_NEAR(s.mean, c["mean"].get<double>(), 1e-12);
    if (c["sd"].is_null()) {
      EXPECT_FALSE(s.sd);
    } else {
      ASSERT_TRUE(s.sd);
      EXPECT_NEAR(*s.sd, c["sd"].get<double>(), 1e-12);
    }
  }
}

TEST(Likert, StatedExamples) {
  auto a = likert_summary({4, 4, 4});
  EXPECT_EQ(a.mean_text(), "4.00");
  EXPECT_EQ(a.sd_text(), "0.00");
  auto b = likert_summary({5, 4, 5, 3});
  EXPECT_EQ(b.mean_text(), "4.25");
  EXPECT_EQ(b.sd_text(), "0.96");
  auto c = likert_summary({1});
  EXPECT_EQ(c.mean_text(), "1.00");
  EXPECT_EQ(c.sd_text(), "n/a");
}

TEST(Likert, PermutationInvariantAndHistogramSums) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    std::vector<int> v(1 + rng() % 30);
    for (auto& x : v) x = 1 + static_cast<int>(rng() % 5);
    auto s = likert_summary(v);
    std::shuffle(v.begin(), v.end(), rng);
    auto t = likert_summary(v);
    EXPECT_EQ(s.mean, t.mean);
    EXPECT_EQ(s.histogram, t.histogram);
    int total = 0;
    for (int h : s.histogram) total += h;
    EXPECT_EQ(total, static_cast<int>(v.size()));
  }
}

TEST(Likert, Errors) {
  EXPECT_THROW(likert_summary({}), EmptyInput);
  try {
    likert_summary({3, 6});
    FAIL();
  } catch (const OutOfRange& e) {
    EXPECT_EQ(e.value(), 6);
  }
}

TEST(Completion, AnySuccessRule) {
  std::vector<Submission> subs;
  for (int i = 0; i < 98; ++i) subs.push_back(sub("t" + std::to_string(i), i < 78));
  auto c = completion_rate(subs);
  EXPECT_EQ(c.attempted_tasks, 98);
  EXPECT_EQ(c.solved_tasks, 78);
  EXPECT_EQ(c.rate_text(), format_percent(78, 98));

  auto one = completion_rate({sub("x", false), sub("x", true)});
  EXPECT_EQ(one.attempted_tasks, 1);
  EXPECT_EQ(one.solved_tasks, 1);
  EXPECT_EQ(completion_rate({}).rate_text(), "n/a");
}

TEST(Categorize, StatedExamples) {
  CategoryMap sports{{"soccer", "Sports"}, {"basketball", "Sports"}};
  EXPECT_EQ(categorize_free_text({"", "soccer", "basketball"}, sports),
            (Histogram{{"Sports", 2}, {"Empty", 1}}));
  EXPECT_EQ(categorize_free_text({"lambda notation"}, sports), (Histogram{{"Other", 1}}));
  EXPECT_EQ(categorize_free_text({"For loop", "for-loops"}, {{"for", "For Loops"}}),
            (Histogram{{"For Loops", 2}}));
}

TEST(Categorize, WordStartMatchingAndFirstRuleWins) {
  CategoryMap m{{"str", "String"}, {"list", "Lists"}};
  EXPECT_EQ(categorize_free_text({"destroy"}, m), (Histogram{{"Other", 1}}));
  EXPECT_EQ(categorize_free_text({"list of strings"}, m), (Histogram{{"String", 1}}));
  EXPECT_EQ(categorize_free_text({"   \t"}, m), (Histogram{{"Empty", 1}}));
}

TEST(Categorize, ShippedMapsParse) {
  for (const char* f : {"concepts.map", "contexts.map"}) {
    auto map = parse_category_map(text::read_file(std::string(TASKGEN_DATA_DIR) + "/categories/" + f));
    EXPECT_GT(map.size(), 5u) << f;
  }
  auto concepts = parse_category_map(text::read_file(std::string(TASKGEN_DATA_DIR) + "/categories/concepts.map"));
  EXPECT_EQ(categorize_free_text({"Recursion"}, concepts), (Histogram{{"Recursion", 1}}));
  EXPECT_THROW(parse_category_map("no arrow here"), std::invalid_argument);
}

TEST(Rubrics, ReferenceTotalsReproduction) {
  auto c = testing_support::rubric_corpus();
  auto s = summarize_rubrics(c.tasks, c.ratings);
  EXPECT_EQ(s.at(Criterion::e1, Bucket::all).percent(), "89.5%");
  EXPECT_EQ(s.at(Criterion::e2, Bucket::all).percent(), "92.5%");
  EXPECT_EQ(s.at(Criterion::e3, Bucket::all).percent(), "74.0%");
  EXPECT_EQ(s.at(Criterion::e4, Bucket::all).percent(), "100%");
  EXPECT_EQ(s.at(Criterion::e5, Bucket::all).percent(), "85.4%");
  EXPECT_EQ(s.at(Criterion::e6, Bucket::all).percent(), "80.0%");
  EXPECT_EQ(s.at(Criterion::e5, Bucket::all), (Fraction{158, 185}));
  EXPECT_EQ(s.at(Criterion::e6, Bucket::all), (Fraction{148, 185}));
  EXPECT_EQ(s.at(Criterion::e3, Bucket::one), (Fraction{94, 100}));
  EXPECT_EQ(s.at(Criterion::e3, Bucket::two), (Fraction{34, 50}));
  EXPECT_EQ(s.at(Criterion::e3, Bucket::three), (Fraction{20, 50}));
  EXPECT_EQ(s.at(Criterion::e5, Bucket::one).percent(), "83.1%");
  EXPECT_EQ(s.at(Criterion::e5, Bucket::two).percent(), "89.6%");
  EXPECT_EQ(s.at(Criterion::e6, Bucket::one).percent(), "78.7%");
  EXPECT_EQ(s.at(Criterion::e6, Bucket::two).percent(), "83.3%");
  EXPECT_EQ(s.at(Criterion::e6, Bucket::three).percent(), "79.2%");
  EXPECT_EQ(s.at(Criterion::e1, Bucket::one).percent(), "87.0%");
}

TEST(Rubrics, GateDenominatorsEqualSolvableCount) {
  auto c = testing_support::rubric_corpus();
  std::mt19937_64 rng(12);
  for (int round = 0; round < 20; ++round) {
    for (auto& r : c.ratings) {
      r.e2_solvable = rng() % 3 != 0;
      r.e5_solution = r.e2_solvable ? std::optional<bool>(rng() % 2 == 0) : std::nullopt;
      r.e6_tests = r.e2_solvable ? std::optional<bool>(rng() % 2 == 0) : std::nullopt;
    }
    auto s = summarize_rubrics(c.tasks, c.ratings);
    for (auto b : kAllBuckets) {
      EXPECT_EQ(s.at(Criterion::e5, b).den, s.at(Criterion::e2, b).num);
      EXPECT_EQ(s.at(Criterion::e6, b).den, s.at(Criterion::e2, b).num);
    }
  }
}

TEST(Rubrics, EmptyInputsAreNotAvailable) {
  auto s = summarize_rubrics({}, {});
  for (auto c : kAllCriteria)
    for (auto b : kAllBuckets) EXPECT_EQ(s.at(c, b).percent(), "n/a");
}

TEST(Rubrics, MissingRatingNamesTask) {
  auto c = testing_support::rubric_corpus();
  c.ratings.erase(c.ratings.begin() + 7);
  try {
    summarize_rubrics(c.tasks, c.ratings);
    FAIL();
  } catch (const MissingRating& e) {
    EXPECT_EQ(e.task_id(), "c1-7");
  }
}

TEST(Rubrics, GenerationFailedTasksNotCounted) {
  auto c = testing_support::rubric_corpus();
  Task failed;
  failed.id = "gf";
  failed.request.concepts = {"a"};
  failed.status = TaskStatus::generation_failed;
  c.tasks.push_back(failed);
  EXPECT_EQ(summarize_rubrics(c.tasks, c.ratings).at(Criterion::e1, Bucket::all), (Fraction{179, 200}));
}

TEST(Csv, RoundTrip) {
  auto c = testing_support::rubric_corpus();
  c.ratings[0].issue_notes = "has, comma and \"quotes\"\nand a newline";
  auto text = to_expert_csv(c.ratings);
  EXPECT_EQ(text.substr(0, std::string(kCsvHeader).size()), kCsvHeader);
  EXPECT_EQ(parse_expert_csv(text), c.ratings);
}

TEST(Csv, Errors) {
  auto bad = [](const std::string& body) {
    try {
      parse_expert_csv(std::string(kCsvHeader) + body);
    } catch (const CsvError& e) {
      return static_cast<long>(e.line());
    }
    return -1L;
  };
  EXPECT_EQ(bad("t1,r1,y,y,1,y,y,y,\nt2,r1,maybe,y,1,y,y,y,\n"), 3);
  EXPECT_EQ(bad("t1,r1,n,y,1,y,y,,\n"), 2);  // gated fields must be empty when e2 = n
  EXPECT_EQ(bad("t1,r1,y,y,1,y,,y,\n"), 2);  // and present when e2 = y
  EXPECT_EQ(bad("t1,r1,y,y,1,y,y,y\n"), 2);  // missing column
  EXPECT_EQ(bad("t1,r1,y,y,x,y,y,y,\n"), 2);
  EXPECT_EQ(bad("t1,r1,y,y,1,y,y,y,\nt1,r1,y,y,1,y,y,y,\n"), 3);
  EXPECT_THROW(parse_expert_csv("wrong,header\n"), CsvError);
  EXPECT_EQ(parse_expert_csv(std::string(kCsvHeader) + "t1,r1,n,n,0,y,,,\"a, b\"\n")[0].issue_notes, "a, b");
}

TEST(RaterComparison, PerCriterionAndPooled) {
  std::vector<ExpertRating> a, b;
  for (int i = 0; i < 4; ++i) {
    ExpertRating r{"t" + std::to_string(i), "a", true, true, 1, true, true, true, ""};
    a.push_back(r);
    r.rater_id = "b";
    if (i == 0) r.e3_concepts = false;
    if (i == 1) {
      r.e2_solvable = false;
      r.e5_solution.reset();
      r.e6_tests.reset();
    }
    b.push_back(r);
  }
  auto rep = compare_raters(a, b);
  EXPECT_EQ(rep.tasks, 4u);
  ASSERT_EQ(rep.per_criterion.size(), 5u);
  EXPECT_EQ(rep.per_criterion[0].criterion, Criterion::e2);
  EXPECT_EQ(rep.per_criterion[0].stats.agreements, 3u);
  EXPECT_EQ(rep.per_criterion[3].stats.n, 3u);  // E5 over tasks both judged solvable
  ASSERT_TRUE(rep.pooled);
  EXPECT_EQ(rep.pooled->n, 4u + 4u + 4u + 3u + 3u);
  EXPECT_EQ(rep.pooled->agreements, rep.pooled->n - 2);
  ASSERT_TRUE(rep.mean_per_task);
  EXPECT_GT(*rep.mean_per_task, 0.8);
  EXPECT_LT(*rep.mean_per_task, 1.0);
}

TEST(Report, MarkdownContainsTableAndAgreement) {
  auto c = testing_support::rubric_corpus();
  pipeline::IterationStatistics it;
  it.first_functional = {151, 25, 1, 1, 1};
  it.never_functional = 21;
  it.total = 200;
  it.initially_failing = 49;
  it.repaired = 28;
  auto md = render_markdown_report(summarize_rubrics(c.tasks, c.ratings), it, compare_raters(c.ratings, c.ratings));
  EXPECT_NE(md.find("| 1 concept | 2 concepts | 3 concepts | Overall |"), std::string::npos);
  EXPECT_NE(md.find("179/200 (89.5%)"), std::string::npos);
  EXPECT_NE(md.find("158/185 (85.4%)"), std::string::npos);
  EXPECT_NE(md.find("200/200 (100%)"), std::string::npos);
  EXPECT_NE(md.find("151/200 (75.5%)"), std::string::npos);
  EXPECT_NE(md.find("28/49 (57.1%)"), std::string::npos);
  EXPECT_NE(md.find("Overall (pooled pairs)"), std::string::npos);
  EXPECT_NE(md.find("Overall (mean per task)"), std::string::npos);
}
