#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "taskgen/domain.hpp"
#include "taskgen/pipeline.hpp"

namespace taskgen::assessment {

class EmptyInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class OutOfRange : public std::invalid_argument {
 public:
  explicit OutOfRange(int value)
      : std::invalid_argument("value out of range 1..5: " + std::to_string(value)), value_(value) {}
  int value() const { return value_; }

 private:
  int value_;
};

class MissingRating : public std::runtime_error {
 public:
  explicit MissingRating(std::string task_id)
      : std::runtime_error("no expert rating for task " + task_id), task_id_(std::move(task_id)) {}
  const std::string& task_id() const { return task_id_; }

 private:
  std::string task_id_;
};

/// Malformed CSV input; `line()` is 1-based and counts the header.
class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// One decimal, round-half-up; exactly 100 prints as "100%"; 0/0 is "n/a".
std::string format_percent(long num, long den);
/// Two decimals, round-half-up.
std::string format_fixed2(double v);

struct Fraction {
  long num = 0;
  long den = 0;
  std::string percent() const { return format_percent(num, den); }
  bool operator==(const Fraction&) const = default;
};

enum class Criterion { e1, e2, e3, e4, e5, e6 };
inline constexpr std::array<Criterion, 6> kAllCriteria{Criterion::e1, Criterion::e2, Criterion::e3,
                                                       Criterion::e4, Criterion::e5, Criterion::e6};
std::string to_string(Criterion c);

/// Concept-count buckets 1, 2, 3 and the overall column. Tasks with any other
/// concept count contribute to the overall column only.
enum class Bucket { one, two, three, all };
inline constexpr std::array<Bucket, 4> kAllBuckets{Bucket::one, Bucket::two, Bucket::three, Bucket::all};
std::string to_string(Bucket b);

struct RubricSummary {
  std::array<std::array<Fraction, 4>, 6> cells{};

  Fraction& at(Criterion c, Bucket b) {
    return cells[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)];
  }
  const Fraction& at(Criterion c, Bucket b) const {
    return cells[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)];
  }
};

/// E1 from task status, E2..E6 from one rating per task; E5/E6 count only
/// E2-positive tasks. Tasks whose generation failed are not counted.
RubricSummary summarize_rubrics(const std::vector<Task>& tasks,
                                const std::vector<ExpertRating>& ratings);

using Pair = std::pair<bool, bool>;

double percent_agreement(const std::vector<Pair>& pairs);

struct AgreementStats {
  std::size_t n = 0;
  std::size_t agreements = 0;
  std::size_t yes_a = 0;
  std::size_t yes_b = 0;
  double pa = 0;
  double pi_hat = 0;
  double pe = 0;
  double ac1 = 0;
};

/// Binary two-rater Gwet AC1.
AgreementStats gwet_ac1(const std::vector<Pair>& pairs);

struct LikertSummary {
  std::size_t n = 0;
  double mean = 0;
  /// Sample standard deviation; empty for n < 2.
  std::optional<double> sd;
  std::array<int, 5> histogram{};

  std::string mean_text() const;
  std::string sd_text() const;
};

LikertSummary likert_summary(const std::vector<int>& values);

struct CompletionStats {
  long attempted_tasks = 0;
  long solved_tasks = 0;
  std::string rate_text() const { return format_percent(solved_tasks, attempted_tasks); }
};

CompletionStats completion_rate(const std::vector<Submission>& submissions);

/// Ordered (pattern, category) rules; the first pattern found wins.
using CategoryMap = std::vector<std::pair<std::string, std::string>>;
using Histogram = std::vector<std::pair<std::string, int>>;

inline constexpr std::string_view kOtherCategory = "Other";
inline constexpr std::string_view kEmptyCategory = "Empty";

/// Entries and patterns are case- and punctuation-folded; a pattern matches
/// when it occurs at the start of a word. Sorted by count descending, then name.
Histogram categorize_free_text(const std::vector<std::string>& entries, const CategoryMap& map);
/// Lines of `pattern => Category`; `#` comments and blank lines ignored.
CategoryMap parse_category_map(const std::string& text);

// Expert rating CSV: task_id,rater_id,e2,e3,e3_count,e4,e5,e6,notes
inline constexpr std::string_view kExpertCsvHeader =
    "task_id,rater_id,e2,e3,e3_count,e4,e5,e6,notes";
std::vector<ExpertRating> parse_expert_csv(const std::string& text);
std::string to_expert_csv(const std::vector<ExpertRating>& ratings);

struct CriterionAgreement {
  Criterion criterion;
  AgreementStats stats;
};

struct AgreementReport {
  std::size_t tasks = 0;
  /// E2..E6; E5/E6 only over tasks both raters judged solvable.
  std::vector<CriterionAgreement> per_criterion;
  /// Every criterion pair concatenated.
  std::optional<AgreementStats> pooled;
  /// Mean over tasks of the fraction of criteria on which the raters agree.
  std::optional<double> mean_per_task;
};

/// Pairs each task rated in `second` with its rating in `first`.
AgreementReport compare_raters(const std::vector<ExpertRating>& first,
                               const std::vector<ExpertRating>& second);

std::string render_markdown_report(const RubricSummary& summary,
                                   const pipeline::IterationStatistics& iterations,
                                   const std::optional<AgreementReport>& agreement);

}  // namespace taskgen::assessment
