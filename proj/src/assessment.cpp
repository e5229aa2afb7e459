#include "taskgen/assessment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "taskgen/text.hpp"

namespace taskgen::assessment {

std::string format_percent(long num, long den) {
  if (den <= 0) return "n/a";
  // Exact integer rounding of 1000*num/den, half up.
  const long long tenths = (2000LL * num + den) / (2LL * den);
  if (tenths == 1000) return "100%";
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10) + "%";
}

std::string format_fixed2(double v) {
  const double r = std::floor(v * 100.0 + 0.5 + 1e-9) / 100.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", r == 0.0 ? 0.0 : r);
  return buf;
}

std::string to_string(Criterion c) {
  static const char* names[] = {"E1", "E2", "E3", "E4", "E5", "E6"};
  return names[static_cast<std::size_t>(c)];
}

std::string to_string(Bucket b) {
  static const char* names[] = {"1", "2", "3", "all"};
  return names[static_cast<std::size_t>(b)];
}

namespace {

std::optional<Bucket> bucket_for(std::size_t concepts) {
  switch (concepts) {
    case 1: return Bucket::one;
    case 2: return Bucket::two;
    case 3: return Bucket::three;
    default: return std::nullopt;
  }
}

void require_pairs(const std::vector<Pair>& pairs) {
  if (pairs.empty()) throw EmptyInput("agreement needs at least one rating pair");
}

}  // namespace

RubricSummary summarize_rubrics(const std::vector<Task>& tasks,
                                const std::vector<ExpertRating>& ratings) {
  std::unordered_map<std::string, const ExpertRating*> by_task;
  for (const auto& r : ratings) {
    if (!by_task.emplace(r.task_id, &r).second) {
      throw std::invalid_argument("more than one rating for task " + r.task_id);
    }
  }
  RubricSummary s;
  for (const auto& t : tasks) {
    if (t.status == TaskStatus::generation_failed) continue;
    auto it = by_task.find(t.id);
    if (it == by_task.end()) throw MissingRating(t.id);
    const ExpertRating& r = *it->second;
    if (r.e2_solvable && (!r.e5_solution || !r.e6_tests)) throw MissingRating(t.id);

    std::vector<Bucket> columns{Bucket::all};
    if (auto b = bucket_for(t.concept_count())) columns.push_back(*b);
    for (Bucket b : columns) {
      auto add = [&](Criterion c, bool yes) {
        auto& f = s.at(c, b);
        ++f.den;
        if (yes) ++f.num;
      };
      add(Criterion::e1, t.status == TaskStatus::functional);
      add(Criterion::e2, r.e2_solvable);
      add(Criterion::e3, r.e3_concepts);
      add(Criterion::e4, r.e4_context);
      if (r.e2_solvable) {
        add(Criterion::e5, *r.e5_solution);
        add(Criterion::e6, *r.e6_tests);
      }
    }
  }
  return s;
}

double percent_agreement(const std::vector<Pair>& pairs) {
  require_pairs(pairs);
  auto same = std::count_if(pairs.begin(), pairs.end(), [](const Pair& p) { return p.first == p.second; });
  return static_cast<double>(same) / static_cast<double>(pairs.size());
}

AgreementStats gwet_ac1(const std::vector<Pair>& pairs) {
  require_pairs(pairs);
  AgreementStats s;
  s.n = pairs.size();
  for (const auto& [a, b] : pairs) {
    if (a == b) ++s.agreements;
    if (a) ++s.yes_a;
    if (b) ++s.yes_b;
  }
  const double n = static_cast<double>(s.n);
  s.pa = static_cast<double>(s.agreements) / n;
  s.pi_hat = static_cast<double>(s.yes_a + s.yes_b) / (2.0 * n);
  s.pe = 2.0 * s.pi_hat * (1.0 - s.pi_hat);
  s.ac1 = (s.pa - s.pe) / (1.0 - s.pe);
  return s;
}

std::string LikertSummary::mean_text() const { return n == 0 ? "n/a" : format_fixed2(mean); }
std::string LikertSummary::sd_text() const { return sd ? format_fixed2(*sd) : "n/a"; }

LikertSummary likert_summary(const std::vector<int>& values) {
  if (values.empty()) throw EmptyInput("likert summary needs at least one value");
  LikertSummary s;
  s.n = values.size();
  long sum = 0;
  for (int v : values) {
    if (!is_likert(v)) throw OutOfRange(v);
    ++s.histogram[static_cast<std::size_t>(v - 1)];
    sum += v;
  }
  const double n = static_cast<double>(s.n);
  s.mean = static_cast<double>(sum) / n;
  if (s.n >= 2) {
    // Sum of squared deviations from integer moments: exact up to the final division.
    long sumsq = 0;
    for (int v : values) sumsq += static_cast<long>(v) * v;
    const double ss = (static_cast<double>(sumsq) * n - static_cast<double>(sum) * sum) / n;
    s.sd = std::sqrt(std::max(0.0, ss / (n - 1.0)));
  }
  return s;
}

CompletionStats completion_rate(const std::vector<Submission>& submissions) {
  std::map<std::string, bool> solved;
  for (const auto& s : submissions) solved[s.task_id] = solved[s.task_id] || s.solved;
  CompletionStats c;
  c.attempted_tasks = static_cast<long>(solved.size());
  c.solved_tasks = std::count_if(solved.begin(), solved.end(), [](const auto& kv) { return kv.second; });
  return c;
}

Histogram categorize_free_text(const std::vector<std::string>& entries, const CategoryMap& map) {
  std::vector<std::pair<std::string, std::string>> folded;
  for (const auto& [pattern, category] : map) {
    auto f = text::fold(pattern);
    if (!f.empty()) folded.emplace_back(" " + f, category);
  }
  std::map<std::string, int> counts;
  for (const auto& e : entries) {
    const auto f = text::fold(e);
    if (f.empty()) {
      ++counts[std::string(kEmptyCategory)];
      continue;
    }
    const auto hay = " " + f;
    std::string category(kOtherCategory);
    for (const auto& [pattern, cat] : folded) {
      if (hay.find(pattern) != std::string::npos) {
        category = cat;
        break;
      }
    }
    ++counts[category];
  }
  Histogram h(counts.begin(), counts.end());
  std::stable_sort(h.begin(), h.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return h;
}

CategoryMap parse_category_map(const std::string& content) {
  CategoryMap map;
  for (const auto& raw : text::split_lines(content)) {
    auto line = text::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto arrow = line.find("=>");
    if (arrow == std::string::npos) throw std::invalid_argument("category rule without '=>': " + line);
    auto pattern = text::trim(line.substr(0, arrow));
    auto category = text::trim(line.substr(arrow + 2));
    if (pattern.empty() || category.empty()) throw std::invalid_argument("incomplete category rule: " + line);
    map.emplace_back(pattern, category);
  }
  return map;
}

// --- CSV -------------------------------------------------------------------

namespace {

struct CsvRow {
  std::size_t line;
  std::vector<std::string> fields;
};

std::vector<CsvRow> parse_csv(const std::string& s) {
  std::vector<CsvRow> rows;
  CsvRow row{1, {}};
  std::string field;
  std::size_t line = 1;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < s.size() && s[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = any = true;
    } else if (c == ',') {
      row.fields.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' && i + 1 < s.size() && s[i + 1] == '\n') {
      continue;
    } else if (c == '\n') {
      row.fields.push_back(std::move(field));
      field.clear();
      if (any || !row.fields.front().empty() || row.fields.size() > 1) rows.push_back(std::move(row));
      row = CsvRow{++line, {}};
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw CsvError(row.line, "unterminated quoted field");
  if (any || !field.empty()) {
    row.fields.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_quote(const std::string& v) {
  if (v.find_first_of(",\"\n\r") == std::string::npos) return v;
  return "\"" + text::replace_all(v, "\"", "\"\"") + "\"";
}

bool parse_yn(const std::string& v, std::size_t line, const char* column) {
  auto t = text::to_lower_ascii(text::trim(v));
  if (t == "y") return true;
  if (t == "n") return false;
  throw CsvError(line, std::string(column) + " must be y or n, got '" + v + "'");
}

}  // namespace

std::vector<ExpertRating> parse_expert_csv(const std::string& content) {
  auto rows = parse_csv(content);
  if (rows.empty()) throw CsvError(1, "missing header");
  std::vector<std::string> header;
  for (auto& f : rows.front().fields) header.push_back(text::trim(f));
  if (text::join(header, ",") != kExpertCsvHeader) {
    throw CsvError(rows.front().line, "header must be " + std::string(kExpertCsvHeader));
  }
  std::vector<ExpertRating> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    const auto line = rows[i].line;
    if (f.size() != 9) {
      throw CsvError(line, "expected 9 fields, got " + std::to_string(f.size()));
    }
    ExpertRating r;
    r.task_id = text::trim(f[0]);
    r.rater_id = text::trim(f[1]);
    if (r.task_id.empty()) throw CsvError(line, "task_id is empty");
    if (r.rater_id.empty()) throw CsvError(line, "rater_id is empty");
    r.e2_solvable = parse_yn(f[2], line, "e2");
    r.e3_concepts = parse_yn(f[3], line, "e3");
    const auto count = text::trim(f[4]);
    if (count.empty() || !std::all_of(count.begin(), count.end(), ::isdigit) || count.size() > 6) {
      throw CsvError(line, "e3_count must be a non-negative integer, got '" + f[4] + "'");
    }
    r.e3_concepts_count = std::stoi(count);
    r.e4_context = parse_yn(f[5], line, "e4");
    const auto e5 = text::trim(f[6]), e6 = text::trim(f[7]);
    if (r.e2_solvable) {
      if (e5.empty() || e6.empty()) throw CsvError(line, "e5 and e6 are required when e2 = y");
      r.e5_solution = parse_yn(e5, line, "e5");
      r.e6_tests = parse_yn(e6, line, "e6");
    } else if (!e5.empty() || !e6.empty()) {
      throw CsvError(line, "e5 and e6 must be empty when e2 = n (task " + r.task_id + ")");
    }
    r.issue_notes = f[8];
    if (!seen.emplace(r.task_id, r.rater_id).second) {
      throw CsvError(line, "duplicate rating for task " + r.task_id + " by " + r.rater_id);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string to_expert_csv(const std::vector<ExpertRating>& ratings) {
  std::string out(kExpertCsvHeader);
  out += "\n";
  auto yn = [](bool b) { return std::string(b ? "y" : "n"); };
  for (const auto& r : ratings) {
    out += csv_quote(r.task_id) + "," + csv_quote(r.rater_id) + "," + yn(r.e2_solvable) + "," +
           yn(r.e3_concepts) + "," + std::to_string(r.e3_concepts_count) + "," + yn(r.e4_context) +
           "," + (r.e5_solution ? yn(*r.e5_solution) : "") + "," +
           (r.e6_tests ? yn(*r.e6_tests) : "") + "," + csv_quote(r.issue_notes) + "\n";
  }
  return out;
}

// --- Agreement between raters ---------------------------------------------

AgreementReport compare_raters(const std::vector<ExpertRating>& first,
                               const std::vector<ExpertRating>& second) {
  std::map<std::string, const ExpertRating*> a;
  for (const auto& r : first) a.emplace(r.task_id, &r);

  std::map<Criterion, std::vector<Pair>> pairs;
  std::vector<double> task_agreement;
  AgreementReport rep;
  for (const auto& rb : second) {
    auto it = a.find(rb.task_id);
    if (it == a.end()) throw MissingRating(rb.task_id);
    const ExpertRating& ra = *it->second;
    ++rep.tasks;
    std::vector<Pair> local{{ra.e2_solvable, rb.e2_solvable},
                            {ra.e3_concepts, rb.e3_concepts},
                            {ra.e4_context, rb.e4_context}};
    pairs[Criterion::e2].push_back(local[0]);
    pairs[Criterion::e3].push_back(local[1]);
    pairs[Criterion::e4].push_back(local[2]);
    if (ra.e2_solvable && rb.e2_solvable) {
      Pair p5{*ra.e5_solution, *rb.e5_solution}, p6{*ra.e6_tests, *rb.e6_tests};
      pairs[Criterion::e5].push_back(p5);
      pairs[Criterion::e6].push_back(p6);
      local.push_back(p5);
      local.push_back(p6);
    }
    task_agreement.push_back(percent_agreement(local));
  }
  std::vector<Pair> all;
  for (auto& [c, ps] : pairs) {
    if (ps.empty()) continue;
    rep.per_criterion.push_back({c, gwet_ac1(ps)});
    all.insert(all.end(), ps.begin(), ps.end());
  }
  if (!all.empty()) rep.pooled = gwet_ac1(all);
  if (!task_agreement.empty()) {
    rep.mean_per_task = std::accumulate(task_agreement.begin(), task_agreement.end(), 0.0) /
                        static_cast<double>(task_agreement.size());
  }
  return rep;
}

namespace {

std::string cell(const Fraction& f) {
  if (f.den == 0) return "n/a";
  return std::to_string(f.num) + "/" + std::to_string(f.den) + " (" + f.percent() + ")";
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string ratio_percent(double v) {
  // Agreement fractions are ratios of counts; render via the exact formatter.
  return format_percent(std::lround(v * 1e6), 1000000);
}

}  // namespace

std::string render_markdown_report(const RubricSummary& summary,
                                   const pipeline::IterationStatistics& iterations,
                                   const std::optional<AgreementReport>& agreement) {
  static const char* labels[] = {
      "E1 functional (automated)", "E2 solvable", "E3 concepts incorporated",
      "E4 context incorporated", "E5 model solution correct", "E6 unit tests correct"};
  std::ostringstream md;
  md << "# Task quality report\n\n";
  md << "| Criterion | 1 concept | 2 concepts | 3 concepts | Overall |\n";
  md << "|---|---|---|---|---|\n";
  for (auto c : kAllCriteria) {
    md << "| " << labels[static_cast<std::size_t>(c)];
    for (auto b : kAllBuckets) md << " | " << cell(summary.at(c, b));
    md << " |\n";
  }
  md << "\nE5 and E6 are counted over tasks rated solvable (E2).\n";

  md << "\n## Generation iterations\n\n";
  md << "| Iteration | Tasks first functional |\n|---|---|\n";
  for (std::size_t k = 0; k < iterations.first_functional.size(); ++k) {
    md << "| " << k + 1 << " | " << iterations.first_functional[k] << " |\n";
  }
  md << "| never | " << iterations.never_functional << " |\n\n";
  md << "Tasks: " << iterations.total << "\n\n";
  md << "Functional after the first iteration: "
     << cell({iterations.first_functional.empty() ? 0 : iterations.first_functional[0],
              iterations.total})
     << "\n\n";
  md << "Repaired by reflection: " << cell({iterations.repaired, iterations.initially_failing})
     << "\n";

  if (agreement) {
    md << "\n## Inter-rater agreement\n\n";
    md << "Tasks rated by both raters: " << agreement->tasks << "\n\n";
    md << "| Criterion | Pairs | Agreement | Gwet AC1 |\n|---|---|---|---|\n";
    for (const auto& ca : agreement->per_criterion) {
      md << "| " << to_string(ca.criterion) << " | " << ca.stats.n << " | "
         << format_percent(static_cast<long>(ca.stats.agreements), static_cast<long>(ca.stats.n))
         << " | " << fixed3(ca.stats.ac1) << " |\n";
    }
    if (agreement->pooled) {
      const auto& p = *agreement->pooled;
      md << "| Overall (pooled pairs) | " << p.n << " | "
         << format_percent(static_cast<long>(p.agreements), static_cast<long>(p.n)) << " | "
         << fixed3(p.ac1) << " |\n";
    }
    if (agreement->mean_per_task) {
      md << "| Overall (mean per task) | " << agreement->tasks << " | "
         << ratio_percent(*agreement->mean_per_task) << " | n/a |\n";
    }
  }
  return md.str();
}

}  // namespace taskgen::assessment
