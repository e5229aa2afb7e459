#include "taskgen/pipeline.hpp"

#include "taskgen/text.hpp"

namespace taskgen::pipeline {

using prompt::Component;

void validate(const PipelineConfig& cfg) {
  if (cfg.max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  for (const auto& [c, m] : cfg.component_configs) llm::validate(m);
  sandbox::validate(cfg.limits);
}

namespace {

bool is_header(const std::string& line, std::string_view header) {
  return text::trim(line) == header;
}

}  // namespace

ReflectionParts parse_reflection(const std::string& response) {
  const auto lines = text::split_lines(response);
  std::optional<std::size_t> tests_at, solution_at;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!tests_at && is_header(lines[i], kTestsHeader)) tests_at = i;
    if (!solution_at && is_header(lines[i], kSolutionHeader)) solution_at = i;
  }
  auto slice = [&](std::size_t from, std::size_t to) {
    std::vector<std::string> part(lines.begin() + static_cast<std::ptrdiff_t>(from),
                                  lines.begin() + static_cast<std::ptrdiff_t>(to));
    return text::trim(text::join(part, "\n"));
  };
  ReflectionParts parts;
  if (!tests_at && !solution_at) {
    parts.solution = response;
    return parts;
  }
  if (tests_at) {
    std::size_t end = (solution_at && *solution_at > *tests_at) ? *solution_at : lines.size();
    parts.tests = slice(*tests_at + 1, end);
  }
  if (solution_at) {
    std::size_t end = (tests_at && *tests_at > *solution_at) ? *tests_at : lines.size();
    parts.solution = slice(*solution_at + 1, end);
  } else {
    parts.solution = slice(0, *tests_at);
  }
  return parts;
}

std::string compiler_output(const ExecutionOutcome& o) {
  if (o.compile_ok) return "(no errors while loading the solution and tests)";
  auto err = text::trim(o.stderr_text);
  return err.empty() ? "(loading failed without diagnostics)" : err;
}

std::string test_results(const ExecutionOutcome& o) {
  std::vector<std::string> lines;
  if (!o.compile_ok) {
    lines.push_back("No tests ran because the code failed to load.");
  } else if (o.tests.empty() && !o.timed_out) {
    lines.push_back("No tests were found or executed.");
  }
  for (const auto& t : o.tests) {
    lines.push_back(t.name + ": " + (t.passed ? "PASS" : "FAIL" + (t.message.empty() ? "" : " - " + t.message)));
  }
  if (o.timed_out) lines.push_back("The run exceeded the time limit and was stopped.");
  return text::join(lines, "\n");
}

std::string reflection_feedback(const ExecutionOutcome& o) {
  return "Compiler output:\n" + compiler_output(o) + "\n\nTest results:\n" + test_results(o);
}

Pipeline::Pipeline(std::shared_ptr<llm::Gateway> gateway, std::shared_ptr<sandbox::Runner> runner,
                   prompt::TemplateSet templates, PipelineConfig cfg, Clock clock)
    : gateway_(std::move(gateway)),
      runner_(std::move(runner)),
      templates_(std::move(templates)),
      cfg_(std::move(cfg)),
      clock_(std::move(clock)) {
  if (!gateway_ || !runner_) throw std::invalid_argument("pipeline needs a gateway and a runner");
  validate(cfg_);
  for (auto c : prompt::kAllComponents) {
    auto it = templates_.find(c);
    if (it == templates_.end()) throw prompt::TemplateError("no template for " + to_string(c));
    prompt::check_stage(it->second);
  }
}

std::string Pipeline::complete(Component c, const GenerationRequest& request,
                               const std::map<std::string, std::string>& prior) {
  auto messages = prompt::render(c, templates_, request, prior);
  auto it = cfg_.component_configs.find(c);
  llm::ComponentModelConfig mc = it != cfg_.component_configs.end() ? it->second
                                                                    : llm::ComponentModelConfig{};
  mc.component = c;
  return gateway_->complete(messages, mc);
}

GenerationResult Pipeline::generate_task(const GenerationRequest& request,
                                         const std::string& task_id) {
  GenerationResult r;
  r.task.id = task_id;
  r.task.request = request;
  r.task.created_at = clock_();
  r.task.status = TaskStatus::generation_failed;
  r.trace.task_id = task_id;

  auto fail = [&](const std::string& what) -> GenerationFailed {
    r.task.iterations_used = static_cast<int>(r.trace.iterations.size());
    return GenerationFailed(what, r.task, r.trace);
  };

  try {
    std::map<std::string, std::string> prior;
    r.task.description = text::trim(complete(Component::description, request, prior));
    prior["description"] = r.task.description;
    r.task.code_skeleton = sandbox::sanitize_source(complete(Component::skeleton, request, prior));
    prior["skeleton"] = r.task.code_skeleton;

    std::string raw_tests = complete(Component::tests, request, prior);
    std::string tests = sandbox::sanitize_source(raw_tests);
    prior["tests"] = tests;
    std::string raw_solution = complete(Component::solution, request, prior);
    std::string solution = sandbox::sanitize_source(raw_solution);

    for (int k = 1;; ++k) {
      IterationRecord rec;
      rec.index = k;
      rec.unit_tests = raw_tests;
      rec.model_solution = raw_solution;
      rec.outcome = runner_->run_solution_against_tests(solution, tests, cfg_.limits);
      const bool ok = evaluate_e1(rec.outcome);
      if (ok || k >= cfg_.max_iterations) {
        r.trace.iterations.push_back(std::move(rec));
        r.task.status = ok ? TaskStatus::functional : TaskStatus::non_functional;
        break;
      }
      rec.reflection_feedback = reflection_feedback(rec.outcome);
      auto reflect_prior = prior;
      reflect_prior["tests"] = tests;
      reflect_prior["solution"] = solution;
      reflect_prior["compiler_output"] = compiler_output(rec.outcome);
      reflect_prior["test_results"] = test_results(rec.outcome);
      r.trace.iterations.push_back(std::move(rec));

      auto parts = parse_reflection(complete(Component::reflection, request, reflect_prior));
      if (parts.tests) {
        raw_tests = *parts.tests;
        tests = sandbox::sanitize_source(raw_tests);
      }
      raw_solution = parts.solution;
      solution = sandbox::sanitize_source(raw_solution);
    }
    r.task.unit_tests = tests;
    r.task.model_solution = solution;
    r.task.iterations_used = static_cast<int>(r.trace.iterations.size());
  } catch (const llm::LlmError& e) {
    throw fail(std::string("language model unavailable: ") + e.what());
  } catch (const sandbox::SandboxSetupFailure& e) {
    throw fail(std::string("sandbox unavailable: ") + e.what());
  }
  return r;
}

bool evaluate_e1(const ExecutionOutcome& o) {
  return o.compile_ok && !o.timed_out && !o.tests.empty() && o.all_tests_passed();
}

std::optional<double> IterationStatistics::repair_rate() const {
  if (initially_failing == 0) return std::nullopt;
  return static_cast<double>(repaired) / initially_failing;
}

IterationStatistics iteration_statistics(const std::vector<GenerationTrace>& traces,
                                         int max_iterations) {
  IterationStatistics s;
  s.first_functional.assign(static_cast<std::size_t>(std::max(1, max_iterations)), 0);
  for (const auto& tr : traces) {
    if (tr.iterations.empty()) continue;
    ++s.total;
    std::optional<std::size_t> first;
    for (std::size_t i = 0; i < tr.iterations.size(); ++i) {
      if (evaluate_e1(tr.iterations[i].outcome)) {
        first = i;
        break;
      }
    }
    if (!first || *first > 0) ++s.initially_failing;
    if (!first) {
      ++s.never_functional;
      continue;
    }
    if (*first >= s.first_functional.size()) s.first_functional.resize(*first + 1, 0);
    ++s.first_functional[*first];
    if (*first > 0) ++s.repaired;
  }
  return s;
}

}  // namespace taskgen::pipeline
