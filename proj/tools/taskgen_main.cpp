// taskgen: corpus generation, reporting, sampling, export and the HTTP service.

#include <filesystem>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "taskgen/api.hpp"
#include "taskgen/assessment.hpp"
#include "taskgen/batch.hpp"
#include "taskgen/codec.hpp"
#include "taskgen/config.hpp"
#include "taskgen/llm.hpp"
#include "taskgen/pipeline.hpp"
#include "taskgen/prompt.hpp"
#include "taskgen/sandbox.hpp"
#include "taskgen/store.hpp"
#include "taskgen/text.hpp"

namespace fs = std::filesystem;
using namespace taskgen;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitInfrastructure = 3;

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Runtime {
  std::shared_ptr<llm::Gateway> gateway;
  std::shared_ptr<sandbox::PythonSandbox> sandbox;
  std::shared_ptr<pipeline::Pipeline> pipeline;
};

Runtime build_runtime(const ServiceConfig& cfg) {
  Runtime rt;
  std::shared_ptr<llm::Provider> provider;
  pipeline::PipelineConfig pc;
  prompt::TemplateSet templates;
  try {
    provider = llm::make_provider(cfg.provider);
    if (cfg.provider_config) pc.component_configs = llm::load_model_configs(*cfg.provider_config);
    templates = cfg.template_dir.empty() ? prompt::default_templates()
                                         : prompt::load_template_dir(cfg.template_dir);
  } catch (const std::exception& e) {
    throw Usage(e.what());
  }
  pc.max_iterations = cfg.max_iterations;
  pc.limits = cfg.limits;
  rt.gateway = std::make_shared<llm::Gateway>(provider);
  rt.sandbox = std::make_shared<sandbox::PythonSandbox>(cfg.sandbox);
  try {
    rt.pipeline = std::make_shared<pipeline::Pipeline>(rt.gateway, rt.sandbox, templates, pc);
  } catch (const std::exception& e) {
    throw Usage(e.what());
  }
  return rt;
}

std::string default_data(const std::string& rel) { return (fs::path(TASKGEN_DATA_DIR) / rel).string(); }

std::string read_or_usage(const std::string& path) {
  try {
    return text::read_file(path);
  } catch (const std::exception& e) {
    throw Usage(e.what());
  }
}

std::vector<ExpertRating> load_ratings(const std::string& path, const store::Store& st) {
  std::vector<ExpertRating> ratings;
  try {
    ratings = assessment::parse_expert_csv(read_or_usage(path));
  } catch (const assessment::CsvError& e) {
    throw Usage(path + ": " + e.what());
  }
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    const auto& r = ratings[i];
    auto t = st.find<Task>(r.task_id);
    if (!t) throw Usage(path + ": data row " + std::to_string(i + 1) + ": unknown task " + r.task_id);
    try {
      validate(r, *t);
    } catch (const SchemaError& e) {
      throw Usage(path + ": data row " + std::to_string(i + 1) + " (task " + r.task_id + "): " + e.what());
    }
  }
  return ratings;
}

store::Store open_corpus(const std::string& dir) {
  if (!fs::is_directory(fs::path(dir) / "tasks")) throw Usage("not a corpus directory: " + dir);
  return store::Store(dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate, grade and assess personalized programming tasks"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a task corpus");
  int count = 0;
  std::string buckets_spec, contexts_path = default_data("catalogs/contexts.txt"),
                            concepts_path = default_data("catalogs/concepts.txt"), out_dir;
  std::uint64_t seed = 0;
  ServiceConfig gen_cfg;
  std::string model_config;
  int workers = 0, failure_budget = 5;
  gen->add_option("--count", count, "Number of tasks")->required();
  gen->add_option("--buckets", buckets_spec, "Tasks with 1:2:3 concepts, e.g. 100:50:50")->required();
  gen->add_option("--contexts", contexts_path, "Context catalog")->capture_default_str();
  gen->add_option("--concepts", concepts_path, "Concept catalog")->capture_default_str();
  gen->add_option("--seed", seed, "Random seed")->required();
  gen->add_option("--out", out_dir, "Output corpus directory")->required();
  gen->add_option("--provider", gen_cfg.provider, "live | scripted:FILE | replay:DIR | record:DIR")
      ->capture_default_str();
  gen->add_option("--model-config", model_config, "Per-component model settings (JSON)");
  gen->add_option("--templates", gen_cfg.template_dir, "Prompt template directory");
  gen->add_option("--interpreter", gen_cfg.sandbox.interpreter, "Interpreter command")
      ->capture_default_str();
  gen->add_option("--max-iterations", gen_cfg.max_iterations, "Reflection budget")->capture_default_str();
  gen->add_option("--timeout-ms", gen_cfg.limits.wall_timeout_ms, "Sandbox wall timeout")
      ->capture_default_str();
  gen->add_option("--workers", workers, "Parallel tasks (default: sandbox cap)");
  gen->add_option("--failure-budget", failure_budget, "Infrastructure failures tolerated")
      ->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report", "Markdown report for a rated corpus");
  std::string corpus, ratings_csv, sample_csv, report_out;
  rep->add_option("--corpus", corpus, "Corpus directory")->required();
  rep->add_option("--ratings", ratings_csv, "Expert ratings CSV")->required();
  rep->add_option("--sample-ratings", sample_csv, "Second rater CSV");
  rep->add_option("--out", report_out, "Write the report here instead of stdout");

  // sample
  auto* smp = app.add_subcommand("sample", "Seeded random sample of task ids");
  std::size_t sample_n = 30;
  std::uint64_t sample_seed = 0;
  smp->add_option("--corpus", corpus, "Corpus directory")->required();
  smp->add_option("--n", sample_n, "Sample size")->capture_default_str();
  smp->add_option("--seed", sample_seed, "Random seed")->required();

  // serve
  auto* srv = app.add_subcommand("serve", "Run the HTTP API");
  std::string config_path;
  srv->add_option("--config", config_path, "Service config (JSON)")->required();

  // export
  auto* exp = app.add_subcommand("export", "Export tasks with traces and ratings");
  std::string store_root, status_filter;
  std::size_t concept_filter = 0;
  exp->add_option("--store", store_root, "Store directory")->required();
  exp->add_option("--out", out_dir, "Bundle directory")->required();
  exp->add_option("--status", status_filter, "Only tasks with this status");
  exp->add_option("--concept-count", concept_filter, "Only tasks with this many concepts");

  // import-ratings
  auto* imp = app.add_subcommand("import-ratings", "Store expert ratings from CSV");
  imp->add_option("--store", store_root, "Store directory")->required();
  imp->add_option("--csv", ratings_csv, "Expert ratings CSV")->required();

  // templates export
  auto* tpl = app.add_subcommand("templates", "Prompt template utilities");
  tpl->require_subcommand(1);
  auto* tpl_export = tpl->add_subcommand("export", "Write the built-in templates to a directory");
  tpl_export->add_option("--out", out_dir, "Template directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) {
      batch::BatchOptions opts;
      opts.count = count;
      opts.buckets = batch::parse_buckets(buckets_spec);
      opts.contexts = batch::load_catalog(contexts_path);
      opts.concepts = batch::load_catalog(concepts_path);
      opts.seed = seed;
      opts.teaching_language = gen_cfg.teaching_language;
      opts.workers = workers > 0 ? workers : gen_cfg.sandbox.max_concurrent;
      opts.failure_budget = failure_budget;
      batch::validate(opts);
      if (!model_config.empty()) gen_cfg.provider_config = model_config;
      if (fs::exists(fs::path(out_dir) / "tasks") && !fs::is_empty(fs::path(out_dir) / "tasks")) {
        throw Usage("output directory already holds a corpus: " + out_dir);
      }
      auto rt = build_runtime(gen_cfg);
      store::Store st(out_dir);
      auto result = batch::run_batch(opts, *rt.pipeline, st);
      std::cerr << "functional " << result.functional << ", non-functional " << result.non_functional
                << ", generation failed " << result.generation_failed << "\n";
      std::cout << result.manifest.dump(2) << "\n";
      if (result.aborted) {
        std::cerr << "error: infrastructure failures exceeded the budget of " << failure_budget << "\n";
        return kExitInfrastructure;
      }
      return 0;
    }
    if (*rep) {
      auto st = open_corpus(corpus);
      auto ratings = load_ratings(ratings_csv, st);
      std::vector<Task> tasks;
      for (auto& t : st.list<Task>()) {
        if (t.status != TaskStatus::generation_failed) tasks.push_back(std::move(t));
      }
      std::optional<assessment::AgreementReport> agreement;
      if (!sample_csv.empty()) {
        agreement = assessment::compare_raters(ratings, load_ratings(sample_csv, st));
      }
      std::string md;
      try {
        md = assessment::render_markdown_report(assessment::summarize_rubrics(tasks, ratings),
                                                pipeline::iteration_statistics(st.list<GenerationTrace>()),
                                                agreement);
      } catch (const assessment::MissingRating& e) {
        throw Usage(ratings_csv + ": " + e.what());
      } catch (const std::invalid_argument& e) {
        throw Usage(ratings_csv + ": " + e.what());
      }
      if (report_out.empty()) {
        std::cout << md;
      } else {
        text::write_file_atomic(report_out, md);
      }
      return 0;
    }
    if (*smp) {
      auto st = open_corpus(corpus);
      for (const auto& id : batch::sample_ids(st.ids(store::Kind::tasks), sample_n, sample_seed)) {
        std::cout << id << "\n";
      }
      return 0;
    }
    if (*srv) {
      ServiceConfig cfg;
      try {
        cfg = load_service_config(config_path);
      } catch (const std::exception& e) {
        throw Usage(e.what());
      }
      auto rt = build_runtime(cfg);
      auto st = std::make_shared<store::Store>(cfg.store_root);
      api::ApiService service(st, rt.pipeline, rt.sandbox, cfg.limits, cfg.teaching_language);
      std::cerr << "listening on " << cfg.host << ":" << cfg.port << "\n";
      api::serve(service, cfg.host, cfg.port);
      return 0;
    }
    if (*exp) {
      store::TaskFilter filter;
      if (!status_filter.empty()) {
        try {
          filter.status = task_status_from_string(status_filter);
        } catch (const std::exception& e) {
          throw Usage(e.what());
        }
      }
      if (concept_filter > 0) filter.concept_count = concept_filter;
      auto st = open_corpus(store_root);
      auto m = st.export_corpus(filter, out_dir);
      std::cout << m.to_json().dump(2) << "\n";
      return 0;
    }
    if (*imp) {
      auto st = open_corpus(store_root);
      auto ratings = load_ratings(ratings_csv, st);
      for (const auto& r : ratings) st.put(r, true);
      std::cerr << "imported " << ratings.size() << " ratings\n";
      return 0;
    }
    if (*tpl_export) {
      prompt::write_template_dir(prompt::default_templates(), out_dir);
      return 0;
    }
  } catch (const Usage& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const batch::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const sandbox::SandboxSetupFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfrastructure;
  } catch (const store::IoFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfrastructure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
