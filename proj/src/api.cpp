#include "taskgen/api.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "httplib.h"
#include "taskgen/assessment.hpp"
#include "taskgen/text.hpp"

namespace taskgen::api {

namespace {

ApiResponse error(int status, const std::string& code, const std::string& message) {
  return {status, json{{"error_code", code}, {"message", message}}, std::nullopt};
}

ApiResponse no_content() { return {204, nullptr, std::nullopt}; }

std::optional<json> parse_object(const std::string& body) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

/// Integer field in 1..5, else an error message.
std::optional<std::string> likert_field(const json& j, const char* name, int& out) {
  if (!j.contains(name)) return std::string(name) + " is required";
  const auto& v = j.at(name);
  if (!v.is_number_integer()) return std::string(name) + " must be an integer";
  const auto n = v.get<long long>();
  if (n < 1 || n > 5) return std::string(name) + " must be between 1 and 5";
  out = static_cast<int>(n);
  return std::nullopt;
}

json likert_json(const std::vector<int>& values) {
  if (values.empty()) {
    return json{{"n", 0}, {"mean", "n/a"}, {"sd", "n/a"}, {"histogram", {0, 0, 0, 0, 0}}};
  }
  auto s = assessment::likert_summary(values);
  return json{{"n", s.n}, {"mean", s.mean_text()}, {"sd", s.sd_text()}, {"histogram", s.histogram}};
}

json fraction_json(long num, long den) {
  return json{{"num", num}, {"den", den}, {"percent", assessment::format_percent(num, den)}};
}

bool is_session_token(const std::string& s) {
  return s.size() >= 16 && s.size() <= 64 &&
         std::all_of(s.begin(), s.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

}  // namespace

json student_view(const Task& t) {
  return json{{"id", t.id},
              {"description", t.description},
              {"code_skeleton", t.code_skeleton},
              {"created_at", text::format_timestamp(t.created_at)}};
}

std::string redact(std::string s, const std::string& secret_source) {
  std::vector<std::string> lines;
  for (const auto& l : text::split_lines(secret_source)) {
    auto t = text::trim(l);
    if (t.size() >= 6) lines.push_back(t);
  }
  std::sort(lines.begin(), lines.end(), [](auto& a, auto& b) { return a.size() > b.size(); });
  for (const auto& l : lines) s = text::replace_all(std::move(s), l, "[hidden test code]");
  return s;
}

ApiService::ApiService(std::shared_ptr<store::Store> store,
                       std::shared_ptr<pipeline::Pipeline> pipeline,
                       std::shared_ptr<sandbox::Runner> runner, sandbox::SandboxLimits limits,
                       std::string teaching_language, IdSource ids)
    : store_(std::move(store)),
      pipeline_(std::move(pipeline)),
      runner_(std::move(runner)),
      limits_(limits),
      teaching_language_(std::move(teaching_language)),
      ids_(std::move(ids)),
      rng_(std::random_device{}()) {
  if (!store_ || !pipeline_ || !runner_) throw std::invalid_argument("api service is missing a dependency");
}

std::string ApiService::next_id(std::string_view prefix) {
  if (ids_) return ids_(prefix);
  std::lock_guard lock(rng_mutex_);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng_()),
                static_cast<unsigned long long>(rng_()));
  return std::string(prefix) + buf;
}

ApiResponse ApiService::handle(const ApiRequest& req) {
  std::optional<std::string> issued;
  std::string session;
  if (req.session && is_session_token(*req.session)) {
    session = *req.session;
  } else {
    session = next_id("");
    issued = session;
  }

  ApiResponse res;
  try {
    const auto parts = [&] {
      std::vector<std::string> p;
      std::string cur;
      for (char c : req.path) {
        if (c == '/') {
          if (!cur.empty()) p.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      if (!cur.empty()) p.push_back(cur);
      return p;
    }();
    const auto& m = req.method;
    const auto n = parts.size();
    if (n < 2 || parts[0] != "api") {
      res = error(404, "NotFound", "no such endpoint");
    } else if (n == 2 && parts[1] == "tasks" && m == "POST") {
      res = create_task(req.body);
    } else if (n == 3 && parts[1] == "tasks" && m == "GET") {
      res = get_task(parts[2]);
    } else if (n == 4 && parts[1] == "tasks" && parts[3] == "submissions" && m == "POST") {
      res = submit(parts[2], req.body);
    } else if (n == 4 && parts[1] == "tasks" && parts[3] == "ratings" && m == "POST") {
      res = rate(parts[2], req.body, session);
    } else if (n == 2 && parts[1] == "survey" && m == "POST") {
      res = survey(req.body, session);
    } else if (n == 2 && parts[1] == "stats" && m == "GET") {
      res = stats();
    } else if (n == 2 && parts[1] == "session" && m == "GET") {
      res = {200, json{{"session", session}}, std::nullopt};
    } else {
      res = error(404, "NotFound", "no such endpoint");
    }
  } catch (const store::IoFailure& e) {
    res = error(503, "StoreUnavailable", e.what());
  } catch (const std::exception& e) {
    res = error(500, "InternalError", e.what());
  }
  res.new_session = issued;
  return res;
}

ApiResponse ApiService::create_task(const std::string& body) {
  auto j = parse_object(body);
  if (!j) return error(422, "MalformedRequest", "body must be a JSON object");
  GenerationRequest raw;
  raw.teaching_language = teaching_language_;
  if (j->contains("concepts")) {
    const auto& c = j->at("concepts");
    if (!c.is_array()) return error(422, "MalformedRequest", "concepts must be a list of strings");
    for (const auto& e : c) {
      if (!e.is_string()) return error(422, "MalformedRequest", "concepts must be a list of strings");
      raw.concepts.push_back(e.get<std::string>());
    }
  }
  if (j->contains("context")) {
    const auto& c = j->at("context");
    if (!c.is_string()) return error(422, "MalformedRequest", "context must be a string");
    raw.context = c.get<std::string>();
  }
  auto request = normalize_request(std::move(raw));
  try {
    validate(request);
  } catch (const SchemaError& e) {
    return error(422, "MalformedRequest", e.what());
  }

  const auto id = next_id("t");
  try {
    auto result = pipeline_->generate_task(request, id);
    store_->put(result.task);
    store_->put(result.trace);
    if (result.task.status != TaskStatus::functional) {
      auto r = error(502, "GenerationUnsuccessful",
                     "The generated task did not pass its own checks. Please try again.");
      r.body["retry"] = true;
      return r;
    }
    return {201, student_view(result.task), std::nullopt};
  } catch (const pipeline::GenerationFailed& e) {
    try {
      store_->put(e.task());
      store_->put(e.trace());
    } catch (const std::exception&) {
      // the failure response matters more than the record
    }
    return error(503, "ServiceUnavailable", "Task generation is unavailable right now.");
  }
}

ApiResponse ApiService::get_task(const std::string& id) {
  auto t = store_->find<Task>(id);
  if (!t) return error(404, "NotFound", "unknown task");
  if (t->status != TaskStatus::functional) return error(409, "TaskNotFunctional", "task is not available");
  return {200, student_view(*t), std::nullopt};
}

ApiResponse ApiService::submit(const std::string& task_id, const std::string& body) {
  auto task = store_->find<Task>(task_id);
  if (!task) return error(404, "NotFound", "unknown task");
  auto j = parse_object(body);
  if (!j || !j->contains("code") || !j->at("code").is_string()) {
    return error(422, "MalformedRequest", "body must be {\"code\": string}");
  }
  const auto code = j->at("code").get<std::string>();
  if (text::trim(code).empty()) return error(422, "EmptyCode", "code must not be empty");

  ExecutionOutcome outcome;
  try {
    outcome = sandbox::run_submission(*runner_, *task, code, limits_);
  } catch (const sandbox::TaskNotFunctional&) {
    return error(409, "TaskNotFunctional", "task is not available for solving");
  } catch (const sandbox::SandboxSetupFailure& e) {
    return error(503, "ServiceUnavailable", "code execution is unavailable right now");
  }
  Submission sub;
  sub.id = next_id("s");
  sub.task_id = task_id;
  sub.submitted_code = code;
  sub.outcome = outcome;
  sub.solved = pipeline::evaluate_e1(outcome);
  sub.submitted_at = now_ms();
  store_->put(sub);

  json tests = json::array();
  for (const auto& t : outcome.tests) {
    tests.push_back({{"name", redact(t.name, task->unit_tests)},
                     {"passed", t.passed},
                     {"message", redact(t.message, task->unit_tests)}});
  }
  json out{{"solved", sub.solved},
           {"compile_ok", outcome.compile_ok},
           {"timed_out", outcome.timed_out},
           {"tests", tests}};
  if (!outcome.compile_ok) out["diagnostics"] = redact(outcome.stderr_text, task->unit_tests);
  return {200, out, std::nullopt};
}

ApiResponse ApiService::rate(const std::string& task_id, const std::string& body,
                             const std::string& session) {
  if (!store_->exists(store::Kind::tasks, task_id)) return error(404, "NotFound", "unknown task");
  auto j = parse_object(body);
  if (!j) return error(422, "MalformedRequest", "body must be a JSON object");
  StudentTaskRating r;
  r.task_id = task_id;
  if (auto msg = likert_field(*j, "a1", r.a1_context)) return error(422, "OutOfRange", *msg);
  if (auto msg = likert_field(*j, "a2", r.a2_sensible)) return error(422, "OutOfRange", *msg);
  if (!j->contains("a3") || !j->at("a3").is_boolean()) {
    return error(422, "MalformedRequest", "a3 must be true or false");
  }
  r.a3_solvable = j->at("a3").get<bool>();
  store_->put(r, task_id + "__" + session, true);
  return no_content();
}

ApiResponse ApiService::survey(const std::string& body, const std::string& session) {
  auto j = parse_object(body);
  if (!j) return error(422, "MalformedRequest", "body must be a JSON object");
  SurveyResponse s;
  s.respondent_id = session;
  if (auto msg = likert_field(*j, "b1", s.b1)) return error(422, "OutOfRange", *msg);
  if (auto msg = likert_field(*j, "b2", s.b2)) return error(422, "OutOfRange", *msg);
  if (auto msg = likert_field(*j, "b3", s.b3)) return error(422, "OutOfRange", *msg);
  if (auto msg = likert_field(*j, "b4", s.b4)) return error(422, "OutOfRange", *msg);
  store_->put(s, true);
  return no_content();
}

ApiResponse ApiService::stats() { return {200, compute_stats(*store_), std::nullopt}; }

json compute_stats(const store::Store& store) {
  json out;
  const auto tasks = store.list<Task>();
  std::map<std::string, long> status_counts{
      {"functional", 0}, {"non_functional", 0}, {"generation_failed", 0}};
  for (const auto& t : tasks) ++status_counts[to_string(t.status)];
  out["tasks"] = status_counts;

  std::vector<int> a1, a2;
  long yes = 0, no = 0;
  for (const auto& r : store.list<StudentTaskRating>()) {
    a1.push_back(r.a1_context);
    a2.push_back(r.a2_sensible);
    (r.a3_solvable ? yes : no)++;
  }
  out["a1"] = likert_json(a1);
  out["a2"] = likert_json(a2);
  out["a3"] = {{"yes", yes}, {"no", no}, {"percent_yes", assessment::format_percent(yes, yes + no)}};

  std::vector<int> b[4];
  for (const auto& s : store.list<SurveyResponse>()) {
    b[0].push_back(s.b1);
    b[1].push_back(s.b2);
    b[2].push_back(s.b3);
    b[3].push_back(s.b4);
  }
  for (int i = 0; i < 4; ++i) out["b" + std::to_string(i + 1)] = likert_json(b[i]);

  auto completion = assessment::completion_rate(store.list<Submission>());
  out["completion_rate"] = {{"attempted", completion.attempted_tasks},
                            {"solved", completion.solved_tasks},
                            {"rate", completion.rate_text()}};

  auto it = pipeline::iteration_statistics(store.list<GenerationTrace>());
  out["iteration_statistics"] = {
      {"tasks", it.total},
      {"first_functional", it.first_functional},
      {"never_functional", it.never_functional},
      {"functional_first_iteration",
       assessment::format_percent(it.first_functional.empty() ? 0 : it.first_functional[0], it.total)},
      {"repaired", it.repaired},
      {"initially_failing", it.initially_failing},
      {"repair_rate", assessment::format_percent(it.repaired, it.initially_failing)}};

  // Rubric summary over tasks that carry an expert rating; with several raters
  // the lowest rater id stands for the task.
  std::map<std::string, ExpertRating> chosen;
  for (auto& r : store.list<ExpertRating>()) {
    auto [pos, inserted] = chosen.emplace(r.task_id, r);
    if (!inserted && r.rater_id < pos->second.rater_id) pos->second = r;
  }
  if (chosen.empty()) {
    out["rubrics"] = "n/a";
  } else {
    std::vector<Task> rated;
    std::vector<ExpertRating> ratings;
    for (const auto& t : tasks) {
      auto r = chosen.find(t.id);
      if (r == chosen.end() || t.status == TaskStatus::generation_failed) continue;
      rated.push_back(t);
      ratings.push_back(r->second);
    }
    auto summary = assessment::summarize_rubrics(rated, ratings);
    json rub;
    for (auto c : assessment::kAllCriteria) {
      for (auto bk : assessment::kAllBuckets) {
        const auto& f = summary.at(c, bk);
        rub[assessment::to_string(c)][assessment::to_string(bk)] = fraction_json(f.num, f.den);
      }
    }
    out["rubrics"] = rub;
  }
  return out;
}

struct HttpFrontend::Impl {
  httplib::Server server;
};

HttpFrontend::HttpFrontend(ApiService& service) : impl_(std::make_unique<Impl>()) {
  auto adapt = [&service](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r{req.method, req.path, req.body, std::nullopt};
    if (req.has_header("Cookie")) {
      const auto cookie = req.get_header_value("Cookie");
      const std::string key = std::string(kSessionCookie) + "=";
      for (std::size_t pos = 0; pos < cookie.size();) {
        auto end = cookie.find(';', pos);
        auto part = text::trim(cookie.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
        if (text::starts_with(part, key)) r.session = part.substr(key.size());
        if (end == std::string::npos) break;
        pos = end + 1;
      }
    }
    auto out = service.handle(r);
    res.status = out.status;
    if (out.new_session) {
      res.set_header("Set-Cookie", std::string(kSessionCookie) + "=" + *out.new_session +
                                       "; Path=/; HttpOnly; SameSite=Lax");
    }
    if (!out.body.is_null()) res.set_content(out.body.dump(), "application/json");
  };
  impl_->server.Get(".*", adapt);
  impl_->server.Post(".*", adapt);
  impl_->server.set_payload_max_length(1 << 20);
}

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot listen on " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpFrontend::run() { impl_->server.listen_after_bind(); }
void HttpFrontend::stop() { impl_->server.stop(); }
void HttpFrontend::wait_until_ready() { impl_->server.wait_until_ready(); }

void serve(ApiService& service, const std::string& host, int port) {
  HttpFrontend http(service);
  http.bind(host, port);
  http.run();
}

}  // namespace taskgen::api
