#pragma once

#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "support.hpp"
#include "taskgen/api.hpp"
#include "taskgen/store.hpp"

namespace testing_support {

/// Answers by component and by markers in the request:
/// a context of "outage" fails every call, "broken-zone" yields prose for
/// every code component, anything else yields the total_points task with the
/// user inputs echoed into the description.
class RoutingProvider : public llm::Provider {
 public:
  std::string complete(const prompt::PromptMessages& messages, const llm::ComponentModelConfig&) override {
    const auto& user = messages.back().content;
    if (user.find("outage") != std::string::npos) throw llm::TransientError("HTTP 503");
    const bool broken = user.find("broken-zone") != std::string::npos;
    auto is = [&](const char* c) { return text::starts_with(user, std::string("Task component: ") + c); };
    if (is("description")) {
      std::string d = kDescription;
      auto inputs = sentinel_contents(user);
      if (!inputs.empty()) d += " Theme: " + text::join(inputs, ", ") + ".";
      return d;
    }
    if (broken) return "This task about broken-zone is described in prose only.";
    if (is("skeleton")) return fenced(kSkeleton);
    if (is("tests")) return fenced(kTests);
    return fenced(kSolution);
  }

 private:
  static std::vector<std::string> sentinel_contents(const std::string& s) {
    std::vector<std::string> out;
    for (auto pos = s.find(prompt::kInputOpen); pos != std::string::npos;
         pos = s.find(prompt::kInputOpen, pos + 1)) {
      auto start = pos + prompt::kInputOpen.size();
      auto end = s.find(prompt::kInputClose, start);
      if (end == std::string::npos) break;
      out.push_back(s.substr(start, end - start));
    }
    return out;
  }
};

/// Sequential ids: prefix plus 16 hex digits, so issued sessions are valid tokens.
inline api::ApiService::IdSource counter_ids() {
  auto n = std::make_shared<unsigned long long>(0);
  return [n](std::string_view prefix) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", ++*n);
    return std::string(prefix) + buf;
  };
}

struct ApiHarness {
  std::shared_ptr<store::Store> store;
  std::shared_ptr<api::ApiService> service;
};

inline ApiHarness make_api(const std::string& root, int submission_timeout_ms = 1000) {
  ApiHarness h;
  h.store = std::make_shared<store::Store>(root);
  auto pipe = make_pipeline(gateway_for(std::make_shared<RoutingProvider>()));
  h.service = std::make_shared<api::ApiService>(h.store, pipe, shared_sandbox(),
                                                quick_limits(submission_timeout_ms), "python", counter_ids());
  return h;
}

struct Exchange {
  api::ApiRequest request;
  api::ApiResponse response;
};

struct ReplayResult {
  std::vector<Exchange> exchanges;
  std::vector<std::string> failures;
};

/// True when every key of `subset` is present in `whole` with an equal value
/// (recursively for objects).
inline bool json_contains(const json& whole, const json& subset) {
  if (!subset.is_object()) return whole == subset;
  if (!whole.is_object()) return false;
  for (const auto& [k, v] : subset.items()) {
    if (!whole.contains(k) || !json_contains(whole.at(k), v)) return false;
  }
  return true;
}

/// Replays a request log. Entries:
///   {"method", "path", "body" (json or string), "session"?, "repeat"?, "start"?,
///    "save_as"?, "expect": {"status", "body"?}}
/// `{name}` in a path expands to a saved task id; `{name[i]}` indexes a list
/// saved with `"save_as": "name[]"`, where i is the repeat index.
inline ReplayResult replay(api::ApiService& svc, const json& log) {
  ReplayResult out;
  std::map<std::string, std::string> vars;
  std::map<std::string, std::vector<std::string>> lists;
  std::size_t entry_no = 0;
  for (const auto& e : log) {
    ++entry_no;
    const int repeat = e.value("repeat", 1);
    const int start = e.value("start", 0);
    for (int r = 0; r < repeat; ++r) {
      const int i = start + r;
      std::string path = e.at("path");
      for (const auto& [k, v] : vars) path = text::replace_all(path, "{" + k + "}", v);
      for (const auto& [k, v] : lists) {
        if (static_cast<std::size_t>(i) < v.size()) path = text::replace_all(path, "{" + k + "[i]}", v[i]);
      }
      api::ApiRequest req{e.at("method"), path, "", std::nullopt};
      if (e.contains("body")) req.body = e["body"].is_string() ? e["body"].get<std::string>() : e["body"].dump();
      if (e.contains("session")) req.session = e["session"].get<std::string>();
      auto res = svc.handle(req);
      const auto& expect = e.at("expect");
      const std::string where = "entry " + std::to_string(entry_no) + " (" + req.method + " " + path +
                                ", repeat " + std::to_string(r) + ")";
      if (res.status != expect.at("status").get<int>()) {
        out.failures.push_back(where + ": status " + std::to_string(res.status) + " " + res.body.dump());
      } else if (expect.contains("body") && !json_contains(res.body, expect["body"])) {
        out.failures.push_back(where + ": body " + res.body.dump());
      }
      if (e.contains("save_as") && res.body.is_object() && res.body.contains("id")) {
        std::string name = e["save_as"];
        if (name.size() > 2 && name.compare(name.size() - 2, 2, "[]") == 0) {
          lists[name.substr(0, name.size() - 2)].push_back(res.body["id"]);
        } else {
          vars[name] = res.body["id"];
        }
      }
      out.exchanges.push_back({req, res});
    }
  }
  return out;
}

/// Lines of the hidden sources that a student never legitimately sees.
inline std::set<std::string> secret_lines(const store::Store& st) {
  std::set<std::string> secrets;
  for (const auto& t : st.list<Task>()) {
    const auto visible = t.description + "\n" + t.code_skeleton;
    for (const auto* src : {&t.model_solution, &t.unit_tests}) {
      for (const auto& l : text::split_lines(*src)) {
        auto s = text::trim(l);
        if (s.size() >= 6 && visible.find(s) == std::string::npos) secrets.insert(s);
      }
    }
  }
  return secrets;
}

/// Student-facing responses that contain any hidden line. Student submissions
/// are excluded from the search only where the student typed the line.
inline std::vector<std::string> find_leaks(const std::vector<Exchange>& exchanges, const store::Store& st) {
  std::vector<std::string> leaks;
  const auto secrets = secret_lines(st);
  for (const auto& x : exchanges) {
    if (x.request.path == "/api/stats") continue;  // instructor view
    // Compare against the decoded JSON text so escaped newlines and quotes do not hide a match.
    std::string decoded;
    std::function<void(const json&)> walk = [&](const json& j) {
      if (j.is_string()) decoded += j.get<std::string>() + "\n";
      else if (j.is_structured()) for (const auto& v : j) walk(v);
    };
    walk(x.response.body);
    for (const auto& s : secrets) {
      if (decoded.find(s) != std::string::npos && x.request.body.find(s) == std::string::npos) {
        leaks.push_back(x.request.method + " " + x.request.path + " leaked: " + s);
      }
    }
  }
  return leaks;
}

}  // namespace testing_support
