#include "taskgen/prompt.hpp"

#include <algorithm>
#include <filesystem>

#include "taskgen/text.hpp"

namespace taskgen::prompt {

namespace {

constexpr std::string_view kFewShotSeparator = "\n----- response -----\n";

// Value markers for empty student input. Not wrapped in sentinels: they are ours.
constexpr std::string_view kNoConcepts =
    "unspecified (the student named no programming concept; pick one suitable for beginners)";
constexpr std::string_view kNoContext =
    "unspecified (the student named no context; use a neutral everyday scenario)";

const std::vector<std::string>& all_placeholder_names() {
  static const std::vector<std::string> names{"concepts", "context",  "description",
                                              "skeleton", "tests",    "solution",
                                              "compiler_output", "test_results"};
  return names;
}

struct Token {
  bool is_placeholder;
  std::string text;
};

std::vector<Token> tokenize(std::string_view body) {
  std::vector<Token> out;
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto open = body.find("{{", pos);
    if (open == std::string_view::npos) {
      out.push_back({false, std::string(body.substr(pos))});
      break;
    }
    auto close = body.find("}}", open + 2);
    if (close == std::string_view::npos) throw TemplateError("unterminated placeholder in template");
    if (open > pos) out.push_back({false, std::string(body.substr(pos, open - pos))});
    out.push_back({true, text::trim(body.substr(open + 2, close - open - 2))});
    pos = close + 2;
  }
  return out;
}

std::string render_concepts(const GenerationRequest& r) {
  if (r.concepts.empty()) return std::string(kNoConcepts);
  std::vector<std::string> lines;
  for (const auto& c : r.concepts) lines.push_back("- " + delimit_user_input(c));
  return text::join(lines, "\n");
}

std::string render_context(const GenerationRequest& r) {
  if (r.context.empty()) return std::string(kNoContext);
  return delimit_user_input(r.context);
}

}  // namespace

std::string to_string(Component c) {
  switch (c) {
    case Component::description: return "description";
    case Component::skeleton: return "skeleton";
    case Component::tests: return "tests";
    case Component::solution: return "solution";
    case Component::reflection: return "reflection";
  }
  return "description";
}

Component component_from_string(std::string_view s) {
  for (auto c : kAllComponents) {
    if (to_string(c) == s) return c;
  }
  throw TemplateError("unknown component '" + std::string(s) + "'");
}

std::string to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> names;
  for (const auto& tok : tokenize(body)) {
    if (tok.is_placeholder && std::find(names.begin(), names.end(), tok.text) == names.end()) {
      names.push_back(tok.text);
    }
  }
  return names;
}

std::vector<std::string> available_placeholders(Component c) {
  std::vector<std::string> names{"concepts", "context"};
  if (c == Component::description) return names;
  names.push_back("description");
  if (c == Component::skeleton) return names;
  names.push_back("skeleton");
  if (c == Component::tests) return names;
  names.push_back("tests");
  if (c == Component::solution) return names;
  names.insert(names.end(), {"solution", "compiler_output", "test_results"});
  return names;
}

void check_stage(const PromptTemplate& t) {
  const auto available = available_placeholders(t.component);
  const auto& known = all_placeholder_names();
  for (const auto& name : t.placeholders()) {
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw TemplateError("unknown placeholder {{" + name + "}} in " + to_string(t.component) +
                          " template");
    }
    if (std::find(available.begin(), available.end(), name) == available.end()) {
      throw StageViolation("{{" + name + "}} is not available at the " + to_string(t.component) +
                           " stage");
    }
  }
}

std::string escape_user_input(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 8);
  std::size_t run = 0;
  for (char c : s) {
    if (c == '<') {
      ++run;
      if (run >= 3) out += '\\';
    } else {
      run = 0;
    }
    out += c;
  }
  return out;
}

std::string delimit_user_input(std::string_view s) {
  std::string out(kInputOpen);
  out += escape_user_input(s);
  out += kInputClose;
  return out;
}

PromptMessages render(const PromptTemplate& t, const GenerationRequest& request,
                      const std::map<std::string, std::string>& prior) {
  check_stage(t);
  std::string user;
  for (const auto& tok : tokenize(t.body)) {
    if (!tok.is_placeholder) {
      user += tok.text;
    } else if (tok.text == "concepts") {
      user += render_concepts(request);
    } else if (tok.text == "context") {
      user += render_context(request);
    } else {
      auto it = prior.find(tok.text);
      if (it == prior.end()) throw MissingPlaceholder(tok.text);
      user += it->second;
    }
  }

  PromptMessages messages;
  messages.push_back({Role::system, t.system_preamble});
  for (const auto& ex : t.few_shot_examples) {
    messages.push_back({Role::user, ex.input});
    messages.push_back({Role::assistant, ex.output});
  }
  messages.push_back({Role::user, std::move(user)});
  return messages;
}

PromptMessages render(Component c, const TemplateSet& templates, const GenerationRequest& request,
                      const std::map<std::string, std::string>& prior) {
  auto it = templates.find(c);
  if (it == templates.end()) throw TemplateError("no template for " + to_string(c));
  return render(it->second, request, prior);
}

PromptTemplate parse_template_file(std::string_view text,
                                   const std::function<std::string(const std::string&)>& resolve) {
  PromptTemplate t;
  bool have_component = false;
  std::vector<std::string> preamble_parts;
  std::size_t pos = 0;
  bool saw_separator = false;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line_end = nl == std::string_view::npos ? text.size() : nl;
    std::string line(text.substr(pos, line_end - pos));
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "---") {
      saw_separator = true;
      break;
    }
    auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    auto colon = trimmed.find(':');
    if (colon == std::string::npos) throw TemplateError("front matter line without ':': " + line);
    auto key = text::trim(trimmed.substr(0, colon));
    auto value = text::trim(trimmed.substr(colon + 1));
    if (key == "component") {
      t.component = component_from_string(value);
      have_component = true;
    } else if (key == "preamble") {
      preamble_parts.push_back(resolve(value));
    } else if (key == "few_shot") {
      auto content = resolve(value);
      auto sep = content.find(kFewShotSeparator);
      if (sep == std::string::npos) {
        throw TemplateError("few-shot file " + value + " lacks a '----- response -----' line");
      }
      t.few_shot_examples.push_back(
          {content.substr(0, sep), content.substr(sep + kFewShotSeparator.size())});
    } else {
      throw TemplateError("unknown front matter key '" + key + "'");
    }
  }
  if (!saw_separator) throw TemplateError("template lacks the '---' line before the body");
  if (!have_component) throw TemplateError("template front matter lacks 'component:'");
  t.system_preamble = text::join(preamble_parts, "\n\n");
  t.body = std::string(text.substr(pos));
  check_stage(t);
  return t;
}

TemplateSet load_template_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  TemplateSet set;
  auto resolve = [&](const std::string& name) {
    if (name.find("..") != std::string::npos || (!name.empty() && name[0] == '/')) {
      throw TemplateError("template references must stay inside the template directory: " + name);
    }
    return text::read_file((fs::path(dir) / name).string());
  };
  for (auto c : kAllComponents) {
    auto path = fs::path(dir) / (to_string(c) + ".prompt");
    if (!fs::exists(path)) throw TemplateError("missing template file " + path.string());
    auto t = parse_template_file(text::read_file(path.string()), resolve);
    if (t.component != c) {
      throw TemplateError(path.string() + " declares component " + to_string(t.component));
    }
    set[c] = std::move(t);
  }
  return set;
}

void write_template_dir(const TemplateSet& templates, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const auto& [c, t] : templates) {
    const auto name = to_string(c);
    std::string front = "component: " + name + "\n";
    front += "preamble: " + name + ".preamble.txt\n";
    text::write_file_atomic((fs::path(dir) / (name + ".preamble.txt")).string(), t.system_preamble);
    for (std::size_t i = 0; i < t.few_shot_examples.size(); ++i) {
      const auto file = name + ".example" + std::to_string(i + 1) + ".txt";
      const auto& ex = t.few_shot_examples[i];
      text::write_file_atomic((fs::path(dir) / file).string(),
                              ex.input + std::string(kFewShotSeparator) + ex.output);
      front += "few_shot: " + file + "\n";
    }
    text::write_file_atomic((fs::path(dir) / (name + ".prompt")).string(),
                            front + "---\n" + t.body);
  }
}

}  // namespace taskgen::prompt
