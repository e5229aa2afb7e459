#pragma once

#include <array>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "taskgen/domain.hpp"

namespace taskgen::prompt {

/// Pipeline order: each component may use the outputs of the ones before it.
enum class Component { description, skeleton, tests, solution, reflection };

inline constexpr std::array<Component, 5> kAllComponents{
    Component::description, Component::skeleton, Component::tests, Component::solution,
    Component::reflection};

std::string to_string(Component c);
Component component_from_string(std::string_view s);

enum class Role { system, user, assistant };
std::string to_string(Role r);

struct Message {
  Role role;
  std::string content;
  bool operator==(const Message&) const = default;
};

/// Chat-style input. First message is always the system message.
using PromptMessages = std::vector<Message>;

struct FewShotExample {
  std::string input;
  std::string output;
  bool operator==(const FewShotExample&) const = default;
};

struct PromptTemplate {
  Component component = Component::description;
  std::string system_preamble;
  std::vector<FewShotExample> few_shot_examples;
  std::string body;

  /// Placeholder names in order of first appearance.
  std::vector<std::string> placeholders() const;
  bool operator==(const PromptTemplate&) const = default;
};

using TemplateSet = std::map<Component, PromptTemplate>;

inline constexpr std::string_view kInputOpen = "<<<USER_INPUT>>>";
inline constexpr std::string_view kInputClose = "<<<END_USER_INPUT>>>";

class MissingPlaceholder : public std::runtime_error {
 public:
  explicit MissingPlaceholder(std::string name)
      : std::runtime_error("missing value for placeholder {{" + name + "}}"), name_(std::move(name)) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class StageViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Placeholders whose values exist by the time `c` runs.
std::vector<std::string> available_placeholders(Component c);

/// Throws StageViolation when the body references a placeholder produced by a
/// later stage, TemplateError for unknown names.
void check_stage(const PromptTemplate& t);

/// Breaks every run of three or more '<' so no sentinel can appear inside.
std::string escape_user_input(std::string_view s);
/// Escaped text wrapped in the sentinel pair.
std::string delimit_user_input(std::string_view s);

PromptMessages render(const PromptTemplate& t, const GenerationRequest& request,
                      const std::map<std::string, std::string>& prior);
PromptMessages render(Component c, const TemplateSet& templates, const GenerationRequest& request,
                      const std::map<std::string, std::string>& prior);

TemplateSet default_templates();

/// Directory layout: `<component>.prompt` files with a front-matter block
/// (`preamble:` and `few_shot:` file references) followed by `---` and the body.
TemplateSet load_template_dir(const std::string& dir);
void write_template_dir(const TemplateSet& templates, const std::string& dir);

/// Parses one template file; `resolve` maps a referenced file name to its text.
PromptTemplate parse_template_file(std::string_view text,
                                   const std::function<std::string(const std::string&)>& resolve);

}  // namespace taskgen::prompt
