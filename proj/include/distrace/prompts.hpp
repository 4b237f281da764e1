#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "distrace/gateway.hpp"

namespace distrace {

enum class ModeHint { kDirect, kCot, kReasoning, kAny };

std::string to_string(ModeHint hint);

struct PromptTemplate {
    std::string name;
    std::string system_template;
    std::string user_template;
    std::set<std::string> required_vars;
    ModeHint mode_hint = ModeHint::kAny;
    bool reconstructed_typesetting = false;
};

struct RenderedPrompt {
    std::string system;
    std::string user;
    /// Binding keys that are not placeholders of the template.
    std::vector<std::string> extra_bindings;
};

using Bindings = std::map<std::string, std::string>;

/// Placeholder names of the form {identifier} occurring in a template text.
std::set<std::string> placeholder_names(const std::string& text);

/// Loads the shipped template files. The manifest lists name, mode_hint and
/// required_vars; template texts live in <name>.system.txt / <name>.user.txt
/// next to it (one trailing newline is chomped). Registration validates that
/// each template's placeholders match its required_vars exactly.
class PromptLibrary {
public:
    static PromptLibrary load(const std::string& dir);
    /// DISTRACE_PROMPT_DIR env var if set, else the build-time asset path.
    static std::string default_dir();

    const std::vector<PromptTemplate>& templates() const { return templates_; }
    const PromptTemplate& get(const std::string& name) const;
    bool has(const std::string& name) const;

    /// Replaces each {var} with its binding, single pass, all other
    /// characters preserved verbatim. Throws ConfigError on unknown
    /// template or missing placeholder binding.
    RenderedPrompt render(const std::string& name, const Bindings& bindings) const;

    /// Non-template text asset (e.g. the taxonomy description).
    const std::string& asset(const std::string& name) const;

private:
    std::vector<PromptTemplate> templates_;
    std::map<std::string, size_t> index_;
    std::map<std::string, std::string> assets_;
};

}  // namespace distrace
