#include "distrace/prompts.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>

#include "distrace/errors.hpp"
#include "distrace/io.hpp"

#ifndef DISTRACE_DEFAULT_PROMPT_DIR
#define DISTRACE_DEFAULT_PROMPT_DIR "assets/prompts"
#endif

namespace distrace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ModeHint hint) {
    switch (hint) {
        case ModeHint::kDirect: return "direct";
        case ModeHint::kCot: return "cot";
        case ModeHint::kReasoning: return "reasoning";
        case ModeHint::kAny: return "any";
    }
    return "any";
}

namespace {

ModeHint mode_hint_from_string(const std::string& s) {
    if (s == "direct") return ModeHint::kDirect;
    if (s == "cot") return ModeHint::kCot;
    if (s == "reasoning") return ModeHint::kReasoning;
    if (s == "any") return ModeHint::kAny;
    throw ConfigError("unknown mode_hint: " + s);
}

bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

/// Finds the placeholder starting at text[pos] ('{'); returns the name and
/// advances end past the closing '}', or returns empty when the braces do
/// not delimit an identifier.
std::string placeholder_at(const std::string& text, size_t pos, size_t& end) {
    size_t i = pos + 1;
    if (i >= text.size() || !is_ident_start(text[i])) return {};
    size_t start = i;
    while (i < text.size() && is_ident_char(text[i])) ++i;
    if (i >= text.size() || text[i] != '}') return {};
    end = i + 1;
    return text.substr(start, i - start);
}

std::string chomp(std::string s) {
    if (!s.empty() && s.back() == '\n') s.pop_back();
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

std::set<std::string> placeholder_names(const std::string& text) {
    std::set<std::string> names;
    for (size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') continue;
        size_t end = 0;
        std::string name = placeholder_at(text, i, end);
        if (!name.empty()) {
            names.insert(name);
            i = end - 1;
        }
    }
    return names;
}

std::string PromptLibrary::default_dir() {
    if (const char* env = std::getenv("DISTRACE_PROMPT_DIR"); env && *env) return env;
    return DISTRACE_DEFAULT_PROMPT_DIR;
}

PromptLibrary PromptLibrary::load(const std::string& dir) {
    PromptLibrary lib;
    fs::path base(dir);
    json manifest;
    try {
        manifest = json::parse(read_file((base / "manifest.json").string()));
    } catch (const std::exception& e) {
        throw ConfigError("prompt manifest: " + std::string(e.what()));
    }
    for (const auto& entry : manifest.at("templates")) {
        PromptTemplate t;
        t.name = entry.at("name").get<std::string>();
        t.mode_hint = mode_hint_from_string(entry.value("mode_hint", "any"));
        for (const auto& v : entry.at("required_vars")) t.required_vars.insert(v.get<std::string>());
        t.reconstructed_typesetting = entry.value("reconstructed_typesetting", false);
        t.system_template = chomp(read_file((base / (t.name + ".system.txt")).string()));
        t.user_template = chomp(read_file((base / (t.name + ".user.txt")).string()));

        std::set<std::string> found = placeholder_names(t.system_template);
        std::set<std::string> user_vars = placeholder_names(t.user_template);
        found.insert(user_vars.begin(), user_vars.end());
        if (found != t.required_vars)
            throw ConfigError("template " + t.name +
                              ": placeholders do not match required_vars in the manifest");
        if (lib.index_.count(t.name)) throw ConfigError("duplicate template name: " + t.name);
        lib.index_[t.name] = lib.templates_.size();
        lib.templates_.push_back(std::move(t));
    }
    if (manifest.contains("assets")) {
        for (const auto& entry : manifest["assets"]) {
            std::string name = entry.at("name").get<std::string>();
            std::string file = entry.at("file").get<std::string>();
            lib.assets_[name] = chomp(read_file((base / file).string()));
        }
    }
    return lib;
}

bool PromptLibrary::has(const std::string& name) const { return index_.count(name) > 0; }

const PromptTemplate& PromptLibrary::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown template: " + name);
    return templates_[it->second];
}

const std::string& PromptLibrary::asset(const std::string& name) const {
    auto it = assets_.find(name);
    if (it == assets_.end()) throw ConfigError("unknown prompt asset: " + name);
    return it->second;
}

RenderedPrompt PromptLibrary::render(const std::string& name, const Bindings& bindings) const {
    const PromptTemplate& t = get(name);
    for (const auto& var : t.required_vars)
        if (!bindings.count(var))
            throw ConfigError("template " + name + ": missing placeholder binding '" + var + "'");

    // Substituted values are never rescanned, so binding text containing
    // placeholder syntax passes through untouched.
    auto substitute = [&](const std::string& text) {
        std::string out;
        out.reserve(text.size());
        for (size_t i = 0; i < text.size(); ++i) {
            if (text[i] == '{') {
                size_t end = 0;
                std::string var = placeholder_at(text, i, end);
                if (!var.empty() && t.required_vars.count(var)) {
                    out += bindings.at(var);
                    i = end - 1;
                    continue;
                }
            }
            out.push_back(text[i]);
        }
        return out;
    };

    RenderedPrompt result;
    result.system = substitute(t.system_template);
    result.user = substitute(t.user_template);
    for (const auto& [key, value] : bindings)
        if (!t.required_vars.count(key)) result.extra_bindings.push_back(key);
    return result;
}

}  // namespace distrace
