#include "distrace/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "distrace/digest.hpp"
#include "distrace/errors.hpp"
#include "distrace/io.hpp"
#include "distrace/text.hpp"

namespace distrace {

namespace {

using nlohmann::json;

std::string record_context(const std::string& path, size_t lineno, const std::string& id) {
    std::ostringstream os;
    os << path << ":" << lineno;
    if (!id.empty()) os << " (id " << id << ")";
    return os.str();
}

const json& require_field(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw DataError(where + ": missing field '" + std::string(key) + "'");
    return *it;
}

}  // namespace

void validate_problem(const McqProblem& p) {
    std::set<std::string> seen;
    for (const auto& d : p.gold_distractors) {
        if (!seen.insert(trim(d)).second)
            throw DataError("problem " + p.id + ": duplicate gold distractor '" + d + "'");
    }
    if (seen.count(trim(p.correct_answer)))
        throw DataError("problem " + p.id + ": correct_answer appears among gold distractors");
}

std::vector<McqProblem> load_corpus(const std::string& path) {
    std::vector<McqProblem> problems;
    std::set<std::string> ids;
    for_each_jsonl(path, [&](size_t lineno, const json& obj) {
        McqProblem p;
        std::string where = record_context(path, lineno, obj.value("id", std::string()));
        try {
            p.id = require_field(obj, "id", where).get<std::string>();
            p.question_text = require_field(obj, "question", where).get<std::string>();
            p.correct_answer = require_field(obj, "correct_answer", where).get<std::string>();
            const json& ds = require_field(obj, "distractors", where);
            if (!ds.is_array() || ds.size() != 3)
                throw DataError(where + ": field 'distractors' must hold exactly 3 strings (got " +
                                std::to_string(ds.is_array() ? ds.size() : 0) + ")");
            for (size_t i = 0; i < 3; ++i) p.gold_distractors[i] = ds[i].get<std::string>();
            const json& errs = require_field(obj, "errors", where);
            for (const auto& e : errs) p.error_descriptions.push_back(e.get<std::string>());
            p.references_image = require_field(obj, "references_image", where).get<bool>();
            p.choice_reliant = require_field(obj, "choice_reliant", where).get<bool>();
        } catch (const DataError&) {
            throw;
        } catch (const std::exception& e) {
            throw DataError(where + ": " + e.what());
        }
        if (!ids.insert(p.id).second) throw DataError(where + ": duplicate id");
        try {
            validate_problem(p);
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
        problems.push_back(std::move(p));
    });
    return problems;
}

void write_corpus(const std::string& path, const std::vector<McqProblem>& problems) {
    std::vector<json> records;
    records.reserve(problems.size());
    for (const auto& p : problems) {
        json obj;
        obj["id"] = p.id;
        obj["question"] = p.question_text;
        obj["correct_answer"] = p.correct_answer;
        obj["distractors"] = p.gold_distractors;
        obj["errors"] = p.error_descriptions;
        obj["references_image"] = p.references_image;
        obj["choice_reliant"] = p.choice_reliant;
        records.push_back(std::move(obj));
    }
    write_jsonl(path, records);
}

std::vector<McqProblem> filter_corpus(const std::vector<McqProblem>& problems,
                                      const FilterCriteria& criteria) {
    std::vector<McqProblem> kept;
    for (const auto& p : problems) {
        if (criteria.drop_image_references && p.references_image) continue;
        if (criteria.drop_choice_reliant && p.choice_reliant) continue;
        if (criteria.require_error_descriptions && p.error_descriptions.empty()) continue;
        kept.push_back(p);
    }
    return kept;
}

namespace detail {

uint64_t stratum_seed(uint64_t seed, const std::string& label) {
    return seed ^ sha256_prefix64(label);
}

void seeded_shuffle(std::vector<size_t>& idx, uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (size_t i = idx.size(); i > 1; --i) {
        // Modulo draw: the bias is irrelevant here, determinism is not.
        size_t j = static_cast<size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

}  // namespace detail

}  // namespace distrace
