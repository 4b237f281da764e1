#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace distrace {

/// One multiple-choice item: problem text, the correct answer, the three
/// gold distractors, and optional misconception descriptions.
struct McqProblem {
    std::string id;
    std::string question_text;
    std::string correct_answer;
    std::array<std::string, 3> gold_distractors;
    std::vector<std::string> error_descriptions;
    bool references_image = false;
    bool choice_reliant = false;
};

struct FilterCriteria {
    bool drop_image_references = true;
    bool drop_choice_reliant = true;
    bool require_error_descriptions = true;
};

/// Parses a line-delimited corpus file. Each line is a JSON object with keys
/// id, question, correct_answer, distractors (3 strings), errors,
/// references_image, choice_reliant. Throws DataError naming the line and
/// field on malformed records, duplicate ids, or invariant violations
/// (distractor count != 3, duplicate distractors, correct answer among
/// distractors).
std::vector<McqProblem> load_corpus(const std::string& path);

/// Symmetric writer for load_corpus.
void write_corpus(const std::string& path, const std::vector<McqProblem>& problems);

/// Validates a single in-memory problem; throws DataError on violation.
void validate_problem(const McqProblem& p);

/// Keeps the subsequence passing all enabled criteria; input order preserved.
std::vector<McqProblem> filter_corpus(const std::vector<McqProblem>& problems,
                                      const FilterCriteria& criteria);

template <typename T>
struct SampleResult {
    std::vector<T> records;
    /// Strata that held fewer than per_stratum records: (label, size).
    std::vector<std::pair<std::string, size_t>> shortfalls;
};

namespace detail {

/// Deterministic Fisher-Yates; std::shuffle is implementation-defined so a
/// fixed draw procedure keeps samples stable across platforms.
void seeded_shuffle(std::vector<size_t>& idx, uint64_t seed);

uint64_t stratum_seed(uint64_t seed, const std::string& label);

}  // namespace detail

/// Picks min(per_stratum, stratum size) records per stratum with a seeded
/// uniform shuffle; output preserves input order; deterministic for a fixed
/// seed.
template <typename T>
SampleResult<T> stratified_sample(const std::vector<T>& items,
                                  const std::function<std::string(const T&)>& stratum_of,
                                  size_t per_stratum, uint64_t seed) {
    SampleResult<T> result;
    // Stratum labels in first-appearance order keep reporting stable.
    std::vector<std::string> labels;
    std::vector<std::vector<size_t>> groups;
    for (size_t i = 0; i < items.size(); ++i) {
        std::string label = stratum_of(items[i]);
        size_t g = labels.size();
        for (size_t j = 0; j < labels.size(); ++j)
            if (labels[j] == label) {
                g = j;
                break;
            }
        if (g == labels.size()) {
            labels.push_back(label);
            groups.emplace_back();
        }
        groups[g].push_back(i);
    }

    std::vector<size_t> chosen;
    for (size_t g = 0; g < labels.size(); ++g) {
        std::vector<size_t> idx = groups[g];
        detail::seeded_shuffle(idx, detail::stratum_seed(seed, labels[g]));
        size_t take = std::min(per_stratum, idx.size());
        if (idx.size() < per_stratum) result.shortfalls.emplace_back(labels[g], idx.size());
        chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<long>(take));
    }
    std::sort(chosen.begin(), chosen.end());
    result.records.reserve(chosen.size());
    for (size_t i : chosen) result.records.push_back(items[i]);
    return result;
}

}  // namespace distrace
