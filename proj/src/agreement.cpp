#include "distrace/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "distrace/errors.hpp"

namespace distrace {

namespace {

struct DpCell {
    int matches = 0;
    long long cost = 0;
    int8_t choice = 0;  // 0 = skip gold, 1 = skip predicted, 2 = match
};

bool better(int m1, long long c1, int m2, long long c2) {
    return m1 > m2 || (m1 == m2 && c1 < c2);
}

/// Maximum-cardinality, minimum-total-distance matching between two sorted
/// offset lists under the window constraint. An optimal matching on a line
/// can always be taken non-crossing, so a quadratic DP suffices.
void align_tag(const std::vector<size_t>& gold, const std::vector<size_t>& predicted,
               size_t window, std::vector<std::pair<size_t, size_t>>& out_pairs) {
    size_t m = gold.size(), n = predicted.size();
    std::vector<DpCell> dp((m + 1) * (n + 1));
    auto at = [&](size_t i, size_t j) -> DpCell& { return dp[i * (n + 1) + j]; };

    for (size_t i = m;; --i) {
        for (size_t j = n;; --j) {
            if (i < m || j < n) {
                DpCell best;
                bool have = false;
                if (i < m) {  // leave gold[i] unmatched (deletion)
                    best = at(i + 1, j);
                    best.choice = 0;
                    have = true;
                }
                if (j < n) {  // leave predicted[j] unmatched (insertion)
                    DpCell cand = at(i, j + 1);
                    cand.choice = 1;
                    if (!have || better(cand.matches, cand.cost, best.matches, best.cost)) {
                        best = cand;
                        have = true;
                    }
                }
                if (i < m && j < n) {
                    long long d = std::llabs(static_cast<long long>(gold[i]) -
                                             static_cast<long long>(predicted[j]));
                    if (d <= static_cast<long long>(window)) {
                        DpCell cand = at(i + 1, j + 1);
                        cand.matches += 1;
                        cand.cost += d;
                        cand.choice = 2;
                        if (better(cand.matches, cand.cost, best.matches, best.cost)) best = cand;
                    }
                }
                at(i, j) = best;
            }
            if (j == 0) break;
        }
        if (i == 0) break;
    }

    size_t i = 0, j = 0;
    while (i < m || j < n) {
        switch (at(i, j).choice) {
            case 2: out_pairs.emplace_back(predicted[j], gold[i]); ++i; ++j; break;
            case 0: ++i; break;
            default: ++j; break;
        }
    }
}

std::array<std::vector<size_t>, kTagCount> marker_offsets(const AnnotatedTrace& trace) {
    std::array<std::vector<size_t>, kTagCount> offsets;
    for (const auto& span : trace.spans)
        offsets[static_cast<size_t>(span.tag)].push_back(span.end_offset);
    return offsets;
}

}  // namespace

TagAlignment align_annotations(const AnnotatedTrace& predicted, const AnnotatedTrace& gold,
                               size_t window) {
    if (predicted.original_text != gold.original_text)
        throw DataError("align_annotations: annotations are over different texts");

    auto pred_offsets = marker_offsets(predicted);
    auto gold_offsets = marker_offsets(gold);

    TagAlignment alignment;
    for (size_t t = 0; t < kTagCount; ++t) {
        std::vector<std::pair<size_t, size_t>> pairs;
        align_tag(gold_offsets[t], pred_offsets[t], window, pairs);
        auto& counts = alignment.per_tag[t];
        counts.matched = static_cast<int>(pairs.size());
        counts.inserted = static_cast<int>(pred_offsets[t].size() - pairs.size());
        counts.deleted = static_cast<int>(gold_offsets[t].size() - pairs.size());
        for (const auto& [p, g] : pairs)
            alignment.pairs.push_back({static_cast<StrategyTag>(t), p, g});
    }
    return alignment;
}

TagPrf tag_prf(const TagAlignment& alignment) {
    TagPrf result;
    double precision_sum = 0.0, recall_sum = 0.0;
    int precision_n = 0, recall_n = 0;
    for (size_t t = 0; t < kTagCount; ++t) {
        const auto& c = alignment.per_tag[t];
        if (c.matched + c.inserted > 0) {
            double p = static_cast<double>(c.matched) / (c.matched + c.inserted);
            result.per_tag[t].precision = p;
            precision_sum += p;
            ++precision_n;
        }
        if (c.matched + c.deleted > 0) {
            double r = static_cast<double>(c.matched) / (c.matched + c.deleted);
            result.per_tag[t].recall = r;
            recall_sum += r;
            ++recall_n;
        }
    }
    if (precision_n > 0) result.macro.precision = precision_sum / precision_n;
    if (recall_n > 0) result.macro.recall = recall_sum / recall_n;
    return result;
}

Prf binary_prf(const std::vector<bool>& predicted, const std::vector<bool>& gold) {
    if (predicted.size() != gold.size())
        throw DataError("binary_prf: length mismatch");
    int tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] && gold[i]) ++tp;
        if (predicted[i] && !gold[i]) ++fp;
        if (!predicted[i] && gold[i]) ++fn;
    }
    Prf prf;
    if (tp + fp > 0) prf.precision = static_cast<double>(tp) / (tp + fp);
    if (tp + fn > 0) prf.recall = static_cast<double>(tp) / (tp + fn);
    return prf;
}

std::optional<double> cohen_kappa(const std::vector<std::string>& a,
                                  const std::vector<std::string>& b) {
    if (a.size() != b.size()) throw DataError("cohen_kappa: length mismatch");
    if (a.empty()) throw DataError("cohen_kappa: empty input");
    const double n = static_cast<double>(a.size());

    double observed = 0.0;
    std::map<std::string, double> freq_a, freq_b;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] == b[i]) observed += 1.0;
        freq_a[a[i]] += 1.0;
        freq_b[b[i]] += 1.0;
    }
    double p_o = observed / n;
    double p_e = 0.0;
    for (const auto& [label, count] : freq_a) {
        auto it = freq_b.find(label);
        if (it != freq_b.end()) p_e += (count / n) * (it->second / n);
    }
    if (p_e >= 1.0) return std::nullopt;
    return (p_o - p_e) / (1.0 - p_e);
}

}  // namespace distrace
