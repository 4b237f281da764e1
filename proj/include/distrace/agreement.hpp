#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "distrace/annotation.hpp"

namespace distrace {

/// Per-tag marker alignment between predicted and gold annotations of one
/// trace: matched pairs, predicted-only markers (insertions), gold-only
/// markers (deletions).
struct TagAlignment {
    struct Counts {
        int matched = 0;
        int inserted = 0;
        int deleted = 0;
    };
    struct Pair {
        StrategyTag tag;
        size_t predicted_offset;
        size_t gold_offset;
    };
    std::array<Counts, kTagCount> per_tag{};
    std::vector<Pair> pairs;

    Counts totals() const {
        Counts t;
        for (const auto& c : per_tag) {
            t.matched += c.matched;
            t.inserted += c.inserted;
            t.deleted += c.deleted;
        }
        return t;
    }
};

/// Pairs markers of the same tag whose end offsets differ by at most
/// `window`, maximizing the number of pairs and, among such matchings,
/// minimizing total offset distance. Both annotations must be over the same
/// original text (DataError otherwise).
TagAlignment align_annotations(const AnnotatedTrace& predicted, const AnnotatedTrace& gold,
                               size_t window = 30);

struct Prf {
    std::optional<double> precision;  // absent when nothing was predicted
    std::optional<double> recall;     // absent when there is no gold
};

struct TagPrf {
    std::array<Prf, kTagCount> per_tag;
    Prf macro;  // unweighted mean over tags with defined values
};

TagPrf tag_prf(const TagAlignment& alignment);

/// Standard TP/FP/FN precision/recall with true as the positive class.
Prf binary_prf(const std::vector<bool>& predicted, const std::vector<bool>& gold);

/// Cohen's kappa over two equal-length label sequences; absent when chance
/// agreement is 1 (degenerate marginals).
std::optional<double> cohen_kappa(const std::vector<std::string>& a,
                                  const std::vector<std::string>& b);

}  // namespace distrace
