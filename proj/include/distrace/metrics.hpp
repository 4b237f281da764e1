#pragma once

#include <optional>
#include <string>
#include <vector>

#include "distrace/equivalence.hpp"
#include "distrace/generation.hpp"

namespace distrace {

/// Regularized incomplete beta function I_x(a, b), |error| < 1e-9.
double incomplete_beta(double a, double b, double x);

/// CDF of Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);

/// Inverse CDF (quantile); p in (0, 1).
double student_t_quantile(double p, double df);

struct MeanCi {
    double mean = 0.0;
    /// Absent when n = 1 (no degrees of freedom).
    std::optional<double> half_width;
};

/// Arithmetic mean with a two-sided t-distribution confidence half-width:
/// t_{(1+confidence)/2, n-1} * sample_sd / sqrt(n), sample_sd with the
/// (n-1) denominator. Throws DataError on empty input.
MeanCi mean_ci(const std::vector<double>& values, double confidence = 0.95);

/// matched_count / gold_size.
double proportional_match(const MatchOutcome& outcome, int gold_size = 3);

/// Total multiplicity of candidates equivalent to the correct answer.
int count_correct(const MatchOutcome& outcome);

/// Sum of multiplicities minus support size.
int count_repetitions(const CandidateMultiset& candidates);

struct MetricsReport {
    size_t n = 0;
    MeanCi proportional_match;
    MeanCi correct_count;
    MeanCi repetition_count;
    double confidence_level = 0.95;
};

MetricsReport campaign_report(
    const std::vector<std::pair<MatchOutcome, CandidateMultiset>>& outcomes,
    double confidence = 0.95, int gold_size = 3);

}  // namespace distrace
