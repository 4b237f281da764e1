#include "distrace/metrics.hpp"

#include <cmath>
#include <limits>

#include "distrace/errors.hpp"

namespace distrace {

namespace {

/// Continued fraction for the incomplete beta function (modified Lentz).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;

    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                      b * std::log1p(-x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
    if (t == 0.0) return 0.5;
    double x = df / (df + t * t);
    double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, x);
    return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) throw DataError("student_t_quantile: p must be in (0, 1)");
    if (p == 0.5) return 0.0;
    bool upper = p > 0.5;
    double target = upper ? p : 1.0 - p;

    double lo = 0.0, hi = 1.0;
    while (student_t_cdf(hi, df) < target) {
        hi *= 2.0;
        if (hi > 1e12) break;
    }
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, df) < target)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-13 * std::max(1.0, hi)) break;
    }
    double q = 0.5 * (lo + hi);
    return upper ? q : -q;
}

MeanCi mean_ci(const std::vector<double>& values, double confidence) {
    if (values.empty()) throw DataError("mean_ci: empty input");
    MeanCi result;
    double sum = 0.0;
    for (double v : values) sum += v;
    size_t n = values.size();
    result.mean = sum / static_cast<double>(n);
    if (n == 1) return result;

    bool constant = true;
    for (double v : values)
        if (v != values.front()) {
            constant = false;
            break;
        }
    if (constant) {
        result.half_width = 0.0;  // exactly, not up to rounding
        return result;
    }
    double ss = 0.0;
    for (double v : values) {
        double d = v - result.mean;
        ss += d * d;
    }
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    double t = student_t_quantile((1.0 + confidence) / 2.0, static_cast<double>(n - 1));
    result.half_width = t * sd / std::sqrt(static_cast<double>(n));
    return result;
}

double proportional_match(const MatchOutcome& outcome, int gold_size) {
    if (gold_size <= 0) throw DataError("proportional_match: gold_size must be positive");
    return static_cast<double>(outcome.matched_count) / static_cast<double>(gold_size);
}

int count_correct(const MatchOutcome& outcome) { return outcome.correct_hits; }

int count_repetitions(const CandidateMultiset& candidates) {
    return candidates.total_multiplicity() - candidates.support_size();
}

MetricsReport campaign_report(
    const std::vector<std::pair<MatchOutcome, CandidateMultiset>>& outcomes, double confidence,
    int gold_size) {
    if (outcomes.empty()) throw DataError("campaign_report: no outcomes");
    std::vector<double> pm, cc, rep;
    pm.reserve(outcomes.size());
    cc.reserve(outcomes.size());
    rep.reserve(outcomes.size());
    for (const auto& [outcome, candidates] : outcomes) {
        pm.push_back(proportional_match(outcome, gold_size));
        cc.push_back(static_cast<double>(count_correct(outcome)));
        rep.push_back(static_cast<double>(count_repetitions(candidates)));
    }
    MetricsReport report;
    report.n = outcomes.size();
    report.confidence_level = confidence;
    report.proportional_match = mean_ci(pm, confidence);
    report.correct_count = mean_ci(cc, confidence);
    report.repetition_count = mean_ci(rep, confidence);
    return report;
}

}  // namespace distrace
