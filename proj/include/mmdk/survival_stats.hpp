#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmdk/survival.hpp"

namespace mmdk {

// Over comparable pairs (time_i < time_j, event_i): 1 if risk_i > risk_j,
// 0.5 on tied risk, 0 otherwise. Throws if no pair is comparable.
double concordance_index(std::span<const SurvivalRecord> records, std::span<const double> risks);

/// Product-limit survival curve, one step per distinct observed time.
/// `at_risk[k]` counts subjects still under observation just before times[k];
/// the curve only drops where events[k] > 0.
struct KMCurve {
    std::string group;
    std::vector<double> times;
    std::vector<double> survival;
    std::vector<std::size_t> at_risk;
    std::vector<std::size_t> events;

    // Survival probability just after time t (1.0 before the first step).
    double at(double t) const;
};

KMCurve km_curve(std::span<const SurvivalRecord> records, const std::string& group = "all");

// One curve per distinct group label, in first-appearance order.
std::vector<KMCurve> km_curves(std::span<const SurvivalRecord> records, std::span<const std::string> groups);

struct LogrankResult {
    double statistic = 0.0;  // chi-square, 1 dof
    double p_value = 1.0;
};

// Two-group log-rank test; `in_second` marks membership of the second group.
LogrankResult logrank(std::span<const SurvivalRecord> records, std::span<const int> in_second);

// Cross-fold aggregation of per-fold p-values: 2 * median, capped at 1.
double aggregate_fold_pvalues(std::span<const double> p_values);

// 1 = high risk (score above the median of the training scores), 0 = low risk.
std::vector<int> split_by_training_median(std::span<const double> training_scores,
                                          std::span<const double> scores);

double median(std::vector<double> values);

}  // namespace mmdk
