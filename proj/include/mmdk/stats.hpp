#pragma once

#include <span>
#include <string>
#include <vector>

namespace mmdk {

// 1-based ranks, ties receive the average of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

struct SpearmanResult {
    double rho = 0.0;
    double p_value = 1.0;  // two-sided, t approximation with n - 2 dof
};

SpearmanResult spearman(std::span<const double> y_true, std::span<const double> y_pred);

inline constexpr double kModerateAuc = 0.6;
inline constexpr double kStrongAuc = 0.7;

enum class AucBin { weak, moderate, strong };
std::string to_string(AucBin bin);

// weak < 0.6 <= moderate < 0.7 <= strong
AucBin bin_auc(double auc, double moderate = kModerateAuc, double strong = kStrongAuc);

struct AucResult {
    double auc = 0.5;
    AucBin bin = AucBin::weak;
};

// Mann-Whitney pair counting with half credit for tied scores. Labels are 0/1.
AucResult auc_roc(std::span<const int> labels, std::span<const double> scores);

enum class Alternative { greater, less, two_sided };

// Paired signed-rank test on d = a - b. Zero differences are dropped; exact
// null distribution up to 25 remaining pairs, normal approximation with
// continuity correction (and tie-corrected variance) above.
double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                            Alternative alternative = Alternative::greater);

// Pearson correlation of two equal-length samples (used on ranks).
double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace mmdk
