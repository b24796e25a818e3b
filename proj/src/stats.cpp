#include "mmdk/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>
#include <tuple>

#include "mmdk/error.hpp"

namespace mmdk {

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t start = 0; start < n;) {
        std::size_t end = start + 1;
        while (end < n && values[order[end]] == values[order[start]]) ++end;
        const double rank = 0.5 * static_cast<double>(start + 1 + end);
        for (std::size_t k = start; k < end; ++k) ranks[order[k]] = rank;
        start = end;
    }
    return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("pearson: length mismatch");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) throw ValidationError("correlation undefined for constant input");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

SpearmanResult spearman(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size()) throw DimensionMismatch("spearman: length mismatch");
    if (y_true.size() < 3) throw ValidationError("spearman: need at least 3 observations");
    const auto ra = average_ranks(y_true);
    const auto rb = average_ranks(y_pred);
    SpearmanResult result;
    try {
        result.rho = pearson(ra, rb);
    } catch (const ValidationError&) {
        throw ValidationError("spearman: rho undefined for constant input");
    }
    const double dof = static_cast<double>(y_true.size()) - 2.0;
    const double denom = 1.0 - result.rho * result.rho;
    if (denom <= 0.0) {
        result.p_value = 0.0;
    } else {
        const double t = result.rho * std::sqrt(dof / denom);
        const boost::math::students_t dist(dof);
        result.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
    }
    return result;
}

std::string to_string(AucBin bin) {
    switch (bin) {
        case AucBin::weak: return "weak";
        case AucBin::moderate: return "moderate";
        case AucBin::strong: return "strong";
    }
    return "unknown";
}

AucBin bin_auc(double auc, double moderate, double strong) {
    if (auc >= strong) return AucBin::strong;
    if (auc >= moderate) return AucBin::moderate;
    return AucBin::weak;
}

AucResult auc_roc(std::span<const int> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) throw DimensionMismatch("auc_roc: length mismatch");
    double pos = 0.0;
    double neg = 0.0;
    for (int l : labels) {
        if (l == 1)
            pos += 1.0;
        else if (l == 0)
            neg += 1.0;
        else
            throw ValidationError("auc_roc: labels must be 0 or 1");
    }
    if (pos == 0.0 || neg == 0.0) throw ValidationError("auc_roc: both classes must be present");
    const auto ranks = average_ranks(scores);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == 1) rank_sum += ranks[i];
    AucResult result;
    result.auc = (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
    result.bin = bin_auc(result.auc);
    return result;
}

namespace {

// P(W+ >= w) and P(W+ <= w) under the exact null, ranks given as doubled integers.
std::pair<double, double> exact_tails(const std::vector<long>& doubled_ranks, long doubled_w) {
    const long total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), 0L);
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    long reach = 0;
    for (long r : doubled_ranks) {
        for (long s = reach; s >= 0; --s)
            if (counts[static_cast<std::size_t>(s)] != 0.0)
                counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
        reach += r;
    }
    const double all = std::ldexp(1.0, static_cast<int>(doubled_ranks.size()));
    double upper = 0.0;
    double lower = 0.0;
    for (long s = 0; s <= total; ++s) {
        if (s >= doubled_w) upper += counts[static_cast<std::size_t>(s)];
        if (s <= doubled_w) lower += counts[static_cast<std::size_t>(s)];
    }
    return {upper / all, lower / all};
}

}  // namespace

double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, Alternative alternative) {
    if (a.size() != b.size()) throw DimensionMismatch("wilcoxon: length mismatch");
    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (!std::isfinite(d)) throw ValidationError("wilcoxon: non-finite input");
        if (d != 0.0) diffs.push_back(d);
    }
    if (diffs.empty()) throw ValidationError("wilcoxon: all differences are zero");
    std::vector<double> magnitudes(diffs.size());
    std::transform(diffs.begin(), diffs.end(), magnitudes.begin(), [](double d) { return std::abs(d); });
    const auto ranks = average_ranks(magnitudes);
    double w_plus = 0.0;
    for (std::size_t i = 0; i < diffs.size(); ++i)
        if (diffs[i] > 0.0) w_plus += ranks[i];
    const std::size_t n = diffs.size();

    double p_greater = 0.0;
    double p_less = 0.0;
    if (n <= 25) {
        std::vector<long> doubled(n);
        for (std::size_t i = 0; i < n; ++i) doubled[i] = std::lround(2.0 * ranks[i]);
        std::tie(p_greater, p_less) = exact_tails(doubled, std::lround(2.0 * w_plus));
    } else {
        const double nn = static_cast<double>(n);
        const double mean = nn * (nn + 1.0) / 4.0;
        double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
        auto sorted = ranks;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t s = 0; s < n;) {
            std::size_t e = s + 1;
            while (e < n && sorted[e] == sorted[s]) ++e;
            const double t = static_cast<double>(e - s);
            var -= (t * t * t - t) / 48.0;
            s = e;
        }
        const double sd = std::sqrt(var);
        const boost::math::normal normal;
        p_greater = boost::math::cdf(boost::math::complement(normal, (w_plus - mean - 0.5) / sd));
        p_less = boost::math::cdf(normal, (w_plus - mean + 0.5) / sd);
    }
    switch (alternative) {
        case Alternative::greater: return p_greater;
        case Alternative::less: return p_less;
        case Alternative::two_sided: return std::min(1.0, 2.0 * std::min(p_greater, p_less));
    }
    return p_greater;
}

}  // namespace mmdk
