#include "mmdk/survival_stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <map>
#include <numeric>

#include "mmdk/error.hpp"

namespace mmdk {

double concordance_index(std::span<const SurvivalRecord> records, std::span<const double> risks) {
    if (records.size() != risks.size()) throw DimensionMismatch("concordance_index: length mismatch");
    double score = 0.0;
    std::size_t comparable = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].event) continue;
        for (std::size_t j = 0; j < records.size(); ++j) {
            if (!(records[i].time < records[j].time)) continue;
            ++comparable;
            if (risks[i] > risks[j])
                score += 1.0;
            else if (risks[i] == risks[j])
                score += 0.5;
        }
    }
    if (comparable == 0) throw ValidationError("concordance_index: no comparable pairs");
    return score / static_cast<double>(comparable);
}

double KMCurve::at(double t) const {
    double s = 1.0;
    for (std::size_t k = 0; k < times.size() && times[k] <= t; ++k) s = survival[k];
    return s;
}

KMCurve km_curve(std::span<const SurvivalRecord> records, const std::string& group) {
    if (records.empty()) throw ValidationError("km_curve: group '" + group + "' is empty");
    std::map<double, std::pair<std::size_t, std::size_t>> at_time;  // time -> (events, removed)
    for (const auto& r : records) {
        auto& slot = at_time[r.time];
        if (r.event) ++slot.first;
        ++slot.second;
    }
    KMCurve curve;
    curve.group = group;
    std::size_t at_risk = records.size();
    double s = 1.0;
    for (const auto& [t, counts] : at_time) {
        const auto [events, removed] = counts;
        if (events > 0) s *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
        curve.times.push_back(t);
        curve.survival.push_back(s);
        curve.at_risk.push_back(at_risk);
        curve.events.push_back(events);
        at_risk -= removed;
    }
    return curve;
}

std::vector<KMCurve> km_curves(std::span<const SurvivalRecord> records, std::span<const std::string> groups) {
    if (records.size() != groups.size()) throw DimensionMismatch("km_curves: length mismatch");
    std::vector<std::string> order;
    std::map<std::string, std::vector<SurvivalRecord>> members;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto [it, inserted] = members.try_emplace(groups[i]);
        if (inserted) order.push_back(groups[i]);
        it->second.push_back(records[i]);
    }
    std::vector<KMCurve> curves;
    for (const auto& g : order) curves.push_back(km_curve(members.at(g), g));
    return curves;
}

LogrankResult logrank(std::span<const SurvivalRecord> records, std::span<const int> in_second) {
    if (records.size() != in_second.size()) throw DimensionMismatch("logrank: length mismatch");
    std::size_t n1 = 0;
    std::size_t events = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (in_second[i]) ++n1;
        if (records[i].event) ++events;
    }
    if (n1 == 0 || n1 == records.size()) throw ValidationError("logrank: both groups must be nonempty");
    if (events == 0) throw ValidationError("logrank: no events");

    struct Slot {
        double deaths = 0, deaths1 = 0, removed = 0, removed1 = 0;
    };
    std::map<double, Slot> at_time;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& slot = at_time[records[i].time];
        const bool second = in_second[i] != 0;
        slot.removed += 1;
        if (second) slot.removed1 += 1;
        if (records[i].event) {
            slot.deaths += 1;
            if (second) slot.deaths1 += 1;
        }
    }
    double risk = static_cast<double>(records.size());
    double risk1 = static_cast<double>(n1);
    double observed_minus_expected = 0.0;
    double variance = 0.0;
    for (const auto& [t, slot] : at_time) {
        if (slot.deaths > 0) {
            const double frac = risk1 / risk;
            observed_minus_expected += slot.deaths1 - slot.deaths * frac;
            if (risk > 1.0) variance += slot.deaths * frac * (1.0 - frac) * (risk - slot.deaths) / (risk - 1.0);
        }
        risk -= slot.removed;
        risk1 -= slot.removed1;
    }
    LogrankResult result;
    if (variance <= 0.0) return result;
    result.statistic = observed_minus_expected * observed_minus_expected / variance;
    const boost::math::chi_squared dist(1.0);
    result.p_value = boost::math::cdf(boost::math::complement(dist, result.statistic));
    return result;
}

double median(std::vector<double> values) {
    if (values.empty()) throw ValidationError("median of empty sequence");
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

double aggregate_fold_pvalues(std::span<const double> p_values) {
    return std::min(1.0, 2.0 * median(std::vector<double>(p_values.begin(), p_values.end())));
}

std::vector<int> split_by_training_median(std::span<const double> training_scores, std::span<const double> scores) {
    const double threshold = median(std::vector<double>(training_scores.begin(), training_scores.end()));
    std::vector<int> groups(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) groups[i] = scores[i] > threshold ? 1 : 0;
    return groups;
}

}  // namespace mmdk
