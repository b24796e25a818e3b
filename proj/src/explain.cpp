#include "mmdk/explain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "mmdk/error.hpp"
#include "mmdk/parallel.hpp"

namespace mmdk {

std::vector<double> minmax_normalize(std::span<const double> values) {
    if (values.empty()) throw ValidationError("minmax_normalize: empty input");
    for (double v : values)
        if (!std::isfinite(v)) throw ValidationError("minmax_normalize: non-finite input");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double min = *lo;
    const double range = *hi - *lo;
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = range > 0.0 ? (values[i] - min) / range : 0.5;
    return out;
}

KernelMeta PatchExplainer::expected_meta(const PatchKernelParams& params, double gamma) {
    DistanceMatrix probe;
    probe.sigma = params.sigma;
    probe.estimator = kBiasedEstimator;
    probe.provenance = distance_provenance(params.sigma, probe.estimator);
    probe.values = Eigen::MatrixXd::Zero(1, 1);
    probe.ids = {"probe"};
    return to_kernel(probe, gamma).meta;
}

PatchExplainer::PatchExplainer(const DualModel& model, std::span<const EmbeddingBag> train_bags,
                               const PatchKernelParams& params, double gamma, unsigned threads)
    : model_(model), params_(params), gamma_(gamma), threads_(threads) {
    params.validate();
    require_meta(model, expected_meta(params, gamma));
    std::map<std::string, const EmbeddingBag*> by_id;
    for (const auto& bag : train_bags) by_id.emplace(bag.id, &bag);
    for (const auto& id : model.train_ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw ValidationError("training bag '" + id + "' not supplied to the explainer");
        train_.push_back(it->second);
    }
    train_self_.resize(train_.size());
    parallel_for(train_.size(), threads_, [&](std::size_t t) { train_self_[t] = self_sum(*train_[t], params_); });
}

double PatchExplainer::score(const EmbeddingBag& bag) const {
    double f = model_.bias.value_or(0.0);
    for (std::size_t t = 0; t < train_.size(); ++t) {
        const double d = mmd_sq(bag, *train_[t], params_);
        f += model_.coefficients[static_cast<Eigen::Index>(t)] * std::exp(-gamma_ * d);
    }
    return f;
}

SensitivityMap PatchExplainer::explain(const EmbeddingBag& query) const {
    validate_bag(query);
    const std::size_t n = query.size();
    if (n < 2) throw ValidationError("explain: bag '" + query.id + "' has a single element");
    const std::size_t T = train_.size();
    if (T > 0 && query.dim() != train_.front()->dim())
        throw DimensionMismatch("explain: query dimension differs from the training bags");

    const std::vector<double> self_rows = cross_row_sums(query.vectors, query.vectors, params_);
    const double self_total = ordered_sum(self_rows);

    // cross[t][j] = c_jt
    std::vector<std::vector<double>> cross(T);
    std::vector<double> cross_total(T);
    parallel_for(T, threads_, [&](std::size_t t) {
        cross[t] = cross_row_sums(query.vectors, train_[t]->vectors, params_);
        cross_total[t] = ordered_sum(cross[t]);
    });

    const double bias = model_.bias.value_or(0.0);
    auto evaluate = [&](double self, std::size_t size, auto&& cross_of) {
        double f = bias;
        for (std::size_t t = 0; t < T; ++t) {
            const double d = mmd_from_sums(self, size, train_self_[t], train_[t]->size(), cross_of(t));
            f += model_.coefficients[static_cast<Eigen::Index>(t)] * std::exp(-gamma_ * d);
        }
        return f;
    };

    SensitivityMap map;
    map.bag_id = query.id;
    map.baseline = evaluate(self_total, n, [&](std::size_t t) { return cross_total[t]; });
    map.deltas.resize(n);
    parallel_for(n, threads_, [&](std::size_t j) {
        const auto x = query.vectors.row(static_cast<Eigen::Index>(j)).transpose();
        const double self_diag = gauss_kernel(x, x, params_.sigma);
        const double self = self_total - 2.0 * self_rows[j] + self_diag;
        const double f = evaluate(self, n - 1, [&](std::size_t t) { return cross_total[t] - cross[t][j]; });
        map.deltas[j] = f - map.baseline;
    });
    map.normalized = minmax_normalize(map.deltas);
    return map;
}

SensitivityMap patch_sensitivity(const DualModel& model, std::span<const EmbeddingBag> train_bags,
                                 const EmbeddingBag& query, const PatchKernelParams& params, double gamma,
                                 unsigned threads) {
    return PatchExplainer(model, train_bags, params, gamma, threads).explain(query);
}

std::vector<PatchCandidate> select_extreme_patches(std::span<const EmbeddingBag> bags,
                                                   std::span<const SensitivityMap> maps, Extreme extreme,
                                                   std::uint64_t seed) {
    if (bags.size() != maps.size()) throw DimensionMismatch("select_extreme_patches: one map per bag required");
    struct Entry {
        std::size_t bag;
        std::size_t row;
    };
    std::vector<std::string> order;
    std::map<std::string, std::vector<Entry>> best;
    std::map<std::string, double> best_score;
    for (std::size_t b = 0; b < bags.size(); ++b) {
        if (maps[b].deltas.size() != bags[b].size())
            throw DimensionMismatch("select_extreme_patches: map for '" + bags[b].id + "' has wrong length");
        const auto& patient = bags[b].patient_id;
        if (!best.count(patient)) order.push_back(patient);
        for (std::size_t j = 0; j < bags[b].size(); ++j) {
            const double s = maps[b].deltas[j];
            auto it = best_score.find(patient);
            const bool better = it == best_score.end() || (extreme == Extreme::highest ? s > it->second : s < it->second);
            if (better) {
                best_score[patient] = s;
                best[patient] = {{b, j}};
            } else if (s == it->second) {
                best[patient].push_back({b, j});
            }
        }
    }
    std::mt19937_64 rng(seed);
    std::vector<PatchCandidate> out;
    for (const auto& patient : order) {
        const auto& ties = best.at(patient);
        std::size_t pick = 0;
        if (ties.size() > 1) pick = std::uniform_int_distribution<std::size_t>(0, ties.size() - 1)(rng);
        const auto [b, j] = ties[pick];
        PatchCandidate c;
        c.patch_id = bags[b].id + "#" + std::to_string(j);
        c.patient_id = patient;
        c.score = maps[b].deltas[j];
        c.vector = bags[b].vectors.row(static_cast<Eigen::Index>(j)).transpose();
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace mmdk
