#include "mmdk/validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "mmdk/error.hpp"
#include "mmdk/parallel.hpp"
#include "mmdk/stats.hpp"
#include "mmdk/survival_stats.hpp"
#include "mmdk/svm.hpp"

namespace mmdk {

Grid default_grid(Task task) {
    Grid grid;
    const std::vector<GammaRule> gammas = {GammaRule::median_rule(1.0), GammaRule::median_rule(2.0)};
    switch (task) {
        case Task::svr:
            for (double C : {0.1, 1.0, 10.0, 100.0})
                for (double eps : {0.01, 0.1})
                    for (const auto& g : gammas) grid.push_back({C, eps, kDefaultAlpha, g});
            break;
        case Task::svc:
            for (double C : {0.1, 1.0, 10.0, 100.0})
                for (const auto& g : gammas) grid.push_back({C, 0.0, kDefaultAlpha, g});
            break;
        case Task::survival: grid.push_back({1.0, 0.0, kDefaultAlpha, GammaRule::median_rule(1.0)}); break;
    }
    return grid;
}

std::vector<double> alpha_search_grid() {
    // Exponents -12, -11.25, ..., -3.
    std::vector<double> alphas;
    for (int k = 0; k < 13; ++k) alphas.push_back(std::exp2(-12.0 + 0.75 * k));
    return alphas;
}

Grid alpha_grid(const std::vector<double>& alphas, GammaRule gamma) {
    Grid grid;
    for (double a : alphas) grid.push_back({1.0, 0.0, a, gamma});
    return grid;
}

void TaskData::validate() const {
    const std::size_t n = ids.size();
    if (groups.size() != n || targets.size() != n)
        throw ValidationError("task data: ids, groups and targets differ in length");
    if (task == Task::survival && events.size() != n)
        throw ValidationError("task data: survival task needs one event flag per sample");
    for (double t : targets)
        if (!std::isfinite(t)) throw ValidationError("task data: non-finite target");
    if (task == Task::svc)
        for (double t : targets)
            if (t != 1.0 && t != -1.0) throw ValidationError("task data: svc targets must be -1 or +1");
    if (task == Task::survival) validate_records(records({}));
}

std::vector<SurvivalRecord> TaskData::records(std::span<const std::size_t> indices) const {
    std::vector<SurvivalRecord> out;
    auto add = [&](std::size_t i) { out.push_back({groups[i], targets[i], events.at(i) != 0}); };
    if (indices.empty())
        for (std::size_t i = 0; i < ids.size(); ++i) add(i);
    else
        for (auto i : indices) add(i);
    return out;
}

const std::vector<std::string>& KernelSource::ids() const {
    return std::visit([](const auto& m) -> const std::vector<std::string>& { return m.ids; }, source_);
}

std::optional<double> KernelSource::resolve_gamma(const GammaRule& rule, std::span<const std::size_t> train) const {
    if (!has_distances()) return std::nullopt;
    if (!rule.median) return rule.value;
    return rule.value * median_gamma(subset(std::get<DistanceMatrix>(source_), train));
}

KernelMatrix KernelSource::kernel(std::optional<double> gamma) const {
    if (!has_distances()) return std::get<KernelMatrix>(source_);
    if (!gamma) throw ValidationError("kernel source: gamma required to transform distances");
    return to_kernel(std::get<DistanceMatrix>(source_), *gamma);
}

std::string metric_name(Task task) {
    switch (task) {
        case Task::svr: return "SCC";
        case Task::svc: return "AUC";
        case Task::survival: return "C-index";
    }
    return "metric";
}

double evaluate_metric(const TaskData& data, std::span<const std::size_t> indices, std::span<const double> scores) {
    if (indices.size() != scores.size()) throw DimensionMismatch("evaluate_metric: length mismatch");
    switch (data.task) {
        case Task::svr: {
            std::vector<double> truth;
            for (auto i : indices) truth.push_back(data.targets[i]);
            return spearman(truth, scores).rho;
        }
        case Task::svc: {
            std::vector<int> labels;
            for (auto i : indices) labels.push_back(data.targets[i] > 0 ? 1 : 0);
            return auc_roc(labels, scores).auc;
        }
        case Task::survival: return concordance_index(data.records(indices), scores);
    }
    throw ValidationError("evaluate_metric: unknown task");
}

DualModel fit_model(const KernelMatrix& kernel, const TaskData& data, std::span<const std::size_t> train,
                    const Candidate& candidate) {
    const KernelMatrix block = subset(kernel, train);
    switch (data.task) {
        case Task::svr: {
            std::vector<double> y;
            for (auto i : train) y.push_back(data.targets[i]);
            return fit_svr(block, y, candidate.C, candidate.epsilon);
        }
        case Task::svc: {
            std::vector<int> y;
            for (auto i : train) y.push_back(data.targets[i] > 0 ? 1 : -1);
            return fit_svc(block, y, candidate.C);
        }
        case Task::survival: return fit_survival(block, data.records(train), candidate.alpha);
    }
    throw ValidationError("fit_model: unknown task");
}

std::vector<double> score(const DualModel& model, const KernelMatrix& kernel, std::span<const std::size_t> train,
                          std::span<const std::size_t> queries) {
    const Eigen::VectorXd s = predict(model, submatrix(kernel.values, train, queries));
    return std::vector<double>(s.data(), s.data() + s.size());
}

namespace {

double objective_value(Objective objective, double metric, const Candidate& c) {
    return objective == Objective::negative_metric_plus_alpha ? -metric + c.alpha : -metric;
}

double gamma_key(const GammaRule& g) { return g.value; }

// True if a is preferred over b at equal objective.
bool more_regularized(const Candidate& a, const Candidate& b) {
    if (a.alpha != b.alpha) return a.alpha > b.alpha;
    if (a.C != b.C) return a.C < b.C;
    if (a.epsilon != b.epsilon) return a.epsilon > b.epsilon;
    return gamma_key(a.gamma) < gamma_key(b.gamma);
}

std::vector<std::string> strata_for(const TaskData& data, bool stratify) {
    if (!stratify || data.task == Task::svr) return {};
    std::vector<std::string> strata;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.task == Task::svc)
            strata.push_back(data.targets[i] > 0 ? "+1" : "-1");
        else
            strata.push_back(data.events[i] ? "event" : "censored");
    }
    return strata;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Groups in first-appearance order, each with its member indices and stratum.
struct GroupInfo {
    std::string stratum;
    std::vector<std::size_t> members;
};

std::vector<GroupInfo> collect_groups(std::span<const std::size_t> indices, std::span<const std::string> groups,
                                      std::span<const std::string> strata) {
    std::vector<GroupInfo> out;
    std::map<std::string, std::size_t> slot;
    for (auto i : indices) {
        auto [it, inserted] = slot.try_emplace(groups[i], out.size());
        if (inserted) out.push_back({strata.empty() ? std::string() : strata[i], {}});
        out[it->second].members.push_back(i);
    }
    return out;
}

}  // namespace

TuneResult tune(const KernelSource& source, const TaskData& data, std::span<const std::size_t> train,
                std::span<const std::size_t> validation, const Grid& grid, Objective objective,
                std::span<const std::size_t> gamma_basis) {
    if (grid.empty()) throw ValidationError("tune: empty grid");
    TuneResult result;
    result.objectives.resize(grid.size());
    std::optional<std::size_t> best;
    std::string last_error;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const Candidate& c = grid[g];
        try {
            const auto gamma = source.resolve_gamma(c.gamma, gamma_basis);
            const KernelMatrix kernel = source.kernel(gamma);
            const DualModel model = fit_model(kernel, data, train, c);
            const auto scores = score(model, kernel, train, validation);
            const double value = objective_value(objective, evaluate_metric(data, validation, scores), c);
            if (!std::isfinite(value)) continue;
            result.objectives[g] = value;
            if (!best || value < result.objective ||
                (value == result.objective && more_regularized(c, grid[*best]))) {
                best = g;
                result.objective = value;
            }
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    if (!best) throw Error("tune: every candidate failed to train or evaluate (last error: " + last_error + ")");
    result.best = grid[*best];
    return result;
}

std::vector<std::vector<std::size_t>> assign_folds(std::span<const std::string> groups,
                                                   std::span<const std::string> strata, std::size_t folds,
                                                   std::uint64_t seed) {
    if (folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
    std::vector<std::size_t> all(groups.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto infos = collect_groups(all, groups, strata);

    std::map<std::string, std::vector<std::size_t>> by_stratum;
    for (std::size_t g = 0; g < infos.size(); ++g) by_stratum[infos[g].stratum].push_back(g);
    for (const auto& [stratum, members] : by_stratum)
        if (members.size() < folds)
            throw ValidationError("stratification infeasible: class '" + (stratum.empty() ? "all" : stratum) +
                                  "' has " + std::to_string(members.size()) + " groups for " +
                                  std::to_string(folds) + " folds");

    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> out(folds);
    std::size_t next = 0;
    for (auto& [stratum, members] : by_stratum) {
        std::shuffle(members.begin(), members.end(), rng);
        for (auto g : members) {
            auto& fold = out[next % folds];
            fold.insert(fold.end(), infos[g].members.begin(), infos[g].members.end());
            ++next;
        }
    }
    for (auto& fold : out) std::sort(fold.begin(), fold.end());
    return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(
    std::span<const std::size_t> indices, std::span<const std::string> groups, std::span<const std::string> strata,
    double val_frac, std::uint64_t seed) {
    if (!(val_frac >= 0.0 && val_frac < 1.0)) throw ValidationError("validation fraction must be in [0, 1)");
    const auto infos = collect_groups(indices, groups, strata);
    std::map<std::string, std::vector<std::size_t>> by_stratum;
    for (std::size_t g = 0; g < infos.size(); ++g) by_stratum[infos[g].stratum].push_back(g);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    for (auto& [stratum, members] : by_stratum) {
        std::shuffle(members.begin(), members.end(), rng);
        auto take = static_cast<std::size_t>(std::lround(val_frac * static_cast<double>(members.size())));
        if (val_frac > 0.0 && take == 0 && members.size() >= 2) take = 1;
        if (take >= members.size()) take = members.size() - 1;
        for (std::size_t k = 0; k < members.size(); ++k) {
            auto& dst = k < take ? val : train;
            dst.insert(dst.end(), infos[members[k]].members.begin(), infos[members[k]].members.end());
        }
    }
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {train, val};
}

FoldResults cross_validate(const KernelSource& source, const TaskData& data, const CvOptions& options) {
    data.validate();
    if (source.ids() != data.ids) throw ValidationError("cross_validate: kernel ids and task ids differ");
    const Grid grid = options.grid.empty() ? default_grid(data.task) : options.grid;
    const Objective objective = options.objective.value_or(
        data.task == Task::survival ? Objective::negative_metric_plus_alpha : Objective::negative_metric);

    std::vector<std::string> groups = data.groups;
    if (!options.group_by_patient) groups = data.ids;
    const auto strata = strata_for(data, options.stratify);
    const auto folds = assign_folds(groups, strata, options.folds, options.seed);

    std::vector<std::size_t> everything(data.size());
    std::iota(everything.begin(), everything.end(), std::size_t{0});

    FoldResults results;
    results.metric = metric_name(data.task);
    results.folds.resize(folds.size());
    parallel_for(folds.size(), options.threads, [&](std::size_t f) {
        const auto& test = folds[f];
        std::vector<std::size_t> train;
        std::set_difference(everything.begin(), everything.end(), test.begin(), test.end(),
                            std::back_inserter(train));

        Candidate chosen = grid.front();
        if (grid.size() > 1) {
            if (options.val_frac <= 0.0) throw ValidationError("tuning over a grid needs a validation fraction > 0");
            const auto [inner, val] = split_validation(train, groups, strata, options.val_frac,
                                                       mix_seed(options.seed, f));
            if (val.empty()) throw ValidationError("fold " + std::to_string(f) + ": validation split is empty");
            chosen = tune(source, data, inner, val, grid, objective, train).best;
        }
        FoldResult& out = results.folds[f];
        out.fold = f;
        out.chosen = chosen;
        out.gamma = source.resolve_gamma(chosen.gamma, train);
        const KernelMatrix kernel = source.kernel(out.gamma);
        const DualModel model = fit_model(kernel, data, train, chosen);
        out.predictions = score(model, kernel, train, test);
        for (auto i : test) out.test_ids.push_back(data.ids[i]);
        out.metric = evaluate_metric(data, test, out.predictions);
        if (data.task == Task::survival) {
            try {
                const auto train_scores = score(model, kernel, train, train);
                const auto high = split_by_training_median(train_scores, out.predictions);
                out.logrank_p = logrank(data.records(test), high).p_value;
            } catch (const ValidationError&) {
                out.logrank_p.reset();
            }
        }
    });

    double sum = 0.0;
    for (const auto& f : results.folds) sum += f.metric;
    const double k = static_cast<double>(results.folds.size());
    results.mean = sum / k;
    double ss = 0.0;
    for (const auto& f : results.folds) ss += (f.metric - results.mean) * (f.metric - results.mean);
    results.sd = results.folds.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
    if (data.task == Task::survival) {
        std::vector<double> ps;
        for (const auto& f : results.folds)
            if (f.logrank_p) ps.push_back(*f.logrank_p);
        if (!ps.empty()) results.aggregated_logrank_p = aggregate_fold_pvalues(ps);
    }
    return results;
}

}  // namespace mmdk
