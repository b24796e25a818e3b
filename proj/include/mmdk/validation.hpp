#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mmdk/dual_model.hpp"
#include "mmdk/survival.hpp"

namespace mmdk {

/// How a fold obtains gamma: a multiple of the median rule evaluated on the
/// fold's training distances, or a fixed value.
struct GammaRule {
    bool median = true;
    double value = 1.0;

    static GammaRule median_rule(double factor = 1.0) { return {true, factor}; }
    static GammaRule fixed(double gamma) { return {false, gamma}; }
    bool operator==(const GammaRule&) const = default;
};

struct Candidate {
    double C = 1.0;
    double epsilon = 0.1;
    double alpha = kDefaultAlpha;
    GammaRule gamma;

    bool operator==(const Candidate&) const = default;
};

using Grid = std::vector<Candidate>;

// svr: C x epsilon x {median, 2 x median}; svc: C x {median, 2 x median};
// survival: the single default point (alpha = 0.0625, median rule).
Grid default_grid(Task task);

// 13 log-spaced alphas from 2^-12 to 2^-3 = 0.125.
std::vector<double> alpha_search_grid();
Grid alpha_grid(const std::vector<double>& alphas, GammaRule gamma = {});

enum class Objective {
    negative_metric,             // -metric
    negative_metric_plus_alpha,  // -metric + alpha
};

/// Labels aligned with the ids of the kernel source. `targets` holds the
/// regression target (svr), the class in {-1, +1} (svc) or the time (survival).
struct TaskData {
    Task task = Task::svr;
    std::vector<std::string> ids;
    std::vector<std::string> groups;  // patient ids
    std::vector<double> targets;
    std::vector<int> events;  // survival only

    std::size_t size() const { return ids.size(); }
    void validate() const;
    std::vector<SurvivalRecord> records(std::span<const std::size_t> indices) const;
};

/// Either a distance matrix (gamma chosen per fold) or a ready kernel.
class KernelSource {
public:
    explicit KernelSource(DistanceMatrix distances) : source_(std::move(distances)) {}
    explicit KernelSource(KernelMatrix kernel) : source_(std::move(kernel)) {}

    bool has_distances() const { return std::holds_alternative<DistanceMatrix>(source_); }
    const std::vector<std::string>& ids() const;

    // Gamma for a rule, evaluated on the training submatrix. Nullopt for fixed kernels.
    std::optional<double> resolve_gamma(const GammaRule& rule, std::span<const std::size_t> train) const;
    // Full kernel at the resolved gamma (ignored for fixed kernels).
    KernelMatrix kernel(std::optional<double> gamma) const;

private:
    std::variant<DistanceMatrix, KernelMatrix> source_;
};

// Name of the per-task metric: SCC (svr), AUC (svc), C-index (survival).
std::string metric_name(Task task);

// Metric of `scores` against the labels at `indices`.
double evaluate_metric(const TaskData& data, std::span<const std::size_t> indices, std::span<const double> scores);

// Fits one model on `train` from a full kernel.
DualModel fit_model(const KernelMatrix& kernel, const TaskData& data, std::span<const std::size_t> train,
                    const Candidate& candidate);

// Scores `queries` with a model fitted on the same full kernel.
std::vector<double> score(const DualModel& model, const KernelMatrix& kernel, std::span<const std::size_t> train,
                          std::span<const std::size_t> queries);

struct TuneResult {
    Candidate best;
    double objective = 0.0;
    std::vector<std::optional<double>> objectives;  // per grid point, nullopt = failed to train/evaluate
};

/// Fits every candidate on `train`, scores it on `validation` and returns the
/// argmin of the objective. Ties go to the more regularized candidate
/// (larger alpha, then smaller C, then larger epsilon, then smaller gamma).
/// `gamma_basis` are the indices the median rule is evaluated on.
TuneResult tune(const KernelSource& source, const TaskData& data, std::span<const std::size_t> train,
                std::span<const std::size_t> validation, const Grid& grid, Objective objective,
                std::span<const std::size_t> gamma_basis);

// Test index sets per fold. Whole groups go to one fold; with strata, groups
// are dealt round-robin per stratum after a seeded shuffle.
std::vector<std::vector<std::size_t>> assign_folds(std::span<const std::string> groups,
                                                   std::span<const std::string> strata, std::size_t folds,
                                                   std::uint64_t seed);

// Splits `indices` by group into (train, validation) with about `val_frac` of
// the groups of each stratum in validation.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(
    std::span<const std::size_t> indices, std::span<const std::string> groups, std::span<const std::string> strata,
    double val_frac, std::uint64_t seed);

struct CvOptions {
    std::size_t folds = 5;
    double val_frac = 0.1;
    bool stratify = true;  // svc by class, survival by event; ignored for svr
    bool group_by_patient = true;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    Grid grid;  // empty = default_grid(task)
    std::optional<Objective> objective;
};

struct FoldResult {
    std::size_t fold = 0;
    std::vector<std::string> test_ids;
    std::vector<double> predictions;
    double metric = 0.0;
    Candidate chosen;
    std::optional<double> gamma;
    std::optional<double> logrank_p;  // survival: high vs low risk split at the training median
};

struct FoldResults {
    std::string metric;
    std::vector<FoldResult> folds;
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation across folds
    std::optional<double> aggregated_logrank_p;
};

FoldResults cross_validate(const KernelSource& source, const TaskData& data, const CvOptions& options);

}  // namespace mmdk
