#include "mmdk/survival.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "mmdk/error.hpp"

namespace mmdk {

void validate_records(std::span<const SurvivalRecord> records) {
    for (const auto& r : records)
        if (!(r.time > 0.0) || !std::isfinite(r.time))
            throw ValidationError("survival record '" + r.patient_id + "' has non-positive time");
}

std::vector<SurvivalRecord> censor_at(std::span<const SurvivalRecord> records, double horizon) {
    validate_records(records);
    std::vector<SurvivalRecord> out(records.begin(), records.end());
    for (auto& r : out) {
        if (r.time > horizon) {
            r.time = horizon;
            r.event = false;
        }
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> comparable_pairs(std::span<const SurvivalRecord> records) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].event) continue;
        for (std::size_t j = 0; j < records.size(); ++j)
            if (records[i].time < records[j].time) pairs.emplace_back(i, j);
    }
    return pairs;
}

SurvivalObjective::SurvivalObjective(const Eigen::MatrixXd& kernel, std::span<const SurvivalRecord> records,
                                     double alpha)
    : kernel_(kernel), pairs_(comparable_pairs(records)), alpha_(alpha) {
    if (kernel.rows() != kernel.cols() || static_cast<std::size_t>(kernel.rows()) != records.size())
        throw DimensionMismatch("survival: kernel is " + std::to_string(kernel.rows()) + "x" +
                                std::to_string(kernel.cols()) + " for " + std::to_string(records.size()) +
                                " records");
    if (!(alpha > 0.0)) throw ValidationError("survival: alpha must be positive");
    if (pairs_.empty()) throw ValidationError("survival: no comparable pairs (need an event before a later time)");
}

double SurvivalObjective::value(const Eigen::VectorXd& beta) const {
    const Eigen::VectorXd f = kernel_ * beta;
    double loss = 0.0;
    for (const auto& [i, j] : pairs_) {
        const double h = 1.0 - (f[static_cast<Eigen::Index>(i)] - f[static_cast<Eigen::Index>(j)]);
        if (h > 0.0) loss += h * h;
    }
    return 0.5 * alpha_ * beta.dot(f) + 0.5 * loss;
}

SurvivalObjective::Evaluation SurvivalObjective::evaluate(const Eigen::VectorXd& beta) const {
    Evaluation e;
    e.f = kernel_ * beta;
    e.rkhs = alpha_ * beta;
    double loss = 0.0;
    for (const auto& [i, j] : pairs_) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto jj = static_cast<Eigen::Index>(j);
        const double h = 1.0 - (e.f[ii] - e.f[jj]);
        if (h > 0.0) {
            loss += h * h;
            e.rkhs[ii] -= h;
            e.rkhs[jj] += h;
        }
    }
    e.gradient = kernel_ * e.rkhs;
    e.value = 0.5 * alpha_ * beta.dot(e.f) + 0.5 * loss;
    return e;
}

double SurvivalObjective::value_and_gradient(const Eigen::VectorXd& beta, Eigen::VectorXd& gradient) const {
    Evaluation e = evaluate(beta);
    gradient = std::move(e.gradient);
    return e.value;
}

DualModel fit_survival(const KernelMatrix& k_train, std::span<const SurvivalRecord> records, double alpha,
                       const SurvivalOptions& options, SurvivalFitInfo* info) {
    validate_records(records);
    if (k_train.ids.size() != records.size())
        throw DimensionMismatch("fit_survival: kernel id count does not match record count");
    const SurvivalObjective objective(k_train.values, records, alpha);
    const auto n = static_cast<Eigen::Index>(records.size());
    const double tolerance = options.tolerance_per_pair * static_cast<double>(objective.pair_count());

    // Limited-memory BFGS with Armijo backtracking, run in the K inner product
    // (equivalently on u = K^1/2 beta). In plain coordinates the Hessian carries
    // K twice and near-singular kernels stall the iteration. Every K-product the
    // two-loop recursion needs is a difference of f = K beta or of the gradient.
    struct Pair {
        Eigen::VectorXd s, ks, y, ky;  // step, K step, rkhs change, gradient change
        double rho = 0.0;
    };
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
    SurvivalObjective::Evaluation current = objective.evaluate(beta);
    std::deque<Pair> history;
    SurvivalFitInfo local;
    std::size_t iter = 0;
    for (;; ++iter) {
        const double gnorm = current.gradient.norm();
        if (gnorm <= tolerance) break;
        if (iter >= options.max_iterations)
            throw ConvergenceError("survival solver did not converge after " + std::to_string(iter) +
                                       " iterations (gradient norm " + std::to_string(gnorm) + ")",
                                   gnorm);

        Eigen::VectorXd q = current.rkhs, kq = current.gradient;
        std::vector<double> coef(history.size());
        for (std::size_t k = history.size(); k-- > 0;) {
            coef[k] = history[k].rho * history[k].s.dot(kq);
            q -= coef[k] * history[k].y;
            kq -= coef[k] * history[k].ky;
        }
        if (!history.empty()) {
            const Pair& last = history.back();
            q *= 1.0 / (last.rho * last.y.dot(last.ky));
        } else {
            q /= std::max(1.0, std::sqrt(std::max(0.0, current.rkhs.dot(current.gradient))));
        }
        for (std::size_t k = 0; k < history.size(); ++k) {
            const double b = history[k].rho * history[k].ky.dot(q);
            q += (coef[k] - b) * history[k].s;
        }
        Eigen::VectorXd dir = -q;
        double slope = current.gradient.dot(dir);
        if (!(slope < 0.0)) {
            history.clear();
            dir = -current.rkhs / std::max(1.0, std::sqrt(std::max(0.0, current.rkhs.dot(current.gradient))));
            slope = current.gradient.dot(dir);
            if (!(slope < 0.0)) dir = -current.gradient / gnorm, slope = -gnorm;
        }

        double step = 1.0;
        SurvivalObjective::Evaluation next;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            next = objective.evaluate(beta + step * dir);
            if (next.value <= current.value + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // No representable decrease left along the direction.
            if (history.empty())
                throw ConvergenceError("survival line search failed (gradient norm " + std::to_string(gnorm) + ")",
                                       gnorm);
            history.clear();
            continue;
        }
        Pair pair{step * dir, next.f - current.f, next.rkhs - current.rkhs, next.gradient - current.gradient, 0.0};
        const double sy = pair.s.dot(pair.ky);
        if (sy > 1e-12 * std::sqrt(pair.s.dot(pair.ks) * pair.y.dot(pair.ky))) {
            if (history.size() == options.history) history.pop_front();
            pair.rho = 1.0 / sy;
            history.push_back(std::move(pair));
        }
        beta += step * dir;
        current = std::move(next);
        local.objective_trace.push_back(current.value);
    }
    local.iterations = iter;
    local.gradient_norm = current.gradient.norm();
    local.objective = current.value;
    if (info) *info = std::move(local);

    DualModel model;
    model.task = Task::survival;
    model.train_ids = k_train.ids;
    model.coefficients = beta;
    model.hyperparams.alpha = alpha;
    model.hyperparams.gamma = k_train.meta.gamma;
    model.hyperparams.sigma = k_train.meta.sigma;
    model.kernel_meta = k_train.meta;
    return model;
}

}  // namespace mmdk
