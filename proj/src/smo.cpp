#include "mmdk/smo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mmdk/error.hpp"

namespace mmdk {

namespace {

constexpr double kTau = 1e-12;

class Solver {
public:
    Solver(const SmoProblem& problem, const SmoOptions& options) : prob_(problem), opt_(options) {
        n_ = prob_.y.size();
        alpha_.assign(n_, 0.0);
        grad_ = prob_.p;
        diag_.resize(n_);
        for (std::size_t t = 0; t < n_; ++t) diag_[t] = q(t, t);
    }

    SmoSolution run() {
        const std::size_t cap =
            opt_.max_iterations ? opt_.max_iterations : std::max<std::size_t>(10'000'000, 100 * n_);
        SmoSolution sol;
        double objective = 0.0;
        std::size_t iter = 0;
        double gap = 0.0;
        for (;;) {
            std::size_t i = 0;
            std::size_t j = 0;
            gap = select(i, j);
            if (gap <= opt_.tolerance) break;
            if (iter >= cap)
                throw ConvergenceError("SMO did not converge after " + std::to_string(cap) +
                                           " iterations (KKT gap " + std::to_string(gap) + ")",
                                       gap);
            objective += update(i, j);
            if (opt_.record_objective) sol.objective_trace.push_back(objective);
            ++iter;
        }
        sol.alpha = alpha_;
        sol.gradient = grad_;
        sol.rho = rho();
        sol.kkt_gap = std::max(gap, 0.0);
        sol.iterations = iter;
        double obj = 0.0;
        for (std::size_t t = 0; t < n_; ++t) obj += alpha_[t] * (grad_[t] + prob_.p[t]);
        sol.objective = 0.5 * obj;
        return sol;
    }

private:
    double q(std::size_t s, std::size_t t) const {
        return prob_.y[s] * prob_.y[t] *
               (*prob_.kernel)(static_cast<Eigen::Index>(prob_.index[s]), static_cast<Eigen::Index>(prob_.index[t]));
    }

    bool upper_bound(std::size_t t) const { return alpha_[t] >= prob_.C; }
    bool lower_bound(std::size_t t) const { return alpha_[t] <= 0.0; }
    bool in_up(std::size_t t) const { return prob_.y[t] > 0 ? !upper_bound(t) : !lower_bound(t); }
    bool in_low(std::size_t t) const { return prob_.y[t] > 0 ? !lower_bound(t) : !upper_bound(t); }

    // Returns the KKT gap m(a) - M(a); fills the working pair.
    double select(std::size_t& out_i, std::size_t& out_j) const {
        double gmax = -std::numeric_limits<double>::infinity();
        double gmax2 = -std::numeric_limits<double>::infinity();
        std::size_t best_i = n_;
        for (std::size_t t = 0; t < n_; ++t) {
            if (!in_up(t)) continue;
            const double v = -prob_.y[t] * grad_[t];
            if (v > gmax) {
                gmax = v;
                best_i = t;
            }
        }
        std::size_t best_j = n_;
        double best_gain = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n_; ++t) {
            if (!in_low(t)) continue;
            const double v = prob_.y[t] * grad_[t];
            gmax2 = std::max(gmax2, v);
            if (best_i == n_) continue;
            const double b = gmax + v;
            if (b > 0.0) {
                double a = diag_[best_i] + diag_[t] - 2.0 * prob_.y[best_i] * prob_.y[t] * q(best_i, t);
                if (a <= 0.0) a = kTau;
                const double gain = -(b * b) / a;
                if (gain < best_gain) {
                    best_gain = gain;
                    best_j = t;
                }
            }
        }
        out_i = best_i;
        out_j = best_j;
        if (best_i == n_ || best_j == n_) return 0.0;
        return gmax + gmax2;
    }

    // Two-variable analytic update; returns the objective change.
    double update(std::size_t i, std::size_t j) {
        const double C = prob_.C;
        const double qij = q(i, j);
        const double old_ai = alpha_[i];
        const double old_aj = alpha_[j];
        double& ai = alpha_[i];
        double& aj = alpha_[j];
        if (prob_.y[i] != prob_.y[j]) {
            double quad = diag_[i] + diag_[j] + 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad_[i] - grad_[j]) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) {
                    aj = 0.0;
                    ai = diff;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = -diff;
            }
            if (diff > 0.0) {
                if (ai > C) {
                    ai = C;
                    aj = C - diff;
                }
            } else if (aj > C) {
                aj = C;
                ai = C + diff;
            }
        } else {
            double quad = diag_[i] + diag_[j] - 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad_[i] - grad_[j]) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > C) {
                if (ai > C) {
                    ai = C;
                    aj = sum - C;
                }
            } else if (aj < 0.0) {
                aj = 0.0;
                ai = sum;
            }
            if (sum > C) {
                if (aj > C) {
                    aj = C;
                    ai = sum - C;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = sum;
            }
        }
        const double di = ai - old_ai;
        const double dj = aj - old_aj;
        const double change =
            grad_[i] * di + grad_[j] * dj + 0.5 * (diag_[i] * di * di + diag_[j] * dj * dj) + qij * di * dj;
        for (std::size_t t = 0; t < n_; ++t) grad_[t] += q(t, i) * di + q(t, j) * dj;
        return change;
    }

    double rho() const {
        double ub = std::numeric_limits<double>::infinity();
        double lb = -std::numeric_limits<double>::infinity();
        double free_sum = 0.0;
        std::size_t free_count = 0;
        for (std::size_t t = 0; t < n_; ++t) {
            const double yg = prob_.y[t] * grad_[t];
            if (upper_bound(t)) {
                if (prob_.y[t] == -1)
                    ub = std::min(ub, yg);
                else
                    lb = std::max(lb, yg);
            } else if (lower_bound(t)) {
                if (prob_.y[t] == +1)
                    ub = std::min(ub, yg);
                else
                    lb = std::max(lb, yg);
            } else {
                ++free_count;
                free_sum += yg;
            }
        }
        if (free_count > 0) return free_sum / static_cast<double>(free_count);
        return 0.5 * (ub + lb);
    }

    const SmoProblem& prob_;
    const SmoOptions& opt_;
    std::size_t n_ = 0;
    std::vector<double> alpha_;
    std::vector<double> grad_;
    std::vector<double> diag_;
};

}  // namespace

SmoSolution solve_smo(const SmoProblem& problem, const SmoOptions& options) {
    if (problem.kernel == nullptr) throw ValidationError("solve_smo: no kernel");
    const std::size_t n = problem.y.size();
    if (problem.index.size() != n || problem.p.size() != n)
        throw ValidationError("solve_smo: inconsistent problem sizes");
    if (!(problem.C > 0.0)) throw ValidationError("solve_smo: C must be positive");
    for (auto idx : problem.index)
        if (idx >= static_cast<std::size_t>(problem.kernel->rows()))
            throw ValidationError("solve_smo: kernel index out of range");
    Solver solver(problem, options);
    return solver.run();
}

}  // namespace mmdk
