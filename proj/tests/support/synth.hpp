#pragma once

// Synthetic data and brute-force reference implementations shared by the unit
// and acceptance tests. Oracles here deliberately avoid the library code paths.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mmdk/bags.hpp"
#include "mmdk/mmd.hpp"
#include "mmdk/survival.hpp"

namespace synth {

using Rng = std::mt19937_64;

inline Eigen::MatrixXd gaussian(Rng& rng, Eigen::Index n, Eigen::Index d, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Eigen::MatrixXd m(n, d);
    for (auto& v : m.reshaped()) v = g(rng);
    return m;
}

// Rows ~ N(center, scale^2 I).
inline mmdk::EmbeddingBag bag_around(Rng& rng, const std::string& id, const Eigen::VectorXd& center, Eigen::Index n,
                                     double scale = 1.0, std::string patient = {}) {
    Eigen::MatrixXd m = gaussian(rng, n, center.size(), scale);
    m.rowwise() += center.transpose();
    return mmdk::make_bag(id, patient.empty() ? "p_" + id : std::move(patient), std::move(m));
}

inline mmdk::EmbeddingBag random_bag(Rng& rng, const std::string& id, Eigen::Index n, Eigen::Index d,
                                     double shift = 0.0) {
    return bag_around(rng, id, Eigen::VectorXd::Constant(d, shift), n);
}

// Plain double sum over every element pair, accumulated in long double.
inline double naive_mmd_sq(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double sigma) {
    auto mean_k = [&](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
        long double s = 0.0L;
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < y.rows(); ++j) {
                long double sq = 0.0L;
                for (Eigen::Index k = 0; k < x.cols(); ++k) {
                    const long double diff = static_cast<long double>(x(i, k)) - y(j, k);
                    sq += diff * diff;
                }
                s += std::exp(-sq / (4.0L * sigma * sigma));
            }
        return s / (static_cast<long double>(x.rows()) * y.rows());
    };
    return static_cast<double>(mean_k(a, a) + mean_k(b, b) - 2.0L * mean_k(a, b));
}

inline Eigen::MatrixXd random_psd(Rng& rng, Eigen::Index n) {
    const Eigen::MatrixXd f = gaussian(rng, n, n);
    Eigen::MatrixXd k = f * f.transpose() / static_cast<double>(n);
    // Unit diagonal, like every kernel in the library.
    const Eigen::VectorXd s = k.diagonal().cwiseSqrt().cwiseInverse();
    return s.asDiagonal() * k * s.asDiagonal();
}

// Comparable-pair enumeration straight from the definition.
inline double naive_cindex(const std::vector<mmdk::SurvivalRecord>& r, const std::vector<double>& risk) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = 0; j < r.size(); ++j)
            if (r[i].event && r[i].time < r[j].time) {
                den += 1.0;
                num += risk[i] > risk[j] ? 1.0 : (risk[i] == risk[j] ? 0.5 : 0.0);
            }
    return num / den;
}

inline std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("mmdk_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Survival times with hazard exp(beta * risk): exponential with that rate,
// scaled so that about `censored_frac` of subjects outlive `horizon`, then
// censored at the horizon.
inline std::vector<mmdk::SurvivalRecord> survival_times(Rng& rng, const std::vector<double>& risk, double beta,
                                                        double censored_frac, double horizon,
                                                        const std::vector<std::string>& ids) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> raw(risk.size());
    for (std::size_t i = 0; i < risk.size(); ++i) raw[i] = e(rng) / std::exp(beta * risk[i]);
    std::vector<double> sorted = raw;
    std::sort(sorted.begin(), sorted.end());
    const auto cut = static_cast<std::size_t>(std::floor((1.0 - censored_frac) * static_cast<double>(sorted.size())));
    const double q = sorted[std::min(cut, sorted.size() - 1)];
    std::vector<mmdk::SurvivalRecord> out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double t = raw[i] / q * horizon;
        out.push_back({ids[i], std::min(t, horizon), t < horizon});
    }
    return out;
}

// Projection onto {0 <= z <= C, a'z = 0} with a in {-1, +1}^n: z = clip(v - lambda a)
// where lambda solves the monotone equation a'z(lambda) = 0 by bisection.
inline Eigen::VectorXd project_box_hyperplane(const Eigen::VectorXd& v, const Eigen::VectorXd& a, double C) {
    auto at = [&](double lambda) {
        return (v - lambda * a).cwiseMax(0.0).cwiseMin(C).eval();
    };
    double lo = -(v.cwiseAbs().maxCoeff() + C + 1.0), hi = -lo;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (a.dot(at(mid)) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return at(0.5 * (lo + hi));
}

// min 1/2 z'Qz + p'z over the same set, by accelerated projected gradient.
inline double box_qp_oracle(const Eigen::MatrixXd& Q, const Eigen::VectorXd& p, const Eigen::VectorXd& a, double C,
                            int iterations = 200000) {
    const double L = std::max(1e-12, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Q).eigenvalues().maxCoeff());
    Eigen::VectorXd z = project_box_hyperplane(Eigen::VectorXd::Zero(p.size()), a, C), prev = z, w = z;
    double t = 1.0;
    auto f = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(Q * x) + p.dot(x); };
    for (int it = 0; it < iterations; ++it) {
        prev = z;
        z = project_box_hyperplane(w - (Q * w + p) / L, a, C);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        w = z + ((t - 1.0) / t_next) * (z - prev);
        t = t_next;
        if (f(w) > f(z)) {  // adaptive restart
            w = z;
            t = 1.0;
        }
    }
    return f(z);
}

// Dual optimum of epsilon-SVR, in the 2n-variable split form.
inline double svr_dual_oracle(const Eigen::MatrixXd& K, const std::vector<double>& y, double C, double eps,
                              int iterations = 200000) {
    const auto n = K.rows();
    Eigen::MatrixXd Q(2 * n, 2 * n);
    Q << K, -K, -K, K;
    Eigen::VectorXd p(2 * n), a(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        p[i] = eps - y[static_cast<std::size_t>(i)];
        p[n + i] = eps + y[static_cast<std::size_t>(i)];
        a[i] = 1.0;
        a[n + i] = -1.0;
    }
    return box_qp_oracle(Q, p, a, C, iterations);
}

// The same dual objective evaluated at beta = alpha - alpha*.
inline double svr_dual_value(const Eigen::MatrixXd& K, const std::vector<double>& y, double eps,
                             const Eigen::VectorXd& beta) {
    double v = 0.5 * beta.dot(K * beta);
    for (Eigen::Index i = 0; i < beta.size(); ++i) v += eps * std::abs(beta[i]) - y[static_cast<std::size_t>(i)] * beta[i];
    return v;
}

}  // namespace synth
