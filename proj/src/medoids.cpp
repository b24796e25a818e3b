#include <algorithm>
#include <limits>

#include "mmdk/error.hpp"
#include "mmdk/explain.hpp"

namespace mmdk {

namespace {

// Distance of each point to its nearest and second-nearest medoid.
struct Nearest {
    std::vector<double> first;
    std::vector<double> second;
    std::vector<std::size_t> which;  // position in the medoid list
};

Nearest nearest(const Eigen::MatrixXd& d, const std::vector<std::size_t>& medoids) {
    const auto n = static_cast<std::size_t>(d.rows());
    constexpr double inf = std::numeric_limits<double>::infinity();
    Nearest out{std::vector<double>(n, inf), std::vector<double>(n, inf), std::vector<std::size_t>(n, 0)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t m = 0; m < medoids.size(); ++m) {
            const double v = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(medoids[m]));
            if (v < out.first[i]) {
                out.second[i] = out.first[i];
                out.first[i] = v;
                out.which[i] = m;
            } else if (v < out.second[i]) {
                out.second[i] = v;
            }
        }
    }
    return out;
}

double total(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

}  // namespace

PamResult pam(const Eigen::MatrixXd& d, std::size_t k) {
    const auto n = static_cast<std::size_t>(d.rows());
    if (d.cols() != d.rows()) throw DimensionMismatch("pam: distance matrix is not square");
    if (k == 0 || k > n)
        throw ValidationError("pam: k=" + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
    if (!d.allFinite() || (d.array() < 0.0).any()) throw ValidationError("pam: distances must be finite and >= 0");
    const auto at = [&](std::size_t i, std::size_t j) {
        return d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    };

    // BUILD
    std::vector<std::size_t> medoids;
    std::vector<char> is_medoid(n, 0);
    std::vector<double> dnear(n, std::numeric_limits<double>::infinity());
    for (std::size_t step = 0; step < k; ++step) {
        std::size_t best = n;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n; ++c) {
            if (is_medoid[c]) continue;
            double cost = 0.0;
            for (std::size_t i = 0; i < n; ++i) cost += std::min(dnear[i], at(i, c));
            if (cost < best_cost) {
                best_cost = cost;
                best = c;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = 1;
        for (std::size_t i = 0; i < n; ++i) dnear[i] = std::min(dnear[i], at(i, best));
    }

    PamResult result;
    Nearest near = nearest(d, medoids);
    double cost = total(near.first);
    result.cost_trace.push_back(cost);

    // SWAP: take the single best (medoid, non-medoid) exchange while it helps.
    for (;;) {
        double best_delta = 0.0;
        std::size_t best_m = 0, best_h = n;
        for (std::size_t m = 0; m < medoids.size(); ++m) {
            for (std::size_t h = 0; h < n; ++h) {
                if (is_medoid[h]) continue;
                double delta = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double dh = at(i, h);
                    if (near.which[i] == m)
                        delta += std::min(dh, near.second[i]) - near.first[i];
                    else if (dh < near.first[i])
                        delta += dh - near.first[i];
                }
                if (delta < best_delta) {
                    best_delta = delta;
                    best_m = m;
                    best_h = h;
                }
            }
        }
        if (best_h == n || best_delta > -1e-12 * std::max(1.0, cost)) break;
        is_medoid[medoids[best_m]] = 0;
        is_medoid[best_h] = 1;
        medoids[best_m] = best_h;
        near = nearest(d, medoids);
        cost = total(near.first);
        result.cost_trace.push_back(cost);
    }

    std::sort(medoids.begin(), medoids.end());
    near = nearest(d, medoids);
    result.medoids = medoids;
    result.assignment = near.which;
    result.cost = total(near.first);
    return result;
}

Eigen::MatrixXd euclidean_distances(std::span<const PatchCandidate> candidates) {
    const auto n = static_cast<Eigen::Index>(candidates.size());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (candidates[static_cast<std::size_t>(i)].vector.size() != candidates.front().vector.size())
            throw DimensionMismatch("candidate vectors differ in dimension");
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v =
                (candidates[static_cast<std::size_t>(i)].vector - candidates[static_cast<std::size_t>(j)].vector).norm();
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return d;
}

std::vector<std::string> representative_patches(std::span<const PatchCandidate> candidates, std::size_t k) {
    if (candidates.empty()) throw ValidationError("no candidate patches");
    const PamResult r = pam(euclidean_distances(candidates), k);
    std::vector<std::string> ids;
    for (auto m : r.medoids) ids.push_back(candidates[m].patch_id);
    return ids;
}

}  // namespace mmdk
