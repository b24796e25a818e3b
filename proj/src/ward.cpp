#include "mmdk/ward.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "mmdk/error.hpp"

namespace mmdk {

Dendrogram ward_cluster(const Eigen::MatrixXd& distances, std::vector<std::string> ids) {
    const auto n = static_cast<std::size_t>(distances.rows());
    if (distances.cols() != distances.rows()) throw DimensionMismatch("ward: distance matrix is not square");
    if (n < 2) throw ValidationError("ward: need at least two items");
    if (!ids.empty() && ids.size() != n) throw DimensionMismatch("ward: id count differs from matrix size");
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        if (distances(ii, ii) != 0.0) throw ValidationError("ward: nonzero diagonal at " + std::to_string(i));
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = distances(ii, static_cast<Eigen::Index>(j));
            if (!std::isfinite(v) || v < 0.0 || v != distances(static_cast<Eigen::Index>(j), ii))
                throw ValidationError("ward: matrix must be symmetric, finite and nonnegative");
        }
    }
    if (ids.empty())
        for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));

    Eigen::MatrixXd d = distances;
    std::vector<std::size_t> node(n), size(n, 1);
    std::vector<char> active(n, 1);
    for (std::size_t i = 0; i < n; ++i) node[i] = i;

    Dendrogram tree;
    tree.leaf_ids = std::move(ids);
    for (std::size_t step = 0; step + 1 < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = n, bj = n;
        std::pair<std::size_t, std::size_t> best_nodes{n * 2, n * 2};
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!active[j]) continue;
                const double v = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                const std::pair<std::size_t, std::size_t> nodes = std::minmax(node[i], node[j]);
                if (v < best || (v == best && nodes < best_nodes)) {
                    best = v;
                    bi = i;
                    bj = j;
                    best_nodes = nodes;
                }
            }
        }
        const double ni = static_cast<double>(size[bi]), nj = static_cast<double>(size[bj]);
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == bi || k == bj) continue;
            const auto K = static_cast<Eigen::Index>(k);
            const double nk = static_cast<double>(size[k]);
            const double dki = d(K, static_cast<Eigen::Index>(bi)), dkj = d(K, static_cast<Eigen::Index>(bj));
            const double v = std::sqrt(std::max(
                0.0, ((ni + nk) * dki * dki + (nj + nk) * dkj * dkj - nk * best * best) / (ni + nj + nk)));
            d(K, static_cast<Eigen::Index>(bi)) = v;
            d(static_cast<Eigen::Index>(bi), K) = v;
        }
        tree.merges.push_back({best_nodes.first, best_nodes.second, best, size[bi] + size[bj]});
        size[bi] += size[bj];
        node[bi] = n + step;
        active[bj] = 0;
    }
    return tree;
}

std::vector<int> cut(const Dendrogram& tree, std::size_t clusters) {
    const std::size_t n = tree.leaf_ids.size();
    if (clusters == 0 || clusters > n)
        throw ValidationError("cut: cluster count must lie in [1, " + std::to_string(n) + "]");
    // Union the first n - clusters merges.
    std::vector<std::size_t> parent(2 * n - 1);
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t s = 0; s < n - clusters; ++s) {
        const auto& m = tree.merges[s];
        parent[find(m.a)] = n + s;
        parent[find(m.b)] = n + s;
    }
    std::vector<int> labels(n);
    std::map<std::size_t, int> number;
    for (std::size_t i = 0; i < n; ++i) {
        const auto root = find(i);
        const auto [it, fresh] = number.try_emplace(root, static_cast<int>(number.size()));
        labels[i] = it->second;
    }
    return labels;
}

DistanceMatrix kernel_to_distance(const KernelMatrix& kernel) {
    DistanceMatrix d;
    d.ids = kernel.ids;
    d.values = (1.0 - kernel.values.array()).matrix();
    d.values.diagonal().setZero();
    d.sigma = kernel.meta.sigma.value_or(kDefaultSigma);
    d.estimator = kernel.meta.estimator.value_or("");
    d.provenance = "1-K[" + kernel.meta.provenance + "]";
    return d;
}

}  // namespace mmdk
