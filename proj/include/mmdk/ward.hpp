#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "mmdk/mmd.hpp"

namespace mmdk {

/// Agglomerative merge history. Leaves are nodes 0..N-1; the merge at step s
/// creates node N + s (the scipy linkage convention).
struct Dendrogram {
    struct Merge {
        std::size_t a = 0;
        std::size_t b = 0;  // a < b
        double height = 0.0;
        std::size_t size = 0;
    };
    std::vector<std::string> leaf_ids;
    std::vector<Merge> merges;
};

// Ward linkage through the Lance-Williams recurrence on distances:
//   d(k, i+j) = sqrt(((n_i + n_k) d_ki^2 + (n_j + n_k) d_kj^2 - n_k d_ij^2) / (n_i + n_j + n_k))
// Equal distances merge the pair with the smallest node ids first.
Dendrogram ward_cluster(const Eigen::MatrixXd& distances, std::vector<std::string> ids = {});

// Flat labels for `clusters` groups. Labels are numbered by the first leaf in
// each group, so leaf 0 always has label 0.
std::vector<int> cut(const Dendrogram& tree, std::size_t clusters);

// D' = 1 - K; zero diagonal for any kernel with unit diagonal.
DistanceMatrix kernel_to_distance(const KernelMatrix& kernel);

/// Square CSV of distances (no header, row order = ids) plus a
/// `<file>.meta.json` sidecar with the ids and embedding settings to use
/// with external tools (precomputed metric, min_dist 0.0, 100 neighbors).
void export_distances(const DistanceMatrix& d, const std::filesystem::path& path);

struct ImportedDistances {
    std::vector<std::string> ids;
    Eigen::MatrixXd values;
};

ImportedDistances import_distances(const std::filesystem::path& path);

inline constexpr double kEmbeddingMinDist = 0.0;
inline constexpr int kEmbeddingNeighbors = 100;

}  // namespace mmdk
