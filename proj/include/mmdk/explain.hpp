#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmdk/bags.hpp"
#include "mmdk/dual_model.hpp"
#include "mmdk/mmd.hpp"

namespace mmdk {

inline constexpr std::size_t kDefaultMedoids = 25;

/// Leave-one-element-out sensitivity of a model's score for one bag:
/// deltas[j] = f(bag without element j) - f(bag).
struct SensitivityMap {
    std::string bag_id;
    std::vector<double> deltas;
    std::vector<double> normalized;  // min-max rescaled deltas
    double baseline = 0.0;           // f(bag)
};

// (x - min) / (max - min); constant input maps to 0.5 everywhere.
std::vector<double> minmax_normalize(std::span<const double> values);

/// Scores bags against a trained model straight from their elements, caching
/// what every query shares (the training bags' self sums).
///
/// For a query X with N elements and training bag Y_t with M_t elements the
/// explainer keeps r_j = sum_j' k(x_j, x_j') and c_jt = sum_y k(x_j, y); removing
/// element j then only needs
///   self  = (S_self - 2 r_j + k(x_j, x_j)) / (N - 1)^2
///   cross = (S_cross,t - c_jt) / ((N - 1) M_t)
/// instead of a full recomputation.
class PatchExplainer {
public:
    // `train_bags` must contain every model.train_ids entry (any order).
    // Throws MetaMismatch unless the model was trained on exp(-gamma * mmd_sq)
    // with these sigma and gamma.
    PatchExplainer(const DualModel& model, std::span<const EmbeddingBag> train_bags, const PatchKernelParams& params,
                   double gamma, unsigned threads = 1);

    // f(bag), computed from scratch through mmd_sq.
    double score(const EmbeddingBag& bag) const;

    SensitivityMap explain(const EmbeddingBag& query) const;

    static KernelMeta expected_meta(const PatchKernelParams& params, double gamma);

private:
    const DualModel& model_;
    std::vector<const EmbeddingBag*> train_;
    std::vector<double> train_self_;
    PatchKernelParams params_;
    double gamma_;
    unsigned threads_;
};

SensitivityMap patch_sensitivity(const DualModel& model, std::span<const EmbeddingBag> train_bags,
                                 const EmbeddingBag& query, const PatchKernelParams& params, double gamma,
                                 unsigned threads = 1);

/// One extreme-scoring element per patient, the input of medoid selection.
struct PatchCandidate {
    std::string patch_id;  // "<bag_id>#<row>"
    std::string patient_id;
    double score = 0.0;
    Eigen::VectorXd vector;
};

enum class Extreme { highest, lowest };

// Picks each patient's maximum (or minimum) delta element across all of the
// patient's bags; equal scores are broken by a seeded uniform choice.
// `maps[i]` must describe `bags[i]`.
std::vector<PatchCandidate> select_extreme_patches(std::span<const EmbeddingBag> bags,
                                                   std::span<const SensitivityMap> maps, Extreme extreme,
                                                   std::uint64_t seed);

struct PamResult {
    std::vector<std::size_t> medoids;     // indices into the input, sorted
    std::vector<std::size_t> assignment;  // nearest medoid position per point
    double cost = 0.0;                    // sum of distances to the nearest medoid
    std::vector<double> cost_trace;       // after BUILD, then after each accepted swap
};

// Partitioning Around Medoids: greedy BUILD followed by steepest-descent SWAP
// to a local optimum. Ties resolve to the lowest index.
PamResult pam(const Eigen::MatrixXd& distances, std::size_t k);

Eigen::MatrixXd euclidean_distances(std::span<const PatchCandidate> candidates);

// Medoid patch ids under Euclidean distance in embedding space.
std::vector<std::string> representative_patches(std::span<const PatchCandidate> candidates,
                                                std::size_t k = kDefaultMedoids);

}  // namespace mmdk
