#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmdk/bags.hpp"

namespace mmdk {

inline constexpr double kDefaultSigma = 10.0;
inline constexpr std::size_t kDefaultTile = 1024;
inline constexpr const char* kBiasedEstimator = "biased";

/// Bandwidth of the element-level Gaussian kernel k(x, y) = exp(-|x - y|^2 / (4 sigma^2)).
struct PatchKernelParams {
    double sigma = kDefaultSigma;

    void validate() const;
};

double gauss_kernel(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                    double sigma);

// For every row a_i: sum_j k(a_i, b_j), summed in ascending j. The value for
// each row depends only on a_i and b, never on `tile`.
std::vector<double> cross_row_sums(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                   const PatchKernelParams& params, std::size_t tile = kDefaultTile);

// Sum of a row-sum vector in ascending index order.
double ordered_sum(std::span<const double> values);

// Sum over all ordered element pairs (self-pairs included) of one bag.
double self_sum(const EmbeddingBag& bag, const PatchKernelParams& params, std::size_t tile = kDefaultTile);

// Cross sum between two bags. Exactly symmetric: both argument orders reduce
// in the same canonical order.
double cross_sum(const EmbeddingBag& a, const EmbeddingBag& b, const PatchKernelParams& params,
                 std::size_t tile = kDefaultTile);

// Assembles the biased estimate from cached sums. Round-off below zero is
// clamped when within 1e-12; anything more negative throws Error.
double mmd_from_sums(double self_a, std::size_t n_a, double self_b, std::size_t n_b, double cross);

/// Biased (V-statistic) squared MMD:
///   S_aa / n^2 + S_bb / m^2 - 2 S_ab / (n m)
/// with self-pairs included, so mmd_sq(a, a) == 0.
double mmd_sq(const EmbeddingBag& a, const EmbeddingBag& b, const PatchKernelParams& params,
              std::size_t tile = kDefaultTile);

struct DistanceMatrix {
    std::vector<std::string> ids;
    Eigen::MatrixXd values;
    double sigma = kDefaultSigma;
    std::string estimator = kBiasedEstimator;
    std::string provenance;

    std::size_t size() const { return ids.size(); }
};

/// Provenance-bearing description of how a kernel was built. Models record it
/// and refuse to score against a kernel whose meta differs.
struct KernelMeta {
    std::optional<double> sigma;
    std::optional<double> gamma;
    std::optional<std::string> estimator;
    std::string provenance;

    bool operator==(const KernelMeta&) const = default;
};

struct KernelMatrix {
    std::vector<std::string> ids;
    Eigen::MatrixXd values;
    KernelMeta meta;

    std::size_t size() const { return ids.size(); }
};

struct PairwiseOptions {
    std::size_t tile = kDefaultTile;
    unsigned threads = 1;
};

/// Full N x N matrix of mmd_sq over the given bags. Each bag's self sum is
/// computed once; each unordered pair once, mirrored into both triangles.
/// Output is bitwise independent of thread count and tile size.
DistanceMatrix pairwise_distances(std::span<const EmbeddingBag> bags, const PatchKernelParams& params,
                                  const PairwiseOptions& options = {});
DistanceMatrix pairwise_distances(const DatasetView& view, const PatchKernelParams& params,
                                  const PairwiseOptions& options = {});

std::string distance_provenance(double sigma, const std::string& estimator);

// Median of all N^2 entries, diagonal included. Even count: mean of the two middle values.
double median_gamma(const DistanceMatrix& d);

// K = exp(-gamma * D) entrywise.
KernelMatrix to_kernel(const DistanceMatrix& d, double gamma);

struct PsdReport {
    double min_eigenvalue = 0.0;
    bool pass = false;
};

PsdReport check_psd(const Eigen::MatrixXd& k, double tol);
inline PsdReport check_psd(const KernelMatrix& k, double tol) { return check_psd(k.values, tol); }

// Rows/columns restricted to the given indices, in the given order.
Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, std::span<const std::size_t> rows,
                          std::span<const std::size_t> cols);
DistanceMatrix subset(const DistanceMatrix& d, std::span<const std::size_t> indices);
KernelMatrix subset(const KernelMatrix& k, std::span<const std::size_t> indices);

// Matrix files ("SMM1") with a `<file>.meta.json` sidecar.
void write_distance(const DistanceMatrix& d, const std::string& path);
void write_kernel(const KernelMatrix& k, const std::string& path);
DistanceMatrix read_distance(const std::string& path);
KernelMatrix read_kernel(const std::string& path);

}  // namespace mmdk
