#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmdk/bags.hpp"
#include "mmdk/mmd.hpp"

namespace mmdk {

inline constexpr double kTopicSigma = 10.0;

/// Binary topic indicators of one patient.
struct TopicProfile {
    std::string patient_id;
    Eigen::VectorXd topics;  // entries 0 or 1
};

// CSV: patient_id, then one 0/1 column per topic.
std::vector<TopicProfile> read_topics(const std::filesystem::path& path);

// K[i][j] = exp(-|t_i - t_j|^2 / (2 sigma^2)). Note the 2 sigma^2 denominator,
// unlike the 4 sigma^2 of the element kernel.
KernelMatrix topic_kernel(std::span<const TopicProfile> profiles, double sigma = kTopicSigma);

// Restricts and reorders every kernel to the sorted intersection of their ids.
std::vector<KernelMatrix> align(std::span<const KernelMatrix> kernels);

enum class FusionMode { sum, product };

std::string to_string(FusionMode mode);
FusionMode parse_fusion_mode(const std::string& text);

// Entrywise sum (divided by the kernel count when `rescale_sum`) or Hadamard
// product of aligned kernels. Ids must agree exactly, order included.
KernelMatrix combine(std::span<const KernelMatrix> kernels, FusionMode mode, bool rescale_sum = true);

// Renames bag ids to patient ids through the manifest, so bag kernels can be
// fused with patient-level kernels. Each patient may own only one bag.
KernelMatrix relabel_by_patient(const KernelMatrix& kernel, const DatasetManifest& manifest);

}  // namespace mmdk
