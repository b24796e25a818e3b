#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mmdk/bags.hpp"
#include "mmdk/mmd.hpp"

namespace mmdk {

inline constexpr std::size_t kDefaultRetrievalK = 5;

struct Neighbor {
    std::string id;
    double similarity = 0.0;
};

struct RetrievalResult {
    std::string query_id;
    std::vector<Neighbor> neighbors;  // descending similarity
    std::size_t k = 0;
};

/// Retrieval context: the kernel plus who belongs to which patient (and,
/// optionally, which site pool). Ids are matched against the manifest.
class RetrievalIndex {
public:
    // `site_column` restricts each query's pool to bags with the same site value.
    RetrievalIndex(const KernelMatrix& kernel, const DatasetManifest& manifest,
                   std::optional<std::string> site_column = std::nullopt);

    // The k most similar bags from other patients (and the same site, if set).
    // Equal similarities keep manifest order.
    RetrievalResult query_top_k(const std::string& query_id, std::size_t k) const;

    std::size_t pool_size(const std::string& query_id) const;
    const KernelMatrix& kernel() const { return *kernel_; }
    const std::vector<std::string>& ids() const { return kernel_->ids; }
    const DatasetManifest& manifest() const { return *manifest_; }
    std::size_t manifest_row(std::size_t kernel_index) const { return manifest_rows_[kernel_index]; }

private:
    std::vector<std::size_t> pool(std::size_t query) const;

    const KernelMatrix* kernel_;
    const DatasetManifest* manifest_;
    std::optional<std::string> site_column_;
    std::vector<std::size_t> manifest_rows_;  // kernel index -> manifest row
    std::map<std::string, std::size_t> position_;
};

/// Majority-vote hit for one query: the truth must attain the maximum count
/// among the retrieved labels; when several labels tie for the maximum the
/// one whose best-ranked neighbor comes first wins.
bool majority_vote_hit(const std::string& truth, const std::vector<std::string>& ranked_labels);

struct MmvReport {
    double mmv = 0.0;  // micro: 100 * mean over all queries
    double macro = 0.0;  // mean of per-label values
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_label;  // label -> (hits, queries)
    std::vector<RetrievalResult> results;

    double label_value(const std::string& label) const;
};

MmvReport mmv_report(const RetrievalIndex& index, const std::string& label_column, std::size_t k);

// Percentage in [0, 100] of queries whose label wins the top-k majority vote.
double mmv_at_k(const RetrievalIndex& index, const std::string& label_column, std::size_t k);

}  // namespace mmdk
