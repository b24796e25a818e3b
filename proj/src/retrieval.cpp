#include "mmdk/retrieval.hpp"

#include <algorithm>
#include <numeric>

#include "mmdk/error.hpp"

namespace mmdk {

RetrievalIndex::RetrievalIndex(const KernelMatrix& kernel, const DatasetManifest& manifest,
                               std::optional<std::string> site_column)
    : kernel_(&kernel), manifest_(&manifest), site_column_(std::move(site_column)) {
    if (site_column_ && !manifest.has_column(*site_column_))
        throw ValidationError("manifest has no column '" + *site_column_ + "'");
    std::vector<std::pair<std::size_t, std::size_t>> order;  // (manifest row, kernel index)
    manifest_rows_.resize(kernel.ids.size());
    for (std::size_t i = 0; i < kernel.ids.size(); ++i) {
        const auto row = manifest.index_of(kernel.ids[i]);
        if (!row) throw ValidationError("kernel id '" + kernel.ids[i] + "' is missing from the manifest");
        manifest_rows_[i] = *row;
        position_.emplace(kernel.ids[i], i);
    }
}

std::vector<std::size_t> RetrievalIndex::pool(std::size_t query) const {
    const auto& qrow = manifest_->rows[manifest_rows_[query]];
    std::optional<std::string> site;
    if (site_column_) site = manifest_->label(manifest_rows_[query], *site_column_);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < kernel_->ids.size(); ++i) {
        if (i == query) continue;
        const auto& row = manifest_->rows[manifest_rows_[i]];
        if (row.patient_id == qrow.patient_id) continue;
        if (site_column_ && manifest_->label(manifest_rows_[i], *site_column_) != site) continue;
        out.push_back(i);
    }
    // Manifest order is the tie-break order.
    std::sort(out.begin(), out.end(),
              [&](std::size_t a, std::size_t b) { return manifest_rows_[a] < manifest_rows_[b]; });
    return out;
}

std::size_t RetrievalIndex::pool_size(const std::string& query_id) const {
    const auto it = position_.find(query_id);
    if (it == position_.end()) throw ValidationError("unknown query id '" + query_id + "'");
    return pool(it->second).size();
}

RetrievalResult RetrievalIndex::query_top_k(const std::string& query_id, std::size_t k) const {
    const auto it = position_.find(query_id);
    if (it == position_.end()) throw ValidationError("unknown query id '" + query_id + "'");
    if (k == 0) throw ValidationError("k must be at least 1");
    const std::size_t q = it->second;
    auto candidates = pool(q);
    if (candidates.size() < k)
        throw ValidationError("query '" + query_id + "': eligible pool has " + std::to_string(candidates.size()) +
                              " bags, fewer than k=" + std::to_string(k));
    const auto& values = kernel_->values;
    const auto qi = static_cast<Eigen::Index>(q);
    std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        return values(qi, static_cast<Eigen::Index>(a)) > values(qi, static_cast<Eigen::Index>(b));
    });
    RetrievalResult result;
    result.query_id = query_id;
    result.k = k;
    for (std::size_t r = 0; r < k; ++r)
        result.neighbors.push_back({kernel_->ids[candidates[r]], values(qi, static_cast<Eigen::Index>(candidates[r]))});
    return result;
}

bool majority_vote_hit(const std::string& truth, const std::vector<std::string>& ranked_labels) {
    std::map<std::string, std::size_t> counts;
    std::map<std::string, std::size_t> first_rank;
    for (std::size_t r = 0; r < ranked_labels.size(); ++r) {
        ++counts[ranked_labels[r]];
        first_rank.try_emplace(ranked_labels[r], r);
    }
    std::size_t best = 0;
    for (const auto& [label, c] : counts) best = std::max(best, c);
    const std::string* winner = nullptr;
    for (const auto& [label, c] : counts)
        if (c == best && (!winner || first_rank.at(label) < first_rank.at(*winner))) winner = &label;
    return winner && *winner == truth;
}

double MmvReport::label_value(const std::string& label) const {
    const auto& [hits, queries] = per_label.at(label);
    return 100.0 * static_cast<double>(hits) / static_cast<double>(queries);
}

MmvReport mmv_report(const RetrievalIndex& index, const std::string& label_column, std::size_t k) {
    const auto& manifest = index.manifest();
    const auto& ids = index.ids();
    std::vector<std::string> labels(ids.size());
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto label = manifest.label(index.manifest_row(i), label_column);
        if (!label)
            missing.push_back(ids[i]);
        else
            labels[i] = *label;
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
        throw ValidationError("missing '" + label_column + "' label for: " + list);
    }
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < ids.size(); ++i) position.emplace(ids[i], i);

    MmvReport report;
    std::size_t hits = 0;
    for (std::size_t q = 0; q < ids.size(); ++q) {
        RetrievalResult result = index.query_top_k(ids[q], k);
        std::vector<std::string> ranked;
        for (const auto& nb : result.neighbors) ranked.push_back(labels[position.at(nb.id)]);
        const bool hit = majority_vote_hit(labels[q], ranked);
        auto& slot = report.per_label[labels[q]];
        slot.second += 1;
        if (hit) {
            slot.first += 1;
            ++hits;
        }
        report.results.push_back(std::move(result));
    }
    report.mmv = ids.empty() ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(ids.size());
    double macro = 0.0;
    for (const auto& [label, counts] : report.per_label) macro += report.label_value(label);
    report.macro = report.per_label.empty() ? 0.0 : macro / static_cast<double>(report.per_label.size());
    return report;
}

double mmv_at_k(const RetrievalIndex& index, const std::string& label_column, std::size_t k) {
    return mmv_report(index, label_column, k).mmv;
}

}  // namespace mmdk
