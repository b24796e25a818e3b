#include "mmdk/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "mmdk/csv.hpp"
#include "mmdk/error.hpp"

namespace mmdk {

std::vector<TopicProfile> read_topics(const std::filesystem::path& path) {
    const csv::Table table = csv::read(path);
    if (table.header.size() < 2) throw FormatError(path.string() + ": expected patient_id plus topic columns");
    if (table.header.front() != "patient_id")
        throw FormatError(path.string() + ": first column must be patient_id");
    std::vector<TopicProfile> out;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        TopicProfile p;
        p.patient_id = row.front();
        if (!seen.insert(p.patient_id).second)
            throw ValidationError(path.string() + ": duplicate patient '" + p.patient_id + "'");
        p.topics.resize(static_cast<Eigen::Index>(row.size() - 1));
        for (std::size_t c = 1; c < row.size(); ++c) {
            double v = 0.0;
            try {
                v = csv::parse_double(row[c]);
            } catch (const Error&) {
                throw FormatError(path.string() + ": row " + std::to_string(r + 2) + ", column '" +
                                  table.header[c] + "': not a number");
            }
            p.topics[static_cast<Eigen::Index>(c - 1)] = v;
        }
        out.push_back(std::move(p));
    }
    return out;
}

KernelMatrix topic_kernel(std::span<const TopicProfile> profiles, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("topic sigma must be positive");
    if (profiles.empty()) throw ValidationError("no topic profiles");
    const auto len = profiles.front().topics.size();
    for (const auto& p : profiles) {
        if (p.topics.size() != len)
            throw DimensionMismatch("topic profile '" + p.patient_id + "' has " + std::to_string(p.topics.size()) +
                                    " topics, expected " + std::to_string(len));
        for (Eigen::Index t = 0; t < len; ++t)
            if (p.topics[t] != 0.0 && p.topics[t] != 1.0)
                throw ValidationError("topic profile '" + p.patient_id + "': non-binary entry at topic " +
                                      std::to_string(t));
    }
    const auto n = static_cast<Eigen::Index>(profiles.size());
    KernelMatrix k;
    k.values.resize(n, n);
    for (const auto& p : profiles) k.ids.push_back(p.patient_id);
    for (Eigen::Index i = 0; i < n; ++i) {
        k.values(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double sq = (profiles[static_cast<std::size_t>(i)].topics -
                               profiles[static_cast<std::size_t>(j)].topics).squaredNorm();
            const double v = std::exp(-sq / (2.0 * sigma * sigma));
            k.values(i, j) = v;
            k.values(j, i) = v;
        }
    }
    k.meta.sigma = sigma;
    k.meta.provenance = "topic_rbf(sigma=" + csv::format_double(sigma) + ")";
    return k;
}

std::vector<KernelMatrix> align(std::span<const KernelMatrix> kernels) {
    if (kernels.empty()) throw ValidationError("align: no kernels");
    std::set<std::string> common(kernels.front().ids.begin(), kernels.front().ids.end());
    for (const auto& k : kernels.subspan(1)) {
        std::set<std::string> next;
        for (const auto& id : k.ids)
            if (common.count(id)) next.insert(id);
        common = std::move(next);
    }
    if (common.empty()) throw ValidationError("align: kernels share no ids");
    std::vector<KernelMatrix> out;
    for (const auto& k : kernels) {
        std::map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < k.ids.size(); ++i) pos.emplace(k.ids[i], i);
        std::vector<std::size_t> idx;
        for (const auto& id : common) idx.push_back(pos.at(id));
        out.push_back(subset(k, idx));
    }
    return out;
}

std::string to_string(FusionMode mode) { return mode == FusionMode::sum ? "sum" : "product"; }

FusionMode parse_fusion_mode(const std::string& text) {
    if (text == "sum") return FusionMode::sum;
    if (text == "product") return FusionMode::product;
    throw ValidationError("unknown fusion mode '" + text + "' (expected sum or product)");
}

KernelMatrix combine(std::span<const KernelMatrix> kernels, FusionMode mode, bool rescale_sum) {
    if (kernels.size() < 2) throw ValidationError("combine: need at least two kernels");
    const auto& ids = kernels.front().ids;
    for (const auto& k : kernels.subspan(1))
        if (k.ids != ids) throw ValidationError("combine: kernels are not aligned (run align first)");
    KernelMatrix out;
    out.ids = ids;
    out.values = kernels.front().values;
    std::string recipe = kernels.front().meta.provenance;
    for (const auto& k : kernels.subspan(1)) {
        if (mode == FusionMode::sum)
            out.values += k.values;
        else
            out.values.array() *= k.values.array();
        recipe += ";" + k.meta.provenance;
    }
    std::string op = to_string(mode);
    if (mode == FusionMode::sum && rescale_sum) {
        out.values /= static_cast<double>(kernels.size());
        op += "/" + std::to_string(kernels.size());
    }
    out.meta.provenance = op + "[" + recipe + "]";
    return out;
}

KernelMatrix relabel_by_patient(const KernelMatrix& kernel, const DatasetManifest& manifest) {
    KernelMatrix out = kernel;
    std::set<std::string> seen;
    for (auto& id : out.ids) {
        const auto row = manifest.index_of(id);
        if (!row) throw ValidationError("kernel id '" + id + "' is missing from the manifest");
        const auto& patient = manifest.rows[*row].patient_id;
        if (!seen.insert(patient).second)
            throw ValidationError("patient '" + patient + "' owns more than one bag in the kernel");
        id = patient;
    }
    return out;
}

}  // namespace mmdk
