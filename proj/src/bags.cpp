#include "mmdk/bags.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "binary_io.hpp"
#include "mmdk/csv.hpp"
#include "mmdk/error.hpp"

namespace mmdk {

namespace {
constexpr std::uint16_t kBagVersion = 1;
}

void validate_bag(const EmbeddingBag& bag) {
    if (bag.vectors.rows() == 0) throw ValidationError("bag '" + bag.id + "' is empty");
    if (bag.vectors.cols() == 0) throw ValidationError("bag '" + bag.id + "' has dimension 0");
    if (!bag.vectors.allFinite()) throw ValidationError("bag '" + bag.id + "' holds a non-finite value");
}

EmbeddingBag make_bag(std::string id, std::string patient_id, Eigen::MatrixXd vectors) {
    EmbeddingBag bag{std::move(id), std::move(patient_id), std::move(vectors)};
    validate_bag(bag);
    return bag;
}

EmbeddingBag load_bag(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    const std::string what = "bag " + path.string();
    if (!in) throw FormatError(what + ": cannot open");
    detail::expect_magic(in, "SMB1", what);
    const auto version = detail::get<std::uint16_t>(in, what);
    if (version != kBagVersion) throw FormatError(what + ": unsupported version " + std::to_string(version));
    const auto d = detail::get<std::uint32_t>(in, what);
    const auto n = detail::get<std::uint64_t>(in, what);
    if (n == 0) throw ValidationError(what + ": bag is empty");
    if (d == 0) throw ValidationError(what + ": dimension is 0");

    // Check the payload size against the file before allocating.
    const auto header_end = in.tellg();
    in.seekg(0, std::ios::end);
    const auto file_end = in.tellg();
    in.seekg(header_end);
    const auto available = static_cast<std::uint64_t>(file_end - header_end);
    if (n > std::numeric_limits<std::uint64_t>::max() / d / 4 || available < n * d * 4)
        throw FormatError(what + ": truncated payload");
    if (available > n * d * 4) throw FormatError(what + ": trailing bytes after payload");

    EmbeddingBag bag;
    bag.id = path.stem().string();
    bag.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::vector<float> row(d);
    for (std::uint64_t i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(d * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(d * sizeof(float)))
            throw FormatError(what + ": truncated payload");
        for (std::uint32_t k = 0; k < d; ++k) {
            const float v = detail::to_little(row[k]);
            if (!std::isfinite(v))
                throw ValidationError(what + ": non-finite value at row " + std::to_string(i));
            bag.vectors(static_cast<Eigen::Index>(i), k) = v;
        }
    }
    return bag;
}

void write_bag(const EmbeddingBag& bag, const std::filesystem::path& path) {
    validate_bag(bag);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write("SMB1", 4);
    detail::put<std::uint16_t>(out, kBagVersion);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(bag.dim()));
    detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(bag.size()));
    for (Eigen::Index i = 0; i < bag.vectors.rows(); ++i)
        for (Eigen::Index k = 0; k < bag.vectors.cols(); ++k)
            detail::put<float>(out, static_cast<float>(bag.vectors(i, k)));
    if (!out) throw Error("write failed: " + path.string());
}

std::optional<std::size_t> DatasetManifest::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i].id == id) return i;
    return std::nullopt;
}

std::optional<std::string> DatasetManifest::label(std::size_t row, const std::string& column) const {
    const auto& labels = rows.at(row).labels;
    const auto it = labels.find(column);
    if (it == labels.end() || it->second.empty()) return std::nullopt;
    return it->second;
}

bool DatasetManifest::has_column(const std::string& column) const {
    return std::find(label_columns.begin(), label_columns.end(), column) != label_columns.end();
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    const csv::Table table = csv::read(path);
    const auto id_col = table.require("id");
    const auto path_col = table.require("path");
    const auto patient_col = table.require("patient");

    DatasetManifest manifest;
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (c != id_col && c != path_col && c != patient_col) manifest.label_columns.push_back(table.header[c]);

    const auto base = path.parent_path();
    std::set<std::string> seen;
    for (const auto& fields : table.rows) {
        ManifestRow row;
        row.id = fields[id_col];
        if (row.id.empty()) throw ValidationError(path.string() + ": empty id");
        if (!seen.insert(row.id).second) throw ValidationError(path.string() + ": duplicate id '" + row.id + "'");
        std::filesystem::path bag_path(fields[path_col]);
        if (!bag_path.empty() && bag_path.is_relative()) bag_path = base / bag_path;
        row.path = bag_path.string();
        row.patient_id = fields[patient_col];
        for (std::size_t c = 0; c < table.header.size(); ++c)
            if (c != id_col && c != path_col && c != patient_col) row.labels[table.header[c]] = fields[c];
        manifest.rows.push_back(std::move(row));
    }
    return manifest;
}

void validate_dataset(const std::vector<EmbeddingBag>& bags) {
    std::set<std::string> seen;
    for (const auto& bag : bags) {
        if (!seen.insert(bag.id).second) throw ValidationError("duplicate bag id '" + bag.id + "'");
        if (bag.dim() != bags.front().dim())
            throw DimensionMismatch("bag '" + bag.id + "' has d=" + std::to_string(bag.dim()) + ", expected d=" +
                                    std::to_string(bags.front().dim()) + " (from '" + bags.front().id + "')");
    }
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    Dataset dataset;
    dataset.manifest = read_manifest(manifest_path);
    dataset.bags.reserve(dataset.manifest.rows.size());
    for (const auto& row : dataset.manifest.rows) {
        if (row.path.empty() || !std::filesystem::exists(row.path))
            throw ValidationError("bag file for '" + row.id + "' not found: " + row.path);
        EmbeddingBag bag = load_bag(row.path);
        bag.id = row.id;
        bag.patient_id = row.patient_id;
        dataset.bags.push_back(std::move(bag));
        if (dataset.bags.back().dim() != dataset.bags.front().dim()) validate_dataset(dataset.bags);
    }
    validate_dataset(dataset.bags);
    return dataset;
}

DatasetView::DatasetView(const Dataset& source) : source_(&source), indices_(source.bags.size()) {
    for (std::size_t i = 0; i < indices_.size(); ++i) indices_[i] = i;
}

DatasetView::DatasetView(const Dataset& source, std::vector<std::size_t> indices)
    : source_(&source), indices_(std::move(indices)) {}

DatasetView exclude_patient(const DatasetView& view, const std::string& patient_id) {
    std::vector<std::size_t> kept;
    kept.reserve(view.size());
    for (std::size_t k = 0; k < view.size(); ++k)
        if (view.bag(k).patient_id != patient_id) kept.push_back(view.indices()[k]);
    return DatasetView(view.source(), std::move(kept));
}

DatasetView exclude_patient(const Dataset& dataset, const std::string& patient_id) {
    return exclude_patient(DatasetView(dataset), patient_id);
}

}  // namespace mmdk
