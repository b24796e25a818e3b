#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mmdk {

/// One sample as an unordered multiset of d-dimensional vectors.
///
/// Rows of `vectors` are the elements (patch embeddings). Values are read
/// from disk as binary32 and held as doubles so downstream sums over
/// n*m kernel evaluations accumulate at full precision. Duplicate rows are
/// kept; row order carries no meaning.
struct EmbeddingBag {
    std::string id;
    std::string patient_id;
    Eigen::MatrixXd vectors;  // n x d, column-major

    std::size_t size() const { return static_cast<std::size_t>(vectors.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(vectors.cols()); }
};

// Throws ValidationError if the bag is empty, has d = 0 or holds a non-finite value.
void validate_bag(const EmbeddingBag& bag);

EmbeddingBag make_bag(std::string id, std::string patient_id, Eigen::MatrixXd vectors);

// Bag binary format, little-endian: "SMB1", u16 version (1), u32 d, u64 n,
// then n*d binary32 values row-major.
EmbeddingBag load_bag(const std::filesystem::path& path);
void write_bag(const EmbeddingBag& bag, const std::filesystem::path& path);

struct ManifestRow {
    std::string id;
    std::string path;
    std::string patient_id;
    std::map<std::string, std::string> labels;  // empty value = missing
};

/// Parsed dataset manifest. Required columns: id, path, patient. Every
/// other column is a label column; an empty cell means the sample has no
/// label for that column and is skipped by tasks that need it.
struct DatasetManifest {
    std::vector<ManifestRow> rows;
    std::vector<std::string> label_columns;

    std::optional<std::size_t> index_of(const std::string& id) const;
    std::optional<std::string> label(std::size_t row, const std::string& column) const;
    bool has_column(const std::string& column) const;
};

// Parses and validates the manifest CSV (unique ids). Relative paths are
// resolved against the manifest's directory.
DatasetManifest read_manifest(const std::filesystem::path& path);

struct Dataset {
    std::vector<EmbeddingBag> bags;
    DatasetManifest manifest;

    std::size_t dim() const { return bags.empty() ? 0 : bags.front().dim(); }
};

Dataset load_dataset(const std::filesystem::path& manifest_path);

// Throws DimensionMismatch unless all bags share one d, ValidationError on duplicate ids.
void validate_dataset(const std::vector<EmbeddingBag>& bags);

/// Index subset of a dataset. The source must outlive the view.
class DatasetView {
public:
    explicit DatasetView(const Dataset& source);
    DatasetView(const Dataset& source, std::vector<std::size_t> indices);

    std::size_t size() const { return indices_.size(); }
    const EmbeddingBag& bag(std::size_t k) const { return source_->bags[indices_[k]]; }
    const std::vector<std::size_t>& indices() const { return indices_; }
    const Dataset& source() const { return *source_; }

private:
    const Dataset* source_;
    std::vector<std::size_t> indices_;
};

DatasetView exclude_patient(const Dataset& dataset, const std::string& patient_id);
DatasetView exclude_patient(const DatasetView& view, const std::string& patient_id);

}  // namespace mmdk
