#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mmdk/csv.hpp"
#include "mmdk/error.hpp"
#include "mmdk/ward.hpp"

namespace mmdk {

void export_distances(const DistanceMatrix& d, const std::filesystem::path& path) {
    const auto n = d.values.rows();
    if (d.values.cols() != n || static_cast<std::size_t>(n) != d.ids.size())
        throw DimensionMismatch("export: matrix and ids disagree in size");
    {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw Error("cannot write " + path.string());
        for (Eigen::Index i = 0; i < n; ++i) {
            std::vector<std::string> row;
            for (Eigen::Index j = 0; j < n; ++j) row.push_back(csv::format_double(d.values(i, j)));
            csv::write_row(out, row);
        }
        if (!out) throw Error("write failed: " + path.string());
    }
    nlohmann::json meta{{"ids", d.ids},
                        {"provenance", d.provenance},
                        {"metric", "precomputed"},
                        {"min_dist", kEmbeddingMinDist},
                        {"n_neighbors", kEmbeddingNeighbors}};
    std::ofstream side(path.string() + ".meta.json", std::ios::trunc);
    if (!side) throw Error("cannot write " + path.string() + ".meta.json");
    side << meta.dump(2) << '\n';
}

ImportedDistances import_distances(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path.string() + ": cannot open");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(csv::parse_double(cell));
        rows.push_back(std::move(row));
    }
    ImportedDistances out;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.values.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
            throw FormatError(path.string() + ": row " + std::to_string(i + 1) + " is not of length " +
                              std::to_string(n));
        for (Eigen::Index j = 0; j < n; ++j) out.values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    std::ifstream side(path.string() + ".meta.json");
    if (side) {
        const auto meta = nlohmann::json::parse(side);
        out.ids = meta.at("ids").get<std::vector<std::string>>();
        if (out.ids.size() != rows.size()) throw FormatError(path.string() + ": sidecar id count mismatch");
    } else {
        for (std::size_t i = 0; i < rows.size(); ++i) out.ids.push_back(std::to_string(i));
    }
    return out;
}

}  // namespace mmdk
