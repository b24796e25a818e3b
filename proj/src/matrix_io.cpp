#include <fstream>
#include <json.hpp>

#include "binary_io.hpp"
#include "mmdk/error.hpp"
#include "mmdk/mmd.hpp"

namespace mmdk {

namespace {

constexpr std::uint16_t kMatrixVersion = 1;
constexpr std::uint8_t kDistanceKind = 0;
constexpr std::uint8_t kKernelKind = 1;

using nlohmann::json;

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional_number(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

void write_matrix(const std::string& path, std::uint8_t kind, const Eigen::MatrixXd& values, const json& meta) {
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + path);
        out.write("SMM1", 4);
        detail::put<std::uint16_t>(out, kMatrixVersion);
        detail::put<std::uint8_t>(out, kind);
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(values.rows()));
        for (Eigen::Index i = 0; i < values.rows(); ++i)
            for (Eigen::Index j = 0; j < values.cols(); ++j) detail::put<double>(out, values(i, j));
        if (!out) throw Error("write failed: " + path);
    }
    std::ofstream side(path + ".meta.json", std::ios::trunc);
    if (!side) throw Error("cannot write " + path + ".meta.json");
    side << meta.dump(2) << '\n';
}

struct RawMatrix {
    Eigen::MatrixXd values;
    json meta;
};

RawMatrix read_matrix(const std::string& path, std::uint8_t expected_kind) {
    std::ifstream in(path, std::ios::binary);
    const std::string what = "matrix " + path;
    if (!in) throw FormatError(what + ": cannot open");
    detail::expect_magic(in, "SMM1", what);
    const auto version = detail::get<std::uint16_t>(in, what);
    if (version != kMatrixVersion) throw FormatError(what + ": unsupported version " + std::to_string(version));
    const auto kind = detail::get<std::uint8_t>(in, what);
    if (kind != expected_kind)
        throw FormatError(what + ": holds a " + std::string(kind == kDistanceKind ? "distance" : "kernel") +
                          " matrix, expected " + (expected_kind == kDistanceKind ? "distance" : "kernel"));
    const auto n = detail::get<std::uint32_t>(in, what);
    RawMatrix raw;
    raw.values.resize(n, n);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < n; ++j) raw.values(i, j) = detail::get<double>(in, what);
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError(what + ": trailing bytes");

    std::ifstream side(path + ".meta.json");
    if (!side) throw FormatError(what + ": missing sidecar " + path + ".meta.json");
    try {
        raw.meta = json::parse(side);
    } catch (const json::exception& e) {
        throw FormatError(what + ": bad sidecar: " + e.what());
    }
    const auto& ids = raw.meta.at("ids");
    if (!ids.is_array() || ids.size() != n)
        throw FormatError(what + ": sidecar id count does not match N=" + std::to_string(n));
    return raw;
}

}  // namespace

void write_distance(const DistanceMatrix& d, const std::string& path) {
    json meta = {{"kind", "distance"},
                 {"ids", d.ids},
                 {"sigma", d.sigma},
                 {"gamma", nullptr},
                 {"estimator", d.estimator},
                 {"provenance", d.provenance}};
    write_matrix(path, kDistanceKind, d.values, meta);
}

void write_kernel(const KernelMatrix& k, const std::string& path) {
    json meta = {{"kind", "kernel"},
                 {"ids", k.ids},
                 {"sigma", optional_number(k.meta.sigma)},
                 {"gamma", optional_number(k.meta.gamma)},
                 {"estimator", k.meta.estimator ? json(*k.meta.estimator) : json(nullptr)},
                 {"provenance", k.meta.provenance}};
    write_matrix(path, kKernelKind, k.values, meta);
}

DistanceMatrix read_distance(const std::string& path) {
    auto raw = read_matrix(path, kDistanceKind);
    try {
        DistanceMatrix d;
        d.ids = raw.meta.at("ids").get<std::vector<std::string>>();
        d.values = std::move(raw.values);
        d.sigma = raw.meta.at("sigma").get<double>();
        d.estimator = raw.meta.at("estimator").get<std::string>();
        d.provenance = raw.meta.value("provenance", std::string());
        return d;
    } catch (const json::exception& e) {
        throw FormatError("matrix " + path + ": bad sidecar: " + e.what());
    }
}

KernelMatrix read_kernel(const std::string& path) {
    auto raw = read_matrix(path, kKernelKind);
    try {
        KernelMatrix k;
        k.ids = raw.meta.at("ids").get<std::vector<std::string>>();
        k.values = std::move(raw.values);
        k.meta.sigma = read_optional_number(raw.meta, "sigma");
        k.meta.gamma = read_optional_number(raw.meta, "gamma");
        if (raw.meta.contains("estimator") && !raw.meta.at("estimator").is_null())
            k.meta.estimator = raw.meta.at("estimator").get<std::string>();
        k.meta.provenance = raw.meta.value("provenance", std::string());
        return k;
    } catch (const json::exception& e) {
        throw FormatError("matrix " + path + ": bad sidecar: " + e.what());
    }
}

}  // namespace mmdk
