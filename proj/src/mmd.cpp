#include "mmdk/mmd.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <new>
#include <sstream>

#include "mmdk/csv.hpp"
#include "mmdk/error.hpp"
#include "mmdk/parallel.hpp"

namespace mmdk {

namespace {

constexpr double kClampTolerance = 1e-12;

double inverse_bandwidth(double sigma) { return 1.0 / (4.0 * sigma * sigma); }

// Canonical operand order for cross sums, so (a, b) and (b, a) reduce identically.
bool canonical_first(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows()) return a.rows() >= b.rows();
    if (&a == &b) return true;
    const auto size = a.size();
    return !std::lexicographical_compare(b.data(), b.data() + size, a.data(), a.data() + size);
}

// out[r * stride + j] = |a_(i0+r) - b_(j0+j)|^2 for r < count, j < width, each
// summed over the coordinates in ascending order. Blocks of 4 x 8 stay in registers.
void squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::size_t i0, std::size_t count,
                       std::size_t j0, std::size_t width, std::size_t stride, double* out) {
    const auto d = a.cols();
    constexpr std::size_t kCols = 8;
    std::size_t j = 0;
    if (count == 4) {
        using Block = Eigen::Array<double, kCols, 1>;
        for (; j + kCols <= width; j += kCols) {
            Block acc0 = Block::Zero(), acc1 = Block::Zero(), acc2 = Block::Zero(), acc3 = Block::Zero();
            for (Eigen::Index k = 0; k < d; ++k) {
                const Eigen::Map<const Block> y(b.col(k).data() + j0 + j);
                const auto col = a.col(k);
                acc0 += (col[static_cast<Eigen::Index>(i0)] - y).square();
                acc1 += (col[static_cast<Eigen::Index>(i0 + 1)] - y).square();
                acc2 += (col[static_cast<Eigen::Index>(i0 + 2)] - y).square();
                acc3 += (col[static_cast<Eigen::Index>(i0 + 3)] - y).square();
            }
            Eigen::Map<Block>(out + j) = acc0;
            Eigen::Map<Block>(out + stride + j) = acc1;
            Eigen::Map<Block>(out + 2 * stride + j) = acc2;
            Eigen::Map<Block>(out + 3 * stride + j) = acc3;
        }
    }
    for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t jj = j; jj < width; ++jj) {
            double acc = 0.0;
            for (Eigen::Index k = 0; k < d; ++k) {
                const double diff = a(static_cast<Eigen::Index>(i0 + r), k) - b(static_cast<Eigen::Index>(j0 + jj), k);
                acc += diff * diff;
            }
            out[r * stride + jj] = acc;
        }
    }
}

}  // namespace

void PatchKernelParams::validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw ValidationError("patch kernel sigma must be positive and finite");
}

double gauss_kernel(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                    double sigma) {
    if (x.size() != y.size())
        throw DimensionMismatch("gauss_kernel: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    PatchKernelParams{sigma}.validate();
    double sq = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double diff = x[k] - y[k];
        sq += diff * diff;
    }
    return std::exp(-sq * inverse_bandwidth(sigma));
}

std::vector<double> cross_row_sums(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                   const PatchKernelParams& params, std::size_t tile) {
    if (a.cols() != b.cols())
        throw DimensionMismatch("bag dimensions differ: " + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.cols()));
    params.validate();
    tile = std::max<std::size_t>(tile, 1);
    const auto n = static_cast<std::size_t>(a.rows());
    const auto m = static_cast<std::size_t>(b.rows());
    const double scale = inverse_bandwidth(params.sigma);

    std::vector<double> rows(n, 0.0);
    constexpr std::size_t kRows = 4;
    // Rows padded to whole packets on an aligned buffer: the vectorized exp then
    // never falls back to its scalar path, whose rounding differs, for elements
    // that merely sit at an unaligned address.
    constexpr std::size_t kPad = 8;
    const std::size_t stride = (std::min(tile, m) + kPad - 1) / kPad * kPad;
    Eigen::ArrayXd sq = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(kRows * stride));
    for (std::size_t j0 = 0; j0 < m; j0 += tile) {
        const std::size_t width = std::min(tile, m - j0);
        const std::size_t padded = (width + kPad - 1) / kPad * kPad;
        for (std::size_t i0 = 0; i0 < n; i0 += kRows) {
            const std::size_t count = std::min(kRows, n - i0);
            squared_distances(a, b, i0, count, j0, width, stride, sq.data());
            for (std::size_t r = 0; r < count; ++r) {
                Eigen::Map<Eigen::ArrayXd, Eigen::AlignedMax> block(sq.data() + r * stride,
                                                                    static_cast<Eigen::Index>(padded));
                block = (block * -scale).exp();
                double row = rows[i0 + r];
                for (std::size_t j = 0; j < width; ++j) row += block[static_cast<Eigen::Index>(j)];
                rows[i0 + r] = row;
            }
        }
    }
    return rows;
}

double ordered_sum(std::span<const double> values) {
    double total = 0.0;
    for (double v : values) total += v;
    return total;
}

double self_sum(const EmbeddingBag& bag, const PatchKernelParams& params, std::size_t tile) {
    const auto rows = cross_row_sums(bag.vectors, bag.vectors, params, tile);
    return ordered_sum(rows);
}

double cross_sum(const EmbeddingBag& a, const EmbeddingBag& b, const PatchKernelParams& params, std::size_t tile) {
    const bool a_first = canonical_first(a.vectors, b.vectors);
    const auto& first = a_first ? a.vectors : b.vectors;
    const auto& second = a_first ? b.vectors : a.vectors;
    const auto rows = cross_row_sums(first, second, params, tile);
    return ordered_sum(rows);
}

double mmd_from_sums(double self_a, std::size_t n_a, double self_b, std::size_t n_b, double cross) {
    const double na = static_cast<double>(n_a);
    const double nb = static_cast<double>(n_b);
    const double value = self_a / (na * na) + self_b / (nb * nb) - 2.0 * cross / (na * nb);
    if (value < 0.0) {
        if (value >= -kClampTolerance) return 0.0;
        std::ostringstream msg;
        msg << "internal consistency: squared MMD " << value << " below -1e-12";
        throw Error(msg.str());
    }
    return value;
}

double mmd_sq(const EmbeddingBag& a, const EmbeddingBag& b, const PatchKernelParams& params, std::size_t tile) {
    if (a.dim() != b.dim())
        throw DimensionMismatch("mmd_sq: bag '" + a.id + "' has d=" + std::to_string(a.dim()) + ", bag '" + b.id +
                                "' has d=" + std::to_string(b.dim()));
    validate_bag(a);
    validate_bag(b);
    if (&a == &b) return 0.0;
    const double saa = self_sum(a, params, tile);
    const double sbb = self_sum(b, params, tile);
    const double sab = cross_sum(a, b, params, tile);
    return mmd_from_sums(saa, a.size(), sbb, b.size(), sab);
}

std::string distance_provenance(double sigma, const std::string& estimator) {
    return "mmd_sq(sigma=" + csv::format_double(sigma) + ",estimator=" + estimator + ")";
}

namespace {

DistanceMatrix pairwise_impl(const std::vector<const EmbeddingBag*>& bags, const PatchKernelParams& params,
                             const PairwiseOptions& options) {
    params.validate();
    if (bags.empty()) throw ValidationError("pairwise_distances: empty dataset");
    for (const auto* bag : bags) {
        validate_bag(*bag);
        if (bag->dim() != bags.front()->dim())
            throw DimensionMismatch("bag '" + bag->id + "' has d=" + std::to_string(bag->dim()) + ", expected d=" +
                                    std::to_string(bags.front()->dim()));
    }
    const std::size_t n = bags.size();
    DistanceMatrix out;
    out.sigma = params.sigma;
    out.estimator = kBiasedEstimator;
    out.provenance = distance_provenance(params.sigma, out.estimator);
    out.ids.reserve(n);
    for (const auto* bag : bags) out.ids.push_back(bag->id);
    out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

    std::vector<double> self(n);
    parallel_for(n, options.threads, [&](std::size_t i) { self[i] = self_sum(*bags[i], params, options.tile); });

    const std::size_t pairs = n * (n - 1) / 2;
    parallel_for(pairs, options.threads, [&](std::size_t p) {
        // Unrank p into (i, j), i < j, row-major over the strict upper triangle.
        std::size_t i = 0;
        std::size_t remaining = p;
        while (remaining >= n - 1 - i) {
            remaining -= n - 1 - i;
            ++i;
        }
        const std::size_t j = i + 1 + remaining;
        const auto& a = *bags[i];
        const auto& b = *bags[j];
        double cross = 0.0;
        try {
            cross = cross_sum(a, b, params, options.tile);
        } catch (const std::bad_alloc&) {
            throw Error("out of memory computing pair ('" + a.id + "', '" + b.id + "')");
        }
        const double value = mmd_from_sums(self[i], a.size(), self[j], b.size(), cross);
        out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
        out.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = value;
    });
    return out;
}

}  // namespace

DistanceMatrix pairwise_distances(std::span<const EmbeddingBag> bags, const PatchKernelParams& params,
                                  const PairwiseOptions& options) {
    std::vector<const EmbeddingBag*> ptrs;
    ptrs.reserve(bags.size());
    for (const auto& bag : bags) ptrs.push_back(&bag);
    return pairwise_impl(ptrs, params, options);
}

DistanceMatrix pairwise_distances(const DatasetView& view, const PatchKernelParams& params,
                                  const PairwiseOptions& options) {
    std::vector<const EmbeddingBag*> ptrs;
    ptrs.reserve(view.size());
    for (std::size_t k = 0; k < view.size(); ++k) ptrs.push_back(&view.bag(k));
    return pairwise_impl(ptrs, params, options);
}

double median_gamma(const DistanceMatrix& d) {
    if (d.values.size() == 0) throw ValidationError("median_gamma: empty matrix");
    std::vector<double> flat(d.values.data(), d.values.data() + d.values.size());
    const std::size_t count = flat.size();
    const std::size_t mid = count / 2;
    std::nth_element(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(mid), flat.end());
    const double upper = flat[mid];
    if (count % 2 == 1) return upper;
    const double lower = *std::max_element(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

KernelMatrix to_kernel(const DistanceMatrix& d, double gamma) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError("to_kernel: gamma must be finite and >= 0");
    KernelMatrix k;
    k.ids = d.ids;
    k.values = (-gamma * d.values.array()).exp().matrix();
    k.meta.sigma = d.sigma;
    k.meta.gamma = gamma;
    k.meta.estimator = d.estimator;
    k.meta.provenance = "exp(-gamma*D)[" + d.provenance + "]";
    return k;
}

PsdReport check_psd(const Eigen::MatrixXd& k, double tol) {
    if (k.rows() != k.cols()) throw ValidationError("check_psd: matrix is not square");
    if (k.size() == 0) return {0.0, true};
    const double asym = (k - k.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, k.cwiseAbs().maxCoeff()))
        throw ValidationError("check_psd: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(k, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw Error("check_psd: eigensolver failed");
    PsdReport report;
    report.min_eigenvalue = solver.eigenvalues().minCoeff();
    report.pass = report.min_eigenvalue >= -tol;
    return report;
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, std::span<const std::size_t> rows,
                          std::span<const std::size_t> cols) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (std::size_t r = 0; r < rows.size(); ++r)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                m(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
    return out;
}

DistanceMatrix subset(const DistanceMatrix& d, std::span<const std::size_t> indices) {
    DistanceMatrix out = d;
    out.ids.clear();
    for (auto i : indices) out.ids.push_back(d.ids.at(i));
    out.values = submatrix(d.values, indices, indices);
    return out;
}

KernelMatrix subset(const KernelMatrix& k, std::span<const std::size_t> indices) {
    KernelMatrix out;
    out.meta = k.meta;
    for (auto i : indices) out.ids.push_back(k.ids.at(i));
    out.values = submatrix(k.values, indices, indices);
    return out;
}

}  // namespace mmdk
