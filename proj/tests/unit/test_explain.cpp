#include <doctest.h>

#include <numeric>
#include <set>

#include "mmdk/error.hpp"
#include "mmdk/explain.hpp"
#include "mmdk/svm.hpp"
#include "synth.hpp"

using namespace mmdk;

namespace {

struct Trained {
    std::vector<EmbeddingBag> bags;
    DualModel model;
    double gamma = 0.0;
};

Trained train(std::uint64_t seed, const PatchKernelParams& params) {
    synth::Rng rng(seed);
    Trained t;
    std::vector<int> y;
    for (int i = 0; i < 16; ++i) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(3);
        c[0] = i % 2 ? 1.5 : -1.5;
        t.bags.push_back(synth::bag_around(rng, "t" + std::to_string(i), c, 6 + i % 4));
        y.push_back(i % 2 ? 1 : -1);
    }
    const auto d = pairwise_distances(std::span<const EmbeddingBag>(t.bags), params);
    t.gamma = median_gamma(d);
    t.model = fit_svc(to_kernel(d, t.gamma), y, 1.0);
    return t;
}

// Sum of |x_i - x_m| over points to their nearest medoid, by exhaustive search.
double best_cost(const Eigen::MatrixXd& d, std::size_t k, std::vector<std::size_t>& best) {
    const auto n = static_cast<std::size_t>(d.rows());
    double cost = std::numeric_limits<double>::infinity();
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
    do {
        std::vector<std::size_t> set;
        for (std::size_t i = 0; i < n; ++i)
            if (pick[i]) set.push_back(i);
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double m = std::numeric_limits<double>::infinity();
            for (auto s : set) m = std::min(m, d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)));
            c += m;
        }
        if (c < cost) {
            cost = c;
            best = set;
        }
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return cost;
}

PatchCandidate candidate(const std::string& id, double x) {
    Eigen::VectorXd v(1);
    v << x;
    return {id, "P" + id, 0.0, v};
}

}  // namespace

TEST_CASE("minmax_normalize") {
    CHECK(minmax_normalize(std::vector<double>{0, 5, 10}) == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(minmax_normalize(std::vector<double>{3, 3, 3}) == std::vector<double>{0.5, 0.5, 0.5});
    CHECK(minmax_normalize(std::vector<double>{-2, 0, 2}) == std::vector<double>{0.0, 0.5, 1.0});
    CHECK_THROWS_AS(minmax_normalize(std::vector<double>{}), ValidationError);
}

TEST_CASE("identical elements are equally important") {
    const PatchKernelParams params{2.0};
    const auto t = train(51, params);
    const PatchExplainer ex(t.model, t.bags, params, t.gamma);
    Eigen::MatrixXd same(7, 3);
    same.rowwise() = Eigen::RowVector3d(0.2, -0.4, 1.0);
    const auto map = ex.explain(make_bag("q", "pq", same));
    for (double d : map.deltas) CHECK(std::abs(d - map.deltas[0]) <= 1e-10);
    for (double v : map.normalized) CHECK(v == 0.5);
}

TEST_CASE("downdates agree with recomputation") {
    const PatchKernelParams params{1.0};
    const auto t = train(52, params);
    const PatchExplainer ex(t.model, t.bags, params, t.gamma, 3);
    synth::Rng rng(53);
    const auto q = synth::random_bag(rng, "q", 11, 3, 0.3);
    const auto map = ex.explain(q);
    CHECK(map.baseline == doctest::Approx(ex.score(q)).epsilon(1e-12));
    for (Eigen::Index j : {0, 3, 5, 7, 10}) {
        Eigen::MatrixXd rest(10, 3);
        rest << q.vectors.topRows(j), q.vectors.bottomRows(10 - j);
        CHECK(std::abs(map.deltas[static_cast<std::size_t>(j)] - (ex.score(make_bag("r", "r", rest)) - ex.score(q))) <=
              1e-9);
    }
    CHECK(patch_sensitivity(t.model, t.bags, q, params, t.gamma).deltas == map.deltas);
}

TEST_CASE("explainer guards") {
    const PatchKernelParams params{1.0};
    const auto t = train(54, params);
    CHECK_THROWS_AS(PatchExplainer(t.model, t.bags, PatchKernelParams{2.0}, t.gamma), MetaMismatch);
    CHECK_THROWS_AS(PatchExplainer(t.model, t.bags, params, 2.0 * t.gamma), MetaMismatch);
    const PatchExplainer ex(t.model, t.bags, params, t.gamma);
    CHECK_THROWS_AS(ex.explain(make_bag("one", "p", Eigen::MatrixXd::Zero(1, 3))), ValidationError);
    std::vector<EmbeddingBag> missing(t.bags.begin() + 1, t.bags.end());
    CHECK_THROWS_AS(PatchExplainer(t.model, missing, params, t.gamma), Error);
}

TEST_CASE("select_extreme_patches") {
    Eigen::MatrixXd a(3, 1), b(2, 1), c(2, 1);
    a << 1, 2, 3;
    b << 4, 5;
    c << 6, 7;
    const std::vector<EmbeddingBag> bags = {make_bag("a", "P1", a), make_bag("b", "P1", b), make_bag("c", "P2", c)};
    std::vector<SensitivityMap> maps(3);
    maps[0].deltas = {0.1, 0.9, -0.5};
    maps[1].deltas = {0.3, -0.7};
    maps[2].deltas = {0.2, 0.2};
    const auto high = select_extreme_patches(bags, maps, Extreme::highest, 1);
    REQUIRE(high.size() == 2);
    CHECK(high[0].patch_id == "a#1");
    CHECK(high[0].vector[0] == 2.0);
    CHECK((high[1].patch_id == "c#0" || high[1].patch_id == "c#1"));
    const auto low = select_extreme_patches(bags, maps, Extreme::lowest, 1);
    CHECK(low[0].patch_id == "b#1");
    CHECK(select_extreme_patches(bags, maps, Extreme::highest, 9)[1].patch_id ==
          select_extreme_patches(bags, maps, Extreme::highest, 9)[1].patch_id);

    std::set<std::string> seen;
    for (std::uint64_t s = 0; s < 40; ++s) seen.insert(select_extreme_patches(bags, maps, Extreme::highest, s)[1].patch_id);
    CHECK(seen.size() == 2);
}

TEST_CASE("pam matches exhaustive search") {
    const std::vector<double> xs = {0.0, 0.3, 0.4, 1.1, 10.0, 10.2, 10.9, 11.0};
    std::vector<PatchCandidate> cands;
    for (std::size_t i = 0; i < xs.size(); ++i) cands.push_back(candidate(std::to_string(i), xs[i]));
    const Eigen::MatrixXd d = euclidean_distances(cands);
    std::vector<std::size_t> want;
    const double cost = best_cost(d, 2, want);
    const auto got = pam(d, 2);
    CHECK(got.cost == doctest::Approx(cost).epsilon(1e-12));
    CHECK(got.medoids == want);
    for (std::size_t t = 1; t < got.cost_trace.size(); ++t) CHECK(got.cost_trace[t] < got.cost_trace[t - 1]);

    synth::Rng rng(55);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<PatchCandidate> random;
        for (int i = 0; i < 9; ++i) {
            PatchCandidate c{"r" + std::to_string(i), "P", 0.0, synth::gaussian(rng, 2, 1)};
            random.push_back(c);
        }
        const Eigen::MatrixXd rd = euclidean_distances(random);
        std::vector<std::size_t> ignored;
        // A local optimum of the swap neighbourhood; on points this small it is
        // normally global, and can never beat the exhaustive optimum.
        CHECK(pam(rd, 3).cost >= best_cost(rd, 3, ignored) - 1e-12);
    }
}

TEST_CASE("representative_patches") {
    std::vector<PatchCandidate> cands;
    for (int i = 0; i < 5; ++i) cands.push_back(candidate("c" + std::to_string(i), i * i));
    auto all = representative_patches(cands, 5);
    std::sort(all.begin(), all.end());
    CHECK(all == std::vector<std::string>{"c0", "c1", "c2", "c3", "c4"});

    const std::vector<double> xs = {0.0, 0.2, 0.5, 5.0, 5.1, 5.7};
    std::vector<PatchCandidate> base, doubled;
    for (std::size_t i = 0; i < xs.size(); ++i) base.push_back(candidate("x" + std::to_string(i), xs[i]));
    doubled = base;
    doubled.insert(doubled.end(), base.begin(), base.end());
    auto a = representative_patches(base, 2);
    auto b = representative_patches(doubled, 2);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    CHECK(a == std::vector<std::string>{"x1", "x4"});
    CHECK_THROWS_AS(representative_patches(base, 7), ValidationError);
}
