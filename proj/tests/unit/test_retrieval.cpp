#include <doctest.h>

#include "mmdk/error.hpp"
#include "mmdk/retrieval.hpp"
#include "synth.hpp"

using namespace mmdk;

namespace {

DatasetManifest manifest_of(const std::vector<std::array<std::string, 3>>& rows) {
    DatasetManifest m;
    m.label_columns = {"label"};
    for (const auto& [id, patient, label] : rows) m.rows.push_back({id, id + ".smb", patient, {{"label", label}}});
    return m;
}

KernelMatrix kernel_of(std::vector<std::string> ids, Eigen::MatrixXd values) {
    KernelMatrix k;
    k.ids = std::move(ids);
    k.values = std::move(values);
    return k;
}

}  // namespace

TEST_CASE("query_top_k on a hand-built kernel") {
    Eigen::MatrixXd v(3, 3);
    v << 1.0, 0.9, 0.2, 0.9, 1.0, 0.5, 0.2, 0.5, 1.0;
    const auto k = kernel_of({"q", "x", "y"}, v);
    const auto m = manifest_of({{"q", "P1", "A"}, {"x", "P2", "A"}, {"y", "P3", "B"}});
    const RetrievalIndex index(k, m);
    const auto r = index.query_top_k("q", 2);
    REQUIRE(r.neighbors.size() == 2);
    CHECK(r.neighbors[0].id == "x");
    CHECK(r.neighbors[0].similarity == 0.9);
    CHECK(r.neighbors[1].id == "y");
    for (const auto& n : r.neighbors) CHECK(n.id != "q");
    CHECK(index.pool_size("q") == 2);

    const auto same = manifest_of({{"q", "P1", "A"}, {"x", "P1", "A"}, {"y", "P1", "B"}});
    const RetrievalIndex blocked(k, same);
    CHECK_THROWS_AS(blocked.query_top_k("q", 1), ValidationError);
    CHECK_THROWS_AS(index.query_top_k("nope", 1), ValidationError);
}

TEST_CASE("equal similarities keep manifest order") {
    Eigen::MatrixXd v = Eigen::MatrixXd::Constant(4, 4, 0.5);
    v.diagonal().setOnes();
    const auto k = kernel_of({"a", "b", "c", "d"}, v);
    const auto m = manifest_of({{"d", "P4", "A"}, {"c", "P3", "A"}, {"b", "P2", "A"}, {"a", "P1", "A"}});
    const auto r = RetrievalIndex(k, m).query_top_k("a", 3);
    CHECK(r.neighbors[0].id == "d");
    CHECK(r.neighbors[1].id == "c");
    CHECK(r.neighbors[2].id == "b");
}

TEST_CASE("site restriction narrows the pool") {
    Eigen::MatrixXd v = Eigen::MatrixXd::Constant(3, 3, 0.3);
    v.diagonal().setOnes();
    const auto k = kernel_of({"a", "b", "c"}, v);
    DatasetManifest m = manifest_of({{"a", "P1", "A"}, {"b", "P2", "A"}, {"c", "P3", "A"}});
    m.label_columns.push_back("site");
    m.rows[0].labels["site"] = "s1";
    m.rows[1].labels["site"] = "s2";
    m.rows[2].labels["site"] = "s1";
    const RetrievalIndex index(k, m, "site");
    CHECK(index.pool_size("a") == 1);
    CHECK(index.query_top_k("a", 1).neighbors[0].id == "c");
}

TEST_CASE("majority vote tie rule") {
    CHECK(majority_vote_hit("A", {"A", "B", "A", "B", "C"}));
    CHECK_FALSE(majority_vote_hit("A", {"B", "A", "A", "B", "C"}));
    CHECK(majority_vote_hit("A", {"B", "A", "A", "C", "D"}));
    CHECK_FALSE(majority_vote_hit("Z", {"A", "A", "B", "B", "C"}));
}

TEST_CASE("mmv_at_k") {
    synth::Rng rng(41);
    std::vector<EmbeddingBag> bags;
    std::vector<std::array<std::string, 3>> rows;
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 8; ++i) {
            Eigen::VectorXd center = Eigen::VectorXd::Zero(3);
            center[c] = 6.0;
            const std::string id = "b" + std::to_string(c) + std::to_string(i);
            bags.push_back(synth::bag_around(rng, id, center, 10, 0.5));
            rows.push_back({id, "P" + id, c ? "B" : "A"});
        }
    const auto d = pairwise_distances(std::span<const EmbeddingBag>(bags), {1.0});
    const auto k = to_kernel(d, median_gamma(d));
    const auto m = manifest_of(rows);
    const RetrievalIndex index(k, m);
    CHECK(mmv_at_k(index, "label", 5) == 100.0);

    // A label nobody else carries can never win the vote.
    auto unique = m;
    unique.rows[0].labels["label"] = "C";
    const auto report = mmv_report(RetrievalIndex(k, unique), "label", 5);
    CHECK(report.per_label.at("C") == std::pair<std::size_t, std::size_t>{0, 1});
    CHECK(report.mmv == doctest::Approx(100.0 * 15.0 / 16.0));
}
