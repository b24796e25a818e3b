#include <doctest.h>

#include <fstream>

#include "mmdk/error.hpp"
#include "mmdk/fusion.hpp"
#include "synth.hpp"

using namespace mmdk;

namespace {

KernelMatrix kernel_of(std::vector<std::string> ids, Eigen::MatrixXd values, const std::string& tag = "k") {
    KernelMatrix k;
    k.ids = std::move(ids);
    k.values = std::move(values);
    k.meta.provenance = tag;
    return k;
}

std::vector<std::string> names(std::size_t n) {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back("p" + std::to_string(i));
    return v;
}

}  // namespace

TEST_CASE("topic_kernel") {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(200), b = a, c = a;
    for (int t = 0; t < 7; ++t) b[t * 3] = 1.0;
    c[5] = 1.0;
    const std::vector<TopicProfile> p = {{"A", a}, {"B", b}, {"C", c}, {"D", a}};
    const auto k = topic_kernel(p);
    CHECK(k.values(0, 3) == 1.0);
    CHECK(k.values(0, 1) == doctest::Approx(std::exp(-7.0 / 200.0)).epsilon(1e-15));
    CHECK(k.values(1, 2) == doctest::Approx(std::exp(-8.0 / 200.0)).epsilon(1e-15));
    CHECK(k.values == k.values.transpose());
    CHECK(k.meta.sigma == kTopicSigma);

    Eigen::VectorXd bad = a;
    bad[0] = 0.5;
    CHECK_THROWS_AS(topic_kernel(std::vector<TopicProfile>{{"A", a}, {"B", bad}}), ValidationError);
    CHECK_THROWS_AS(topic_kernel(std::vector<TopicProfile>{{"A", a}, {"B", Eigen::VectorXd::Zero(3)}}),
                    DimensionMismatch);
}

TEST_CASE("read_topics") {
    const auto dir = synth::scratch("fusion_topics");
    {
        std::ofstream out(dir / "t.csv");
        out << "patient_id,t0,t1,t2\nA,0,1,1\nB,1,0,0\n";
    }
    const auto p = read_topics(dir / "t.csv");
    REQUIRE(p.size() == 2);
    CHECK(p[1].patient_id == "B");
    CHECK(p[0].topics == Eigen::Vector3d(0, 1, 1));
    {
        std::ofstream out(dir / "dup.csv");
        out << "patient_id,t0\nA,0\nA,1\n";
    }
    CHECK_THROWS_AS(read_topics(dir / "dup.csv"), ValidationError);
    {
        std::ofstream out(dir / "hdr.csv");
        out << "who,t0\nA,0\n";
    }
    CHECK_THROWS_AS(read_topics(dir / "hdr.csv"), FormatError);
}

TEST_CASE("align") {
    Eigen::MatrixXd a(3, 3), b(3, 3);
    a << 1, .1, .2, .1, 1, .3, .2, .3, 1;
    b << 1, .4, .5, .4, 1, .6, .5, .6, 1;
    const auto out = align(std::vector<KernelMatrix>{kernel_of({"A", "B", "C"}, a), kernel_of({"D", "C", "B"}, b)});
    REQUIRE(out.size() == 2);
    CHECK(out[0].ids == std::vector<std::string>{"B", "C"});
    CHECK(out[1].ids == std::vector<std::string>{"B", "C"});
    CHECK(out[0].values(0, 1) == 0.3);
    CHECK(out[1].values(0, 1) == 0.6);

    const auto same = align(std::vector<KernelMatrix>{kernel_of({"C", "A", "B"}, a), kernel_of({"A", "B", "C"}, b)});
    CHECK(same[0].ids == std::vector<std::string>{"A", "B", "C"});
    CHECK(same[0].values(0, 1) == a(1, 2));
    CHECK(same[1].values == b);
    CHECK_THROWS_AS(align(std::vector<KernelMatrix>{kernel_of({"A"}, Eigen::MatrixXd::Ones(1, 1)),
                                                    kernel_of({"B"}, Eigen::MatrixXd::Ones(1, 1))}),
                    ValidationError);
}

TEST_CASE("combine") {
    const auto ids = names(3);
    const auto ones = kernel_of(ids, Eigen::MatrixXd::Ones(3, 3), "a");
    const auto sum = combine(std::vector<KernelMatrix>{ones, ones}, FusionMode::sum);
    CHECK(sum.values == Eigen::MatrixXd::Ones(3, 3));
    CHECK(sum.meta.provenance == "sum/2[a;a]");
    CHECK(combine(std::vector<KernelMatrix>{ones, ones}, FusionMode::sum, false).values ==
          Eigen::MatrixXd::Constant(3, 3, 2.0));

    synth::Rng rng(61);
    const auto r = kernel_of(ids, synth::random_psd(rng, 3), "r");
    const auto masked = combine(std::vector<KernelMatrix>{r, kernel_of(ids, Eigen::MatrixXd::Identity(3, 3), "i")},
                                FusionMode::product);
    CHECK(masked.values == Eigen::MatrixXd(r.values.diagonal().asDiagonal()));
    CHECK(masked.meta.provenance == "product[r;i]");

    CHECK_THROWS_AS(combine(std::vector<KernelMatrix>{ones}, FusionMode::sum), ValidationError);
    CHECK_THROWS_AS(combine(std::vector<KernelMatrix>{ones, kernel_of({"p2", "p1", "p0"}, ones.values)},
                            FusionMode::sum),
                    ValidationError);
    CHECK(parse_fusion_mode("product") == FusionMode::product);
    CHECK_THROWS_AS(parse_fusion_mode("mean"), ValidationError);
}

TEST_CASE("fusion keeps kernels positive semi-definite") {
    synth::Rng rng(62);
    for (int t = 0; t < 20; ++t) {
        const auto n = static_cast<std::size_t>(5 + t);
        const auto ids = names(n);
        const std::vector<KernelMatrix> pair = {kernel_of(ids, synth::random_psd(rng, static_cast<Eigen::Index>(n))),
                                                kernel_of(ids, synth::random_psd(rng, static_cast<Eigen::Index>(n)))};
        const double tol = 1e-8 * static_cast<double>(n);
        CHECK(check_psd(combine(pair, FusionMode::sum), tol).pass);
        CHECK(check_psd(combine(pair, FusionMode::product), tol).pass);
    }
}

TEST_CASE("fusion is order independent") {
    synth::Rng rng(63);
    const auto ids = names(6);
    const auto a = kernel_of(ids, synth::random_psd(rng, 6)), b = kernel_of(ids, synth::random_psd(rng, 6)),
               c = kernel_of(ids, synth::random_psd(rng, 6));
    for (auto mode : {FusionMode::sum, FusionMode::product}) {
        const auto ab = combine(std::vector<KernelMatrix>{a, b}, mode, false);
        const auto ba = combine(std::vector<KernelMatrix>{b, a}, mode, false);
        CHECK(ab.values == ba.values);
        const auto left = combine(std::vector<KernelMatrix>{ab, c}, mode, false);
        const auto right = combine(std::vector<KernelMatrix>{a, combine(std::vector<KernelMatrix>{b, c}, mode, false)},
                                   mode, false);
        CHECK((left.values - right.values).cwiseAbs().maxCoeff() <= 1e-15);
    }

    // Aligning then combining equals combining inputs that were aligned by hand.
    const auto extra = kernel_of({"p5", "p1", "p3", "zz"}, synth::random_psd(rng, 4));
    const auto aligned = align(std::vector<KernelMatrix>{a, extra});
    const std::vector<std::size_t> ia = {1, 3, 5}, ie = {1, 2, 0};
    const std::vector<KernelMatrix> manual = {subset(a, ia), subset(extra, ie)};
    CHECK(combine(aligned, FusionMode::sum).values == combine(manual, FusionMode::sum).values);
}

TEST_CASE("relabel_by_patient") {
    DatasetManifest m;
    m.rows = {{"b1", "b1.smb", "P1", {}}, {"b2", "b2.smb", "P2", {}}};
    const auto k = relabel_by_patient(kernel_of({"b2", "b1"}, Eigen::MatrixXd::Identity(2, 2)), m);
    CHECK(k.ids == std::vector<std::string>{"P2", "P1"});
    m.rows[1].patient_id = "P1";
    CHECK_THROWS_AS(relabel_by_patient(kernel_of({"b2", "b1"}, Eigen::MatrixXd::Identity(2, 2)), m), ValidationError);
}
