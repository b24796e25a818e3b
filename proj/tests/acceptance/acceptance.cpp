// Acceptance suite: one PASS/FAIL line per criterion. Run with criterion
// numbers as arguments to select a subset.

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "synth.hpp"
#include "mmdk/cli.hpp"
#include "mmdk/explain.hpp"
#include "mmdk/fusion.hpp"
#include "mmdk/retrieval.hpp"
#include "mmdk/stats.hpp"
#include "mmdk/survival_stats.hpp"
#include "mmdk/svm.hpp"
#include "mmdk/validation.hpp"

using namespace mmdk;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

unsigned cores() { return std::max(1u, std::min(8u, std::thread::hardware_concurrency())); }

std::vector<std::string> ids_of(const std::vector<EmbeddingBag>& bags) {
    std::vector<std::string> ids;
    for (const auto& b : bags) ids.push_back(b.id);
    return ids;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// ------------------------------------------------------------------ criteria

Outcome mmd_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    synth::Rng rng(101);
    std::uniform_int_distribution<int> size(1, 50), dim(1, 16);
    std::uniform_real_distribution<double> shift(0.0, 1.5);
    const double sigmas[] = {0.5, 2.0, 10.0};
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const int d = dim(rng);
        const auto a = synth::random_bag(rng, "a", size(rng), d);
        const auto b = synth::random_bag(rng, "b", size(rng), d, shift(rng));
        const double sigma = sigmas[t % 3];
        const double got = mmd_sq(a, b, {sigma});
        const double want = synth::naive_mmd_sq(a.vectors, b.vectors, sigma);
        worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), 1e-300));
    }
    const double elapsed = seconds_since(t0);
    return {worst <= 1e-10 && elapsed < 10.0,
            "max rel err " + fmt(worst, 3) + " (tol 1e-10), " + fmt(elapsed, 3) + " s (limit 10)"};
}

Outcome mercer() {
    const auto t0 = std::chrono::steady_clock::now();
    synth::Rng rng(202);
    std::uniform_int_distribution<int> size(5, 30);
    double worst = 1.0;
    int passed = 0;
    for (int t = 0; t < 20; ++t) {
        std::vector<EmbeddingBag> bags;
        for (int i = 0; i < 50; ++i)
            bags.push_back(synth::bag_around(rng, "b" + std::to_string(i), synth::gaussian(rng, 8, 1), size(rng)));
        const DistanceMatrix d = pairwise_distances(std::span<const EmbeddingBag>(bags), {1.0}, {kDefaultTile, cores()});
        const PsdReport r = check_psd(to_kernel(d, median_gamma(d)), 1e-8 * 50);
        worst = std::min(worst, r.min_eigenvalue);
        passed += r.pass;
    }
    const double elapsed = seconds_since(t0);
    return {passed == 20 && elapsed < 60.0, std::to_string(passed) + "/20 PSD at tol 5e-7, min eigenvalue " +
                                                fmt(worst, 3) + ", " + fmt(elapsed, 3) + " s (limit 60)"};
}

Outcome determinism() {
    synth::Rng rng(303);
    std::vector<EmbeddingBag> bags;
    std::uniform_int_distribution<int> size(10, 120);
    for (int i = 0; i < 40; ++i) bags.push_back(synth::random_bag(rng, "b" + std::to_string(i), size(rng), 16, 0.1 * i));
    const auto dir = synth::scratch("acceptance_det");
    std::vector<std::string> files;
    for (unsigned threads : {1u, 4u, 8u}) {
        const auto path = (dir / ("d" + std::to_string(threads) + ".smm")).string();
        write_distance(pairwise_distances(std::span<const EmbeddingBag>(bags), {}, {kDefaultTile, threads}), path);
        files.push_back(slurp(path) + slurp(path + ".meta.json"));
    }
    const bool same = files[0] == files[1] && files[0] == files[2];
    return {same, same ? "1/4/8 threads: identical SMM1 bytes (" + std::to_string(files[0].size()) + " bytes)"
                       : "SMM1 outputs differ across thread counts"};
}

Outcome two_sample() {
    const double shifts[] = {0.0, 0.5, 1.0, 2.0, 4.0};
    int ok = 0;
    for (int seed = 0; seed < 20; ++seed) {
        synth::Rng rng(4000 + static_cast<unsigned>(seed));
        const Eigen::VectorXd u = Eigen::VectorXd::Constant(8, 1.0 / std::sqrt(8.0));
        std::vector<double> v;
        for (double s : shifts) {
            const auto a = synth::bag_around(rng, "a", Eigen::VectorXd::Zero(8), 200);
            const auto b = synth::bag_around(rng, "b", s * u, 200);
            v.push_back(mmd_sq(a, b, {}));
        }
        ok += std::is_sorted(v.begin(), v.end(), std::less_equal<>()) &&
              std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
    }
    return {ok == 20, std::to_string(ok) + "/20 seeds strictly increasing over shifts {0, 0.5, 1, 2, 4}"};
}

Outcome retrieval() {
    synth::Rng rng(505);
    const auto dir = synth::scratch("acceptance_retrieval");
    std::vector<EmbeddingBag> bags;
    std::ofstream manifest(dir / "manifest.csv");
    manifest << "id,path,patient,cluster\n";
    for (int c = 0; c < 4; ++c) {
        Eigen::VectorXd center = Eigen::VectorXd::Zero(8);
        center[c] = 5.0;
        for (int i = 0; i < 25; ++i) {
            const std::string id = "c" + std::to_string(c) + "_" + std::to_string(i);
            const std::string patient = "p" + std::to_string(c) + "_" + std::to_string(i / 2);  // siblings share
            bags.push_back(synth::bag_around(rng, id, center, 40, 1.0, patient));
            manifest << id << ',' << id << ".smb," << patient << ",k" << c << '\n';
        }
    }
    manifest.close();
    const DatasetManifest m = read_manifest(dir / "manifest.csv");
    const DistanceMatrix d = pairwise_distances(std::span<const EmbeddingBag>(bags), {}, {kDefaultTile, cores()});
    const KernelMatrix k = to_kernel(d, median_gamma(d));
    const RetrievalIndex index(k, m);
    const double mmv = mmv_at_k(index, "cluster", 5);

    // Sort oracle: full sort of every eligible bag by (similarity desc, manifest row).
    std::size_t mismatches = 0;
    for (std::size_t q = 0; q < bags.size(); ++q) {
        std::vector<std::size_t> pool;
        for (std::size_t j = 0; j < bags.size(); ++j)
            if (j != q && bags[j].patient_id != bags[q].patient_id) pool.push_back(j);
        std::sort(pool.begin(), pool.end(), [&](std::size_t x, std::size_t y) {
            const double kx = k.values(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(x));
            const double ky = k.values(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(y));
            return kx != ky ? kx > ky : x < y;
        });
        const auto got = index.query_top_k(bags[q].id, 5);
        for (std::size_t r = 0; r < 5; ++r)
            if (got.neighbors[r].id != bags[pool[r]].id ||
                got.neighbors[r].similarity !=
                    k.values(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(pool[r])))
                ++mismatches;
    }
    return {mmv >= 95.0 && mismatches == 0,
            "mMV@5 " + fmt(mmv) + " (>= 95), sort-oracle mismatches " + std::to_string(mismatches)};
}

// Bags whose target is an affine function of the bag mean plus N(0, 0.1^2).
struct SvrSet {
    std::vector<EmbeddingBag> bags;
    std::vector<double> targets;
};

SvrSet svr_set(synth::Rng& rng, int n_bags) {
    SvrSet s;
    const Eigen::Vector4d w(0.8, -0.5, 0.3, 0.1);
    std::normal_distribution<double> noise(0.0, 0.1);
    for (int i = 0; i < n_bags; ++i) {
        const Eigen::VectorXd center = synth::gaussian(rng, 4, 1);
        auto bag = synth::bag_around(rng, "b" + std::to_string(i), center, 30, 0.5);
        const Eigen::VectorXd mean = bag.vectors.colwise().mean().transpose();
        s.targets.push_back(w.dot(mean) + 1.0 + noise(rng));
        s.bags.push_back(std::move(bag));
    }
    return s;
}

TaskData task_for(Task task, const std::vector<EmbeddingBag>& bags) {
    TaskData data;
    data.task = task;
    data.ids = ids_of(bags);
    for (const auto& b : bags) data.groups.push_back(b.patient_id);
    return data;
}

Outcome svr() {
    synth::Rng rng(606);
    const SvrSet s = svr_set(rng, 80);
    const DistanceMatrix d = pairwise_distances(std::span<const EmbeddingBag>(s.bags), {1.0}, {kDefaultTile, cores()});
    TaskData data = task_for(Task::svr, s.bags);
    data.targets = s.targets;
    CvOptions options;
    options.folds = 5;
    options.seed = 6;
    options.threads = cores();
    const FoldResults cv = cross_validate(KernelSource(d), data, options);

    // Tiny instances against the projected-gradient optimum of the dual.
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        const int n = 3 + t % 6;
        const SvrSet tiny = svr_set(rng, n);
        const DistanceMatrix dt = pairwise_distances(std::span<const EmbeddingBag>(tiny.bags), {1.0});
        const KernelMatrix kt = to_kernel(dt, median_gamma(dt));
        const double C = t % 2 ? 1.0 : 0.3, eps = 0.1;
        const DualModel model = fit_svr(kt, tiny.targets, C, eps);
        const double got = synth::svr_dual_value(kt.values, tiny.targets, eps, model.coefficients);
        const double want = synth::svr_dual_oracle(kt.values, tiny.targets, C, eps);
        worst = std::max(worst, std::abs(got - want));
    }
    return {cv.mean >= 0.9 && worst <= 1e-5, "5-fold mean SCC " + fmt(cv.mean) + " (>= 0.9); tiny QP max |obj diff| " +
                                                  fmt(worst, 3) + " (tol 1e-5)"};
}

Outcome svc() {
    synth::Rng rng(707);
    std::vector<EmbeddingBag> bags;
    TaskData data;
    for (int i = 0; i < 60; ++i) {
        const double y = i % 2 ? 1.0 : -1.0;
        Eigen::VectorXd center = synth::gaussian(rng, 4, 1, 0.3);
        center[0] += 2.0 * y;
        bags.push_back(synth::bag_around(rng, "b" + std::to_string(i), center, 25));
        data.targets.push_back(y);
    }
    const DistanceMatrix d = pairwise_distances(std::span<const EmbeddingBag>(bags), {1.0}, {kDefaultTile, cores()});
    const std::vector<double> targets = data.targets;
    data = task_for(Task::svc, bags);
    data.targets = targets;
    CvOptions options;
    options.folds = 4;
    options.seed = 7;
    options.threads = cores();
    const FoldResults cv = cross_validate(KernelSource(d), data, options);

    // Two points: alpha = min(C, 1 / (1 - k)), coefficients (alpha, -alpha), bias 0.
    double worst = 0.0;
    for (double k12 : {0.2, 0.5, 0.9}) {
        for (double C : {0.5, 100.0}) {
            KernelMatrix k;
            k.ids = {"x1", "x2"};
            k.values.resize(2, 2);
            k.values << 1.0, k12, k12, 1.0;
            const std::vector<int> y = {1, -1};
            const DualModel model = fit_svc(k, y, C);
            const double alpha = std::min(C, 1.0 / (1.0 - k12));
            worst = std::max({worst, std::abs(model.coefficients[0] - alpha), std::abs(model.coefficients[1] + alpha),
                              std::abs(model.bias.value_or(1.0))});
        }
    }
    return {cv.mean >= 0.95 && worst <= 1e-8,
            "4-fold mean AUC " + fmt(cv.mean) + " (>= 0.95); 2-point closed form max err " + fmt(worst, 3) +
                " (tol 1e-8)"};
}

Outcome survival() {
    synth::Rng rng(808);
    std::vector<EmbeddingBag> bags;
    std::vector<double> risk;
    for (int i = 0; i < 120; ++i) {
        const Eigen::VectorXd center = synth::gaussian(rng, 4, 1);
        bags.push_back(synth::bag_around(rng, "b" + std::to_string(i), center, 20, 0.5));
        risk.push_back(bags.back().vectors.colwise().mean().norm());
    }
    const auto records = synth::survival_times(rng, risk, 6.0, 0.3, kCensorHorizon, ids_of(bags));
    TaskData data = task_for(Task::survival, bags);
    std::size_t censored = 0;
    for (const auto& r : records) {
        data.targets.push_back(r.time);
        data.events.push_back(r.event);
        censored += !r.event;
    }
    const DistanceMatrix d = pairwise_distances(std::span<const EmbeddingBag>(bags), {1.0}, {kDefaultTile, cores()});
    CvOptions options;
    options.folds = 5;
    options.seed = 8;
    options.threads = cores();
    const FoldResults cv = cross_validate(KernelSource(d), data, options);

    // Analytic gradient against central differences.
    const KernelMatrix k = to_kernel(d, median_gamma(d));
    const SurvivalObjective objective(k.values, records, kDefaultAlpha);
    const Eigen::VectorXd beta = synth::gaussian(rng, 120, 1, 0.5);
    Eigen::VectorXd grad;
    objective.value_and_gradient(beta, grad);
    Eigen::VectorXd fd(120);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < 120; ++i) {
        Eigen::VectorXd up = beta, down = beta;
        up[i] += h;
        down[i] -= h;
        fd[i] = (objective.value(up) - objective.value(down)) / (2.0 * h);
    }
    const double rel = (fd - grad).norm() / grad.norm();
    const double truth = synth::naive_cindex(records, risk);
    return {cv.mean >= 0.85 && rel <= 1e-5,
            "5-fold mean C-index " + fmt(cv.mean) + " (>= 0.85, true-risk " + fmt(truth) + "), censored " + std::to_string(censored) +
                "/120; gradient rel err " + fmt(rel, 3) + " (tol 1e-5)"};
}

EmbeddingBag signal_bag(synth::Rng& rng, const std::string& id, bool positive, std::vector<std::size_t>* planted) {
    constexpr int kSize = 40;
    Eigen::MatrixXd m = synth::gaussian(rng, kSize, 4);
    if (positive) {
        std::vector<std::size_t> rows(kSize);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(3);
        for (auto r : rows) {
            m.row(static_cast<Eigen::Index>(r)) = synth::gaussian(rng, 1, 4, 0.25);
            m(static_cast<Eigen::Index>(r), 0) += 4.0;
        }
        if (planted) *planted = rows;
    }
    return make_bag(id, "p_" + id, std::move(m));
}

Outcome explainer() {
    synth::Rng rng(909);
    std::vector<EmbeddingBag> train;
    std::vector<int> y;
    for (int i = 0; i < 60; ++i) {
        train.push_back(signal_bag(rng, "t" + std::to_string(i), i % 2 == 1, nullptr));
        y.push_back(i % 2 ? 1 : -1);
    }
    const PatchKernelParams params{1.0};
    const DistanceMatrix d = pairwise_distances(std::span<const EmbeddingBag>(train), params, {kDefaultTile, cores()});
    const double gamma = median_gamma(d);
    const DualModel model = fit_svc(to_kernel(d, gamma), y, 10.0);
    const PatchExplainer explainer(model, train, params, gamma, cores());

    // Exactness: incremental deltas against removing each element from scratch.
    double worst = 0.0;
    for (int q = 0; q < 10; ++q) {
        synth::Rng local(9100 + static_cast<unsigned>(q));
        const auto bag = synth::random_bag(local, "q" + std::to_string(q), 5 + q * 3, 4, 0.2 * q);
        const SensitivityMap map = explainer.explain(bag);
        const double base = explainer.score(bag);
        for (Eigen::Index j = 0; j < bag.vectors.rows(); ++j) {
            Eigen::MatrixXd rest(bag.vectors.rows() - 1, bag.vectors.cols());
            rest << bag.vectors.topRows(j), bag.vectors.bottomRows(bag.vectors.rows() - j - 1);
            const double scratch = explainer.score(make_bag("r", "r", rest)) - base;
            worst = std::max(worst, std::abs(map.deltas[static_cast<std::size_t>(j)] - scratch));
        }
    }

    // Planted signal: every planted element inside the top decile of |delta|.
    int hits = 0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
        std::vector<std::size_t> planted;
        const auto bag = signal_bag(rng, "s" + std::to_string(t), true, &planted);
        const SensitivityMap map = explainer.explain(bag);
        std::vector<std::size_t> order(map.deltas.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(map.deltas[a]) > std::abs(map.deltas[b]);
        });
        const auto decile = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(order.size())));
        const std::set<std::size_t> top(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(decile));
        hits += std::all_of(planted.begin(), planted.end(), [&](std::size_t r) { return top.count(r) > 0; });
    }
    const double rate = static_cast<double>(hits) / trials;
    return {worst <= 1e-9 && rate >= 0.9, "max |incremental - scratch| " + fmt(worst, 3) +
                                              " (tol 1e-9); planted in top decile " + std::to_string(hits) + "/" +
                                              std::to_string(trials) + " (>= 90%)"};
}

Outcome fusion_gain() {
    int wins = 0;
    double single_sum[2] = {0.0, 0.0};
    std::string detail;
    for (int rep = 0; rep < 5; ++rep) {
        synth::Rng rng(1000 + static_cast<unsigned>(rep));
        const int n = 150;
        // Two independent latent risks, one per modality: z1 places the bag along
        // the first axis, z2 raises the on-probability of the first 100 topics.
        std::vector<EmbeddingBag> bags;
        std::vector<TopicProfile> topics;
        std::vector<double> risk;
        std::normal_distribution<double> latent(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int i = 0; i < n; ++i) {
            const std::string id = "p" + std::to_string(i);
            const double z1 = latent(rng), z2 = latent(rng);
            Eigen::VectorXd center = synth::gaussian(rng, 4, 1, 0.3);
            center[0] = z1;
            bags.push_back(synth::bag_around(rng, id, center, 20, 0.5, id));
            TopicProfile p{id, Eigen::VectorXd(200)};
            const double on = 1.0 / (1.0 + std::exp(-1.5 * z2));
            for (Eigen::Index t = 0; t < 200; ++t) p.topics[t] = unit(rng) < (t < 100 ? on : 0.5) ? 1.0 : 0.0;
            topics.push_back(std::move(p));
            risk.push_back(z1 + z2);
        }
        const auto records = synth::survival_times(rng, risk, 3.0, 0.3, kCensorHorizon, ids_of(bags));

        const DistanceMatrix d = pairwise_distances(std::span<const EmbeddingBag>(bags), {1.0}, {kDefaultTile, cores()});
        const KernelMatrix patch = to_kernel(d, median_gamma(d));
        const KernelMatrix topic = topic_kernel(topics);
        const std::vector<KernelMatrix> both = align(std::vector<KernelMatrix>{patch, topic});
        const KernelMatrix fused = combine(both, FusionMode::sum);

        TaskData data;
        data.task = Task::survival;
        data.ids = both[0].ids;
        std::map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < records.size(); ++i) pos[records[i].patient_id] = i;
        for (const auto& id : data.ids) {
            data.groups.push_back(id);
            data.targets.push_back(records[pos.at(id)].time);
            data.events.push_back(records[pos.at(id)].event);
        }
        CvOptions options;
        options.folds = 5;
        options.seed = 10 + static_cast<unsigned>(rep);
        options.threads = cores();
        const double c_patch = cross_validate(KernelSource(both[0]), data, options).mean;
        const double c_topic = cross_validate(KernelSource(both[1]), data, options).mean;
        const double c_sum = cross_validate(KernelSource(fused), data, options).mean;
        wins += c_sum > c_patch && c_sum > c_topic;
        single_sum[0] += c_patch;
        single_sum[1] += c_topic;
        detail += (rep ? "; " : "") + fmt(c_patch, 3) + "/" + fmt(c_topic, 3) + "->" + fmt(c_sum, 3);
    }
    const double m0 = single_sum[0] / 5.0, m1 = single_sum[1] / 5.0;
    const bool band = m0 >= 0.65 && m0 <= 0.75 && m1 >= 0.65 && m1 <= 0.75;
    return {wins == 5 && band, std::to_string(wins) + "/5 sum beats both (patch/topic->sum: " + detail +
                                   "); mean single C-index " + fmt(m0, 3) + ", " + fmt(m1, 3) + " (in [0.65, 0.75])"};
}

Outcome statistics() {
    std::vector<std::string> failed;
    auto check = [&](bool ok, const std::string& name) {
        if (!ok) failed.push_back(name);
    };
    const std::vector<double> a = {1, 2, 3, 4}, b = {1, 3, 2, 4};
    check(std::abs(spearman(a, b).rho - 0.8) <= 1e-12, "spearman 0.8");

    const std::vector<int> labels = {1, 1, 0, 0};
    const std::vector<double> scores = {0.9, 0.4, 0.5, 0.1};
    check(std::abs(auc_roc(labels, scores).auc - 0.75) <= 1e-12, "auc 0.75");

    const std::vector<SurvivalRecord> recs = {{"a", 1, true}, {"b", 2, true}, {"c", 3, false}};
    const std::vector<double> risks = {3, 1, 2};
    check(std::abs(concordance_index(recs, risks) - 2.0 / 3.0) <= 1e-12, "c-index 2/3");

    const std::vector<SurvivalRecord> km = {{"a", 2, true}, {"b", 3, false}, {"c", 4, false}, {"d", 5, false}};
    check(std::abs(km_curve(km).at(2.0) - 0.75) <= 1e-12, "km 0.75");

    const std::vector<double> x = {2, 3, 4, 5, 6, 7}, y = {1, 1, 1, 1, 1, 1};
    check(std::abs(wilcoxon_signed_rank(x, y, Alternative::greater) - 1.0 / 64.0) <= 1e-12, "wilcoxon 1/64");

    const std::vector<double> ps = {0.01, 0.02, 0.03, 0.04, 0.05};
    check(std::abs(aggregate_fold_pvalues(ps) - 0.06) <= 1e-12, "log-rank aggregation 0.06");

    std::string detail = failed.empty() ? "6/6 fixtures exact" : "failed:";
    for (const auto& f : failed) detail += " " + f;
    return {failed.empty(), detail};
}

Outcome defaults() {
    const char* argv[] = {"mmdk", "kernel", "--manifest", "m.csv", "--out", "o"};
    const cli::RunConfig parsed = cli::parse_args(6, argv);
    std::vector<std::string> failed;
    for (const cli::RunConfig& c : {cli::default_config(), parsed}) {
        if (c.sigma != 10.0 || kDefaultSigma != 10.0) failed.push_back("sigma");
        if (c.gamma.has_value()) failed.push_back("gamma");
        if (c.alpha != 0.0625 || kDefaultAlpha != 0.0625) failed.push_back("alpha");
        if (c.medoids != 25 || kDefaultMedoids != 25) failed.push_back("medoids");
        if (c.censor != 10.0 || kCensorHorizon != 10.0) failed.push_back("censor");
        if (c.auc_moderate != 0.6 || c.auc_strong != 0.7) failed.push_back("auc bins");
        if (c.topic_sigma != 10.0 || kTopicSigma != 10.0) failed.push_back("topic sigma");
    }
    if (bin_auc(0.5999999) != AucBin::weak || bin_auc(0.6) != AucBin::moderate || bin_auc(0.6999999) != AucBin::moderate ||
        bin_auc(0.7) != AucBin::strong)
        failed.push_back("auc bin boundaries");
    std::string detail = "sigma 10, gamma median, alpha 0.0625, K 25, T_censor 10, AUC bins 0.6/0.7";
    if (!failed.empty()) {
        detail = "mismatch:";
        for (const auto& f : failed) detail += " " + f;
    }
    return {failed.empty(), detail};
}

Outcome throughput() {
    synth::Rng rng(1313);
    std::vector<EmbeddingBag> bags;
    for (int i = 0; i < 200; ++i) {
        Eigen::MatrixXd m = synth::gaussian(rng, 500, 64);
        m = m.cast<float>().cast<double>();  // bag files store float32
        bags.push_back(make_bag("b" + std::to_string(i), "p" + std::to_string(i), std::move(m)));
    }
    const unsigned threads = cores();
    const auto t0 = std::chrono::steady_clock::now();
    const DistanceMatrix d = pairwise_distances(std::span<const EmbeddingBag>(bags), {}, {kDefaultTile, threads});
    const double elapsed = seconds_since(t0);
    return {elapsed < 120.0 && d.size() == 200,
            "200 x 500 x 64 in " + fmt(elapsed, 4) + " s on " + std::to_string(threads) + " thread(s) (limit 120)"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"MMD oracle equivalence", mmd_oracle},
        {"Mercer property of exp(-gamma D)", mercer},
        {"Thread-count determinism", determinism},
        {"Two-sample sensitivity", two_sample},
        {"Retrieval recovery", retrieval},
        {"SVR synthetic", svr},
        {"SVC synthetic", svc},
        {"Survival synthetic", survival},
        {"Explainer exactness", explainer},
        {"Fusion gain", fusion_gain},
        {"Statistics fixtures", statistics},
        {"Defaults audit", defaults},
        {"Throughput floor", throughput},
    };
    std::set<std::size_t> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::stoul(argv[i]));

    int failures = 0;
    for (std::size_t c = 0; c < criteria.size(); ++c) {
        if (!selected.empty() && !selected.count(c + 1)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[c].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s  %2zu  %-34s %s  [%.1f s]\n", o.pass ? "PASS" : "FAIL", c + 1, criteria[c].first.c_str(),
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
