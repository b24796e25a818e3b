#include "mmdk/svm.hpp"

#include <cmath>

#include "mmdk/error.hpp"

namespace mmdk {

namespace {

void check_square(const KernelMatrix& k, std::size_t n, const char* who) {
    if (k.values.rows() != k.values.cols()) throw DimensionMismatch(std::string(who) + ": kernel is not square");
    if (static_cast<std::size_t>(k.values.rows()) != n)
        throw DimensionMismatch(std::string(who) + ": kernel has " + std::to_string(k.values.rows()) +
                                " rows but " + std::to_string(n) + " targets were given");
    if (k.ids.size() != n) throw DimensionMismatch(std::string(who) + ": kernel id count mismatch");
    if (n == 0) throw ValidationError(std::string(who) + ": empty training set");
}

}  // namespace

DualModel fit_svr(const KernelMatrix& k_train, std::span<const double> y, double C, double epsilon,
                  const SmoOptions& options, SmoSolution* solution) {
    const std::size_t n = y.size();
    check_square(k_train, n, "fit_svr");
    if (!(C > 0.0)) throw ValidationError("fit_svr: C must be positive");
    if (!(epsilon >= 0.0)) throw ValidationError("fit_svr: epsilon must be nonnegative");
    for (double v : y)
        if (!std::isfinite(v)) throw ValidationError("fit_svr: non-finite target");

    SmoProblem problem;
    problem.kernel = &k_train.values;
    problem.C = C;
    problem.index.resize(2 * n);
    problem.y.resize(2 * n);
    problem.p.resize(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        problem.index[i] = i;
        problem.y[i] = +1;
        problem.p[i] = epsilon - y[i];
        problem.index[n + i] = i;
        problem.y[n + i] = -1;
        problem.p[n + i] = epsilon + y[i];
    }
    SmoSolution sol = solve_smo(problem, options);

    DualModel model;
    model.task = Task::svr;
    model.train_ids = k_train.ids;
    model.coefficients.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        model.coefficients[static_cast<Eigen::Index>(i)] = sol.alpha[i] - sol.alpha[n + i];
    model.bias = -sol.rho;
    model.hyperparams.C = C;
    model.hyperparams.epsilon = epsilon;
    model.hyperparams.gamma = k_train.meta.gamma;
    model.hyperparams.sigma = k_train.meta.sigma;
    model.kernel_meta = k_train.meta;
    if (solution) *solution = std::move(sol);
    return model;
}

DualModel fit_svc(const KernelMatrix& k_train, std::span<const int> y, double C, const SmoOptions& options,
                  SmoSolution* solution) {
    const std::size_t n = y.size();
    check_square(k_train, n, "fit_svc");
    if (!(C > 0.0)) throw ValidationError("fit_svc: C must be positive");
    bool pos = false;
    bool neg = false;
    for (int v : y) {
        if (v == 1)
            pos = true;
        else if (v == -1)
            neg = true;
        else
            throw ValidationError("fit_svc: labels must be -1 or +1");
    }
    if (!pos || !neg) throw ValidationError("fit_svc: training labels contain a single class");

    SmoProblem problem;
    problem.kernel = &k_train.values;
    problem.C = C;
    problem.index.resize(n);
    problem.y.assign(y.begin(), y.end());
    problem.p.assign(n, -1.0);
    for (std::size_t i = 0; i < n; ++i) problem.index[i] = i;
    SmoSolution sol = solve_smo(problem, options);

    DualModel model;
    model.task = Task::svc;
    model.train_ids = k_train.ids;
    model.coefficients.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) model.coefficients[static_cast<Eigen::Index>(i)] = y[i] * sol.alpha[i];
    model.bias = -sol.rho;
    model.hyperparams.C = C;
    model.hyperparams.gamma = k_train.meta.gamma;
    model.hyperparams.sigma = k_train.meta.sigma;
    model.kernel_meta = k_train.meta;
    if (solution) *solution = std::move(sol);
    return model;
}

}  // namespace mmdk
