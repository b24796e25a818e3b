#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

namespace mmdk {

/// Box-constrained dual QP over a precomputed kernel:
///
///   min  0.5 a'Qa + p'a   s.t.  y'a = 0,  0 <= a_t <= C
///
/// with Q_st = y_s y_t K(index_s, index_t). SVC uses one variable per sample;
/// SVR uses two (index repeats, y = +1 then -1).
struct SmoProblem {
    const Eigen::MatrixXd* kernel = nullptr;
    std::vector<std::size_t> index;
    std::vector<int> y;
    std::vector<double> p;
    double C = 1.0;
};

struct SmoOptions {
    double tolerance = 1e-6;         // max KKT violation at exit
    std::size_t max_iterations = 0;  // 0 = max(10^7, 100 * variables)
    bool record_objective = false;
};

struct SmoSolution {
    std::vector<double> alpha;
    std::vector<double> gradient;  // Qa + p
    double rho = 0.0;              // decision = sum y_t a_t K - rho
    double objective = 0.0;
    double kkt_gap = 0.0;
    std::size_t iterations = 0;
    std::vector<double> objective_trace;  // after each update, if requested
};

// Second-order working-set selection (maximal violating pair refined by the
// curvature-aware gain). Throws ConvergenceError with the final gap at the cap.
SmoSolution solve_smo(const SmoProblem& problem, const SmoOptions& options = {});

}  // namespace mmdk
