#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmdk/dual_model.hpp"

namespace mmdk {

inline constexpr double kDefaultAlpha = 0.0625;
inline constexpr double kCensorHorizon = 10.0;  // years

struct SurvivalRecord {
    std::string patient_id;
    double time = 0.0;  // years, > 0
    bool event = false;
};

// Throws ValidationError on time <= 0 or non-finite time.
void validate_records(std::span<const SurvivalRecord> records);

// Truncates follow-up at `horizon`: later times become `horizon` and are censored.
std::vector<SurvivalRecord> censor_at(std::span<const SurvivalRecord> records, double horizon = kCensorHorizon);

// All (i, j) with time_i < time_j and event_i, i.e. i should be ranked riskier.
std::vector<std::pair<std::size_t, std::size_t>> comparable_pairs(std::span<const SurvivalRecord> records);

/// Ranking objective of the kernel survival SVM (squared hinge on pairs):
///
///   R(beta) = alpha/2 beta'K beta + 1/2 sum_{(i,j) in P} max(0, 1 - (f_i - f_j))^2,  f = K beta
class SurvivalObjective {
public:
    SurvivalObjective(const Eigen::MatrixXd& kernel, std::span<const SurvivalRecord> records, double alpha);

    double value(const Eigen::VectorXd& beta) const;
    // Returns R and writes the gradient K(alpha beta + g).
    double value_and_gradient(const Eigen::VectorXd& beta, Eigen::VectorXd& gradient) const;

    struct Evaluation {
        double value = 0.0;
        Eigen::VectorXd f;         // K beta
        Eigen::VectorXd rkhs;      // alpha beta + g, the gradient in the K inner product
        Eigen::VectorXd gradient;  // K rkhs
    };
    Evaluation evaluate(const Eigen::VectorXd& beta) const;

    std::size_t pair_count() const { return pairs_.size(); }
    std::size_t size() const { return static_cast<std::size_t>(kernel_.rows()); }

private:
    const Eigen::MatrixXd& kernel_;
    std::vector<std::pair<std::size_t, std::size_t>> pairs_;
    double alpha_;
};

struct SurvivalOptions {
    double tolerance_per_pair = 1e-6;  // exit when |grad| <= tolerance_per_pair * |P|
    std::size_t max_iterations = 50'000;
    std::size_t history = 12;
};

struct SurvivalFitInfo {
    std::size_t iterations = 0;
    double gradient_norm = 0.0;
    double objective = 0.0;
    std::vector<double> objective_trace;
};

DualModel fit_survival(const KernelMatrix& k_train, std::span<const SurvivalRecord> records, double alpha,
                       const SurvivalOptions& options = {}, SurvivalFitInfo* info = nullptr);

}  // namespace mmdk
