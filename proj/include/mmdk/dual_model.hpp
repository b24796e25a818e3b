#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "mmdk/mmd.hpp"

namespace mmdk {

enum class Task { svr, svc, survival };

std::string to_string(Task task);
// Accepts "svr", "svc", "surv" and "survival".
Task parse_task(const std::string& text);

struct Hyperparams {
    std::optional<double> C;
    std::optional<double> epsilon;
    std::optional<double> alpha;
    std::optional<double> gamma;
    std::optional<double> sigma;

    bool operator==(const Hyperparams&) const = default;
};

/// A trained kernel machine in dual form:
///   f(q) = sum_i coefficients[i] * K(train_i, q) (+ bias)
/// Survival models carry no bias; higher f means higher risk.
struct DualModel {
    Task task = Task::svr;
    std::vector<std::string> train_ids;
    Eigen::VectorXd coefficients;
    std::optional<double> bias;
    Hyperparams hyperparams;
    KernelMeta kernel_meta;  // kernel the model was trained against
};

// Checks the length and box/equality invariants; `C` taken from hyperparams.
void validate_model(const DualModel& model);

// K_cross has one row per training item and one column per query.
Eigen::VectorXd predict(const DualModel& model, const Eigen::MatrixXd& k_cross);

// Extracts K(train_i, query_q) from a full kernel after checking its meta
// against the model (MetaMismatch otherwise). Throws on unknown ids.
Eigen::MatrixXd cross_block(const DualModel& model, const KernelMatrix& kernel,
                            const std::vector<std::string>& query_ids);

void require_meta(const DualModel& model, const KernelMeta& meta);

void write_model(const DualModel& model, const std::string& path);
DualModel read_model(const std::string& path);

}  // namespace mmdk
