#pragma once

#include <span>

#include "mmdk/dual_model.hpp"
#include "mmdk/smo.hpp"

namespace mmdk {

// Epsilon-insensitive support vector regression on a square training kernel.
// Coefficients are (alpha_i - alpha*_i) in [-C, C], summing to zero.
DualModel fit_svr(const KernelMatrix& k_train, std::span<const double> y, double C, double epsilon,
                  const SmoOptions& options = {}, SmoSolution* solution = nullptr);

// Soft-margin binary SVM; labels in {-1, +1}. Coefficients are y_i alpha_i.
DualModel fit_svc(const KernelMatrix& k_train, std::span<const int> y, double C, const SmoOptions& options = {},
                  SmoSolution* solution = nullptr);

}  // namespace mmdk
