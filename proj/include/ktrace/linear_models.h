#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ktrace/features.h"
#include "ktrace/prep.h"

namespace ktrace {

// Per-item empirical correctness with a global fallback.
struct BaselineModel {
  std::map<std::string, double> item_probability;
  double global_mean = 0.5;

  double predict(const std::string& question_id) const;
};

// Throws UsageError on an empty training set.
BaselineModel fit_baseline(const Dataset& train);

// Predictions for every interaction in learner-id/time order, matching the
// row order produced by encode().
std::vector<double> predict_baseline(const BaselineModel& model, const Dataset& test);

struct LogisticOptions {
  // Ridge strength on the weights under sklearn's convention: the objective
  // is sum of log-losses + (l2 / 2) * |w|^2, so l2 = 1 is C = 1. The
  // optimiser works on that objective divided by the row count.
  double l2 = 1.0;
  int max_iter = 100;
  double tol = 1e-6;  // on the max-norm of the averaged gradient
  int memory = 10;
  unsigned jobs = 1;
};

struct ConvergenceReport {
  int iterations = 0;
  double final_loss = 0;
  double final_gradient_norm = 0;
  bool converged = false;
  std::vector<double> loss_trace;  // objective after each outer iteration
};

struct LinearModel {
  std::vector<double> weights;
  double bias = 0;
  ConvergenceReport convergence;
  LogisticOptions options;

  std::uint32_t dimension() const { return static_cast<std::uint32_t>(weights.size()); }
};

double sigmoid(double z);

// sigma(bias + w . x). Throws UsageError for an index outside the model.
double predict_proba(const LinearModel& model, const SparseFeatureRow& row);
std::vector<double> predict_proba(const LinearModel& model, const FeatureMatrix& x);

// Averaged regularised log-loss and its gradient; gradient[dim] holds the
// bias component. Row blocks are reduced in a fixed order, so the result does
// not depend on `jobs`.
double logistic_objective(const FeatureMatrix& x, std::span<const double> weights,
                          double bias, double l2, std::vector<double>& gradient,
                          unsigned jobs = 1);

// L-BFGS with backtracking (Armijo) line search, starting from zero.
// Throws NumericError if the objective turns non-finite.
LinearModel fit_logistic(const FeatureMatrix& x, const LogisticOptions& options = {});

}  // namespace ktrace
