#include "ktrace/linear_models.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <thread>

#include "ktrace/error.h"

namespace ktrace {

double BaselineModel::predict(const std::string& question_id) const {
  const auto it = item_probability.find(question_id);
  return it == item_probability.end() ? global_mean : it->second;
}

BaselineModel fit_baseline(const Dataset& train) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // correct, total
  std::size_t correct = 0, total = 0;
  for (const auto& [id, seq] : train.learners) {
    for (const auto& x : seq) {
      auto& c = counts[x.question_id];
      c.first += x.correct ? 1 : 0;
      ++c.second;
      correct += x.correct ? 1 : 0;
      ++total;
    }
  }
  if (total == 0) throw UsageError("fit_baseline: empty training set");
  BaselineModel m;
  m.global_mean = static_cast<double>(correct) / static_cast<double>(total);
  for (const auto& [qid, c] : counts) {
    m.item_probability.emplace(qid,
                               static_cast<double>(c.first) / static_cast<double>(c.second));
  }
  return m;
}

std::vector<double> predict_baseline(const BaselineModel& model, const Dataset& test) {
  std::vector<double> out;
  out.reserve(test.n_interactions());
  for (const auto& [id, seq] : test.learners) {
    for (const auto& x : seq) out.push_back(model.predict(x.question_id));
  }
  return out;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double predict_proba(const LinearModel& model, const SparseFeatureRow& row) {
  double z = model.bias;
  for (const auto& [index, value] : row.entries) {
    if (index >= model.weights.size()) {
      throw UsageError("feature index " + std::to_string(index) +
                       " outside model dimension " + std::to_string(model.weights.size()));
    }
    z += model.weights[index] * value;
  }
  return sigmoid(z);
}

std::vector<double> predict_proba(const LinearModel& model, const FeatureMatrix& x) {
  if (x.n_cols > model.weights.size()) {
    throw UsageError("feature matrix wider than the model");
  }
  std::vector<double> out(x.n_rows());
  for (std::size_t r = 0; r < x.n_rows(); ++r) {
    double z = model.bias;
    for (std::size_t k = x.row_ptr[r]; k < x.row_ptr[r + 1]; ++k) {
      z += model.weights[x.cols[k]] * x.vals[k];
    }
    out[r] = sigmoid(z);
  }
  return out;
}

namespace {

constexpr std::size_t kRowBlock = 16384;

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Unregularised loss sum over rows [lo, hi); gradient accumulates into `g`
// (size dim + 1), which the caller zeroes.
double block_loss(const FeatureMatrix& x, std::span<const double> w, double bias,
                  std::size_t lo, std::size_t hi, std::vector<double>& g) {
  double loss = 0;
  const std::size_t dim = w.size();
  for (std::size_t r = lo; r < hi; ++r) {
    double z = bias;
    for (std::size_t k = x.row_ptr[r]; k < x.row_ptr[r + 1]; ++k) z += w[x.cols[k]] * x.vals[k];
    const double y = x.labels[r];
    loss += softplus(z) - y * z;
    const double d = sigmoid(z) - y;
    for (std::size_t k = x.row_ptr[r]; k < x.row_ptr[r + 1]; ++k) g[x.cols[k]] += d * x.vals[k];
    g[dim] += d;
  }
  return loss;
}

}  // namespace

double logistic_objective(const FeatureMatrix& x, std::span<const double> w, double bias,
                          double l2, std::vector<double>& gradient, unsigned jobs) {
  const std::size_t dim = w.size();
  const std::size_t n = x.n_rows();
  if (n == 0) throw UsageError("logistic objective over zero rows");
  if (x.n_cols > dim) throw UsageError("feature matrix wider than the weight vector");
  gradient.assign(dim + 1, 0.0);
  const std::size_t n_blocks = (n + kRowBlock - 1) / kRowBlock;
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n_blocks)));

  double loss = 0;
  if (jobs == 1) {
    std::vector<double> partial(dim + 1);
    for (std::size_t b = 0; b < n_blocks; ++b) {
      std::fill(partial.begin(), partial.end(), 0.0);
      loss += block_loss(x, w, bias, b * kRowBlock, std::min(n, (b + 1) * kRowBlock), partial);
      for (std::size_t j = 0; j <= dim; ++j) gradient[j] += partial[j];
    }
  } else {
    std::vector<std::vector<double>> partials(n_blocks, std::vector<double>(dim + 1, 0.0));
    std::vector<double> losses(n_blocks, 0.0);
    {
      std::vector<std::jthread> threads;
      for (unsigned t = 0; t < jobs; ++t) {
        threads.emplace_back([&, t] {
          for (std::size_t b = t; b < n_blocks; b += jobs) {
            losses[b] = block_loss(x, w, bias, b * kRowBlock, std::min(n, (b + 1) * kRowBlock),
                                   partials[b]);
          }
        });
      }
    }
    for (std::size_t b = 0; b < n_blocks; ++b) {
      loss += losses[b];
      for (std::size_t j = 0; j <= dim; ++j) gradient[j] += partials[b][j];
    }
  }

  double sq = 0;
  for (std::size_t j = 0; j < dim; ++j) {
    sq += w[j] * w[j];
    gradient[j] += l2 * w[j];
  }
  loss += 0.5 * l2 * sq;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (auto& gj : gradient) gj *= inv_n;
  return loss * inv_n;
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_norm(const std::vector<double>& a) {
  double m = 0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

LinearModel fit_logistic(const FeatureMatrix& x, const LogisticOptions& options) {
  if (x.n_rows() == 0) throw UsageError("fit_logistic: no training rows");
  if (options.l2 < 0) throw UsageError("fit_logistic: l2 must be non-negative");
  if (options.l2 == 0) {
    bool has_pos = false, has_neg = false;
    for (auto y : x.labels) (y ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) {
      throw UsageError("fit_logistic: both labels required when l2 = 0");
    }
  }
  const std::size_t dim = x.n_cols;
  const std::size_t n_params = dim + 1;

  auto evaluate = [&](const std::vector<double>& theta, std::vector<double>& grad) {
    return logistic_objective(x, std::span<const double>(theta.data(), dim), theta[dim],
                              options.l2, grad, options.jobs);
  };

  std::vector<double> theta(n_params, 0.0), grad, trial(n_params), trial_grad;
  double f = evaluate(theta, grad);
  ConvergenceReport report;
  if (!std::isfinite(f)) throw NumericError("fit_logistic: non-finite loss at iteration 0");

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> memory;
  std::vector<double> dir(n_params), alpha;

  constexpr double kFtol = 64 * std::numeric_limits<double>::epsilon();
  bool stalled = false;
  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    if (max_norm(grad) <= options.tol) break;

    // Two-loop recursion.
    dir = grad;
    alpha.assign(memory.size(), 0.0);
    for (std::size_t i = memory.size(); i-- > 0;) {
      alpha[i] = memory[i].rho * dot(memory[i].s, dir);
      for (std::size_t j = 0; j < n_params; ++j) dir[j] -= alpha[i] * memory[i].y[j];
    }
    double gamma = 1.0;
    if (!memory.empty()) {
      const auto& last = memory.back();
      gamma = dot(last.s, last.y) / dot(last.y, last.y);
    }
    for (auto& v : dir) v *= gamma;
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const double beta = memory[i].rho * dot(memory[i].y, dir);
      for (std::size_t j = 0; j < n_params; ++j) dir[j] += (alpha[i] - beta) * memory[i].s[j];
    }
    for (auto& v : dir) v = -v;

    double slope = dot(grad, dir);
    if (!(slope < 0)) {
      memory.clear();
      for (std::size_t j = 0; j < n_params; ++j) dir[j] = -grad[j];
      slope = dot(grad, dir);
    }
    double step = 1.0;
    if (memory.empty()) step = std::min(1.0, 1.0 / std::sqrt(dot(grad, grad)));

    constexpr double kArmijo = 1e-4;
    double f_new = 0;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      for (std::size_t j = 0; j < n_params; ++j) trial[j] = theta[j] + step * dir[j];
      f_new = evaluate(trial, trial_grad);
      if (!std::isfinite(f_new)) {
        throw NumericError("fit_logistic: non-finite loss at iteration " +
                           std::to_string(iter + 1));
      }
      if (f_new <= f + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent possible at double precision

    Pair p{std::vector<double>(n_params), std::vector<double>(n_params), 0.0};
    for (std::size_t j = 0; j < n_params; ++j) {
      p.s[j] = trial[j] - theta[j];
      p.y[j] = trial_grad[j] - grad[j];
    }
    const double sy = dot(p.s, p.y);
    theta.swap(trial);
    grad.swap(trial_grad);
    const double decrease = f - f_new;
    f = f_new;
    report.loss_trace.push_back(f);
    if (decrease <= kFtol * std::max({std::abs(f), std::abs(f + decrease), 1.0})) {
      stalled = true;
      break;
    }
    if (sy > 1e-12) {
      p.rho = 1.0 / sy;
      memory.push_back(std::move(p));
      if (memory.size() > static_cast<std::size_t>(std::max(1, options.memory))) {
        memory.pop_front();
      }
    }
  }

  report.iterations = static_cast<int>(report.loss_trace.size());
  report.final_loss = f;
  report.final_gradient_norm = max_norm(grad);
  report.converged = stalled || report.final_gradient_norm <= options.tol;

  LinearModel model;
  model.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(dim));
  model.bias = theta[dim];
  model.convergence = std::move(report);
  model.options = options;
  return model;
}

}  // namespace ktrace
