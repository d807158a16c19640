#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "ktrace/error.h"
#include "ktrace/linear_models.h"
#include "ktrace/synth.h"
#include "test_util.h"

using namespace ktrace;
using testing::make_interaction;

namespace {

FeatureMatrix random_matrix(Rng& rng, std::size_t n, std::uint32_t dim) {
  std::vector<SparseFeatureRow> rows(n);
  for (auto& r : rows) {
    for (std::uint32_t j = 0; j < dim; ++j) {
      if (rng.bernoulli(0.4)) r.entries.emplace_back(j, rng.uniform(-2.0, 2.0));
    }
    r.label = rng.bernoulli(0.5);
  }
  return to_matrix(rows, dim);
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) r[order[k]] = (i + j - 1) / 2.0;
    i = j;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("baseline frequencies") {
  std::vector<LabeledInteraction> xs;
  const bool q1[] = {true, true, false, true};
  for (int i = 0; i < 4; ++i) xs.push_back(make_interaction("a", i, "q1", {1}, q1[i]));
  xs.push_back(make_interaction("a", 10, "q2", {1}, false));
  const auto m = fit_baseline(Dataset::from_interactions(xs));
  CHECK(m.predict("q1") == 0.75);
  CHECK(m.predict("q2") == 0.0);
  CHECK(m.predict("unseen") == doctest::Approx(3.0 / 5.0));
  CHECK_THROWS_AS(fit_baseline(Dataset{}), UsageError);

  std::vector<LabeledInteraction> all;
  for (int i = 0; i < 5; ++i) all.push_back(make_interaction("a", i, "q" + std::to_string(i % 2), {1}, true));
  const auto ones = fit_baseline(Dataset::from_interactions(all));
  CHECK(ones.global_mean == 1.0);
  for (const auto& [q, p] : ones.item_probability) CHECK(p == 1.0);
}

TEST_CASE("logistic prediction") {
  LinearModel m;
  m.weights = {0.0, 0.0};
  SparseFeatureRow r;
  r.entries = {{0, 1.0}, {1, 2.0}};
  CHECK(predict_proba(m, r) == 0.5);
  m.weights = {std::log(3.0), 0.0};
  CHECK(predict_proba(m, r) == doctest::Approx(0.75));
  m.weights = {0.3, -1.1};
  m.bias = 0.4;
  const double p = predict_proba(m, r);
  LinearModel neg = m;
  for (auto& w : neg.weights) w = -w;
  neg.bias = -m.bias;
  CHECK(predict_proba(neg, r) == doctest::Approx(1.0 - p));
  r.entries.emplace_back(2, 1.0);
  CHECK_THROWS_AS(predict_proba(m, r), UsageError);
  m.weights = {500.0, 500.0};
  r.entries.pop_back();
  CHECK(predict_proba(m, r) <= 1.0);
  CHECK(std::isfinite(predict_proba(m, r)));
}

TEST_CASE("objective gradient matches finite differences") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const std::uint32_t dim = 6;
    const auto x = random_matrix(rng, 40, dim);
    std::vector<double> w(dim);
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    const double b = rng.uniform(-1.0, 1.0);
    const double l2 = trial % 2 ? 0.0 : 0.7;
    std::vector<double> g, scratch;
    logistic_objective(x, w, b, l2, g);
    const double eps = 1e-5;
    for (std::uint32_t j = 0; j <= dim; ++j) {
      auto wp = w, wm = w;
      double bp = b, bm = b;
      if (j < dim) {
        wp[j] += eps;
        wm[j] -= eps;
      } else {
        bp += eps;
        bm -= eps;
      }
      const double fd = (logistic_objective(x, wp, bp, l2, scratch) -
                         logistic_objective(x, wm, bm, l2, scratch)) / (2 * eps);
      const double rel = std::abs(fd - g[j]) / std::max(1e-8, std::abs(fd) + std::abs(g[j]));
      CHECK(rel <= 1e-6);
    }
  }
}

TEST_CASE("saturated model recovers the empirical frequency") {
  std::vector<SparseFeatureRow> rows(4);
  for (int i = 0; i < 4; ++i) {
    rows[i].entries = {{0, 1.0}};
    rows[i].label = i < 3;
  }
  LogisticOptions o;
  o.l2 = 0;
  o.max_iter = 200;
  const auto m = fit_logistic(to_matrix(rows, 1), o);
  CHECK(predict_proba(m, rows[0]) == doctest::Approx(0.75).epsilon(1e-3));
}

TEST_CASE("separable data stays finite with l2") {
  std::vector<SparseFeatureRow> rows(20);
  for (int i = 0; i < 20; ++i) {
    rows[i].entries = {{0, i < 10 ? 1.0 : -1.0}};
    rows[i].label = i < 10;
  }
  const auto m = fit_logistic(to_matrix(rows, 1));
  CHECK(std::isfinite(m.weights[0]));
  CHECK(m.weights[0] > 0);
  CHECK(m.convergence.converged);
}

TEST_CASE("l2 = 0 needs both labels") {
  std::vector<SparseFeatureRow> rows(3);
  for (auto& r : rows) {
    r.entries = {{0, 1.0}};
    r.label = true;
  }
  LogisticOptions o;
  o.l2 = 0;
  CHECK_THROWS_AS(fit_logistic(to_matrix(rows, 1), o), UsageError);
  CHECK_NOTHROW(fit_logistic(to_matrix(rows, 1)));
}

TEST_CASE("loss trace is non-increasing and jobs do not matter") {
  Rng rng(4);
  const auto x = random_matrix(rng, 40000, 30);
  LogisticOptions o;
  o.max_iter = 30;
  const auto m1 = fit_logistic(x, o);
  for (std::size_t i = 1; i < m1.convergence.loss_trace.size(); ++i) {
    CHECK(m1.convergence.loss_trace[i] <= m1.convergence.loss_trace[i - 1]);
  }
  o.jobs = 3;
  const auto m3 = fit_logistic(x, o);
  CHECK(m1.weights == m3.weights);
  CHECK(m1.bias == m3.bias);
}

TEST_CASE("row order changes the optimum only at tolerance level") {
  Rng rng(6);
  std::vector<SparseFeatureRow> rows(3000);
  for (auto& r : rows) {
    for (std::uint32_t j = 0; j < 8; ++j) {
      if (rng.bernoulli(0.5)) r.entries.emplace_back(j, 1.0);
    }
    r.label = rng.bernoulli(0.3 + 0.05 * r.entries.size());
  }
  LogisticOptions o;
  o.max_iter = 500;
  const auto a = fit_logistic(to_matrix(rows, 8), o);
  std::reverse(rows.begin(), rows.end());
  const auto b = fit_logistic(to_matrix(rows, 8), o);
  CHECK(a.convergence.converged);
  CHECK(b.convergence.converged);
  for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(a.weights[j] - b.weights[j]) < 1e-3);
}

TEST_CASE("IRT weights recover item difficulty and match the baseline") {
  SynthConfig c;
  c.n_learners = 600;
  c.n_items = 40;
  c.max_interactions = 400;
  c.seed = 12;
  const auto data = generate(c);
  FeatureConfig irt;
  irt.family = FeatureFamily::kIrt;
  const auto layout = FeatureLayout::build(irt, data.dataset);
  const auto rows = encode(data.dataset, layout);
  const auto x = to_matrix(rows, layout.width());

  const auto m = fit_logistic(x);
  std::vector<double> fitted, truth;
  for (const auto& q : layout.items()) {
    fitted.push_back(m.weights[layout.item_slot(q)]);
    truth.push_back(-data.truth.difficulties.at(q));
  }
  CHECK(spearman(fitted, truth) >= 0.9);

  LogisticOptions loose;
  loose.l2 = 1e-8;
  loose.max_iter = 2000;
  loose.tol = 1e-7;
  const auto mle = fit_logistic(x, loose);
  const auto base = fit_baseline(data.dataset);
  std::map<std::string, std::size_t> seen;
  for (const auto& [id, seq] : data.dataset.learners) {
    for (const auto& i : seq) ++seen[i.question_id];
  }
  for (const auto& q : layout.items()) {
    if (seen[q] < 50) continue;
    SparseFeatureRow r;
    r.entries = {{layout.item_slot(q), 1.0}};
    CHECK(std::abs(predict_proba(mle, r) - base.predict(q)) <= 0.01);
  }
}

TEST_CASE("non-finite features raise a numeric error") {
  std::vector<SparseFeatureRow> rows(2);
  rows[0].entries = {{0, std::numeric_limits<double>::infinity()}};
  rows[0].label = true;
  rows[1].entries = {{0, 1.0}};
  CHECK_THROWS_AS(fit_logistic(to_matrix(rows, 1)), NumericError);
}

TEST_CASE("an unreachable gradient tolerance stops once the loss stalls") {
  std::vector<SparseFeatureRow> rows(400);
  Rng rng(8);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].entries = {{static_cast<std::uint32_t>(i % 4), 1.0}};
    rows[i].label = rng.bernoulli(0.2 + 0.2 * static_cast<double>(i % 4));
  }
  LogisticOptions o;
  o.l2 = 0;
  o.tol = 1e-300;
  o.max_iter = 100000;
  const auto m = fit_logistic(to_matrix(rows, 4), o);
  CHECK(m.convergence.iterations < 1000);
  CHECK(m.convergence.converged);
}
