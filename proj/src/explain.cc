#include "ktrace/explain.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <thread>

#include "ktrace/error.h"
#include "ktrace/random.h"

namespace ktrace {

void LimeConfig::validate() const {
  if (n_perturbations < 2) throw UsageError("LIME needs at least 2 perturbations");
  if (!(flip_probability >= 0 && flip_probability <= 1)) {
    throw UsageError("flip probability must lie in [0, 1]");
  }
  if (!(noise_sigma >= 0) || !std::isfinite(noise_sigma)) {
    throw UsageError("noise sigma must be finite and non-negative");
  }
  if (n_test_learners == 0) throw UsageError("n_test_learners must be positive");
}

namespace {

std::vector<BlockKind> entry_kinds(const SparseFeatureRow& row, const FeatureLayout& layout) {
  std::vector<BlockKind> kinds;
  kinds.reserve(row.entries.size());
  for (const auto& [index, value] : row.entries) kinds.push_back(layout.block_of(index).kind);
  return kinds;
}

// Row-major n x m matrix of perturbed entry values.
void perturb_flat(const SparseFeatureRow& row, std::span<const BlockKind> kinds,
                  const LimeConfig& config, std::uint64_t seed, std::vector<double>& out) {
  if (kinds.size() != row.entries.size()) {
    throw UsageError("perturbation: one block kind per entry required");
  }
  const std::size_t m = row.entries.size();
  out.resize(config.n_perturbations * m);
  Rng rng(seed);
  for (std::size_t c = 0; c < config.n_perturbations; ++c) {
    double* dst = out.data() + c * m;
    for (std::size_t k = 0; k < m; ++k) {
      const double v = row.entries[k].second;
      if (kinds[k] == BlockKind::kBinary) {
        dst[k] = rng.bernoulli(config.flip_probability) ? 1.0 - v : v;
      } else {
        dst[k] = std::max(0.0, v + config.noise_sigma * rng.normal());
      }
    }
  }
}

}  // namespace

std::vector<std::vector<double>> perturb_values(const SparseFeatureRow& row,
                                                std::span<const BlockKind> kinds,
                                                const LimeConfig& config, std::uint64_t seed) {
  config.validate();
  std::vector<double> flat;
  perturb_flat(row, kinds, config, seed, flat);
  const std::size_t m = row.entries.size();
  std::vector<std::vector<double>> out(config.n_perturbations);
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c].assign(flat.begin() + static_cast<std::ptrdiff_t>(c * m),
                  flat.begin() + static_cast<std::ptrdiff_t>((c + 1) * m));
  }
  return out;
}

std::vector<SparseFeatureRow> perturb_sample(const SparseFeatureRow& row,
                                             const FeatureLayout& layout,
                                             const LimeConfig& config, std::uint64_t seed) {
  const auto kinds = entry_kinds(row, layout);
  const auto values = perturb_values(row, kinds, config, seed);
  std::vector<SparseFeatureRow> out(values.size(), row);
  for (std::size_t c = 0; c < values.size(); ++c) {
    for (std::size_t k = 0; k < row.entries.size(); ++k) out[c].entries[k].second = values[c][k];
  }
  return out;
}

RowExplanation lime_correlations(const LinearModel& model, const SparseFeatureRow& row,
                                 std::span<const BlockKind> kinds, const LimeConfig& config,
                                 std::uint64_t seed) {
  config.validate();
  RowExplanation ex;
  ex.learner_id = row.learner_id;
  ex.timestamp_ms = row.timestamp_ms;
  ex.label = row.label;
  ex.prediction = predict_proba(model, row);
  const std::size_t m = row.entries.size();
  const std::size_t n = config.n_perturbations;
  for (const auto& e : row.entries) ex.features.push_back(e.first);
  ex.correlations.assign(m, 0.0);

  std::vector<double> x;
  perturb_flat(row, kinds, config, seed, x);
  std::vector<double> p(n);
  for (std::size_t c = 0; c < n; ++c) {
    double z = model.bias;
    for (std::size_t k = 0; k < m; ++k) z += model.weights[row.entries[k].first] * x[c * m + k];
    p[c] = sigmoid(z);
  }

  const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
  if (*lo == *hi) {
    ex.degenerate = true;
    return ex;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  double p_mean = 0;
  for (double v : p) p_mean += v;
  p_mean *= inv_n;
  double p_ss = 0;
  for (double v : p) p_ss += (v - p_mean) * (v - p_mean);

  for (std::size_t k = 0; k < m; ++k) {
    double mean = 0;
    for (std::size_t c = 0; c < n; ++c) mean += x[c * m + k];
    mean *= inv_n;
    double ss = 0, sp = 0;
    for (std::size_t c = 0; c < n; ++c) {
      const double d = x[c * m + k] - mean;
      ss += d * d;
      sp += d * (p[c] - p_mean);
    }
    if (ss <= 0 || p_ss <= 0) continue;
    ex.correlations[k] = std::clamp(sp / std::sqrt(ss * p_ss), -1.0, 1.0);
  }
  return ex;
}

RowExplanation lime_correlations(const LinearModel& model, const SparseFeatureRow& row,
                                 const FeatureLayout& layout, const LimeConfig& config,
                                 std::uint64_t seed) {
  const auto kinds = entry_kinds(row, layout);
  return lime_correlations(model, row, kinds, config, seed);
}

std::vector<RowExplanation> explain_rows(const LinearModel& model,
                                         std::span<const SparseFeatureRow> rows,
                                         const FeatureLayout& layout, const LimeConfig& config,
                                         unsigned jobs) {
  config.validate();
  std::set<std::string> distinct;
  for (const auto& r : rows) distinct.insert(r.learner_id);
  std::vector<std::string> ids(distinct.begin(), distinct.end());
  if (ids.size() > config.n_test_learners) {
    Rng rng(config.seed);
    rng.shuffle(std::span<std::string>(ids));
    ids.resize(config.n_test_learners);
  }
  const std::set<std::string> chosen(ids.begin(), ids.end());

  std::vector<std::size_t> selected;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (chosen.contains(rows[r].learner_id)) selected.push_back(r);
  }
  std::vector<RowExplanation> out(selected.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < selected.size(); i += stride) {
      const std::size_t r = selected[i];
      out[i] = lime_correlations(model, rows[r], layout, config, derive_seed(config.seed, r));
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(
                                                   std::max<std::size_t>(1, selected.size()))));
  if (jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> threads;
    for (unsigned t = 0; t < jobs; ++t) threads.emplace_back(work, t, jobs);
  }
  return out;
}

const ImportanceCell& ExplanationReport::cell(FeatureGroup group, bool correct_bucket) const {
  for (std::size_t g = 0; g < kReportGroups.size(); ++g) {
    if (kReportGroups[g] == group) return cells[g][correct_bucket ? 0 : 1];
  }
  throw UsageError("unknown feature group");
}

ExplanationReport aggregate_importances(std::span<const RowExplanation> explanations,
                                        const FeatureLayout& layout) {
  ExplanationReport report;
  std::array<std::array<double, 2>, 4> pos_sum{}, neg_sum{};
  std::set<std::string> learners;
  for (const auto& ex : explanations) {
    if (ex.features.size() != ex.correlations.size()) {
      throw UsageError("explanation has mismatched feature and correlation lengths");
    }
    const int bucket = ((ex.prediction >= 0.5) == ex.label) ? 0 : 1;
    ++report.n_samples[bucket];
    if (ex.degenerate) ++report.n_degenerate;
    learners.insert(ex.learner_id);
    for (std::size_t k = 0; k < ex.features.size(); ++k) {
      const double r = ex.correlations[k];
      if (r == 0) continue;
      const FeatureGroup group = layout.block_of(ex.features[k]).group;
      const std::size_t g = static_cast<std::size_t>(
          std::find(kReportGroups.begin(), kReportGroups.end(), group) - kReportGroups.begin());
      auto& cell = report.cells[g][bucket];
      if (r > 0) {
        pos_sum[g][bucket] += r;
        ++cell.n_positive;
      } else {
        neg_sum[g][bucket] += r;
        ++cell.n_negative;
      }
    }
  }
  for (std::size_t g = 0; g < 4; ++g) {
    for (std::size_t b = 0; b < 2; ++b) {
      auto& cell = report.cells[g][b];
      if (cell.n_positive) cell.support = pos_sum[g][b] / static_cast<double>(cell.n_positive);
      if (cell.n_negative) {
        cell.contradict = neg_sum[g][b] / static_cast<double>(cell.n_negative);
      }
      if ((cell.support && *cell.support < 0) || (cell.contradict && *cell.contradict > 0)) {
        throw NumericError("importance sign invariant violated");
      }
    }
  }
  report.n_learners = learners.size();
  return report;
}

namespace {

std::vector<SkillDifficulty> finish_table(const std::map<int, std::pair<std::size_t, std::size_t>>& counts) {
  std::vector<SkillDifficulty> table;
  for (const auto& [skill, c] : counts) {
    SkillDifficulty s;
    s.skill = skill;
    s.n_correct = c.first;
    s.n_interactions = c.second;
    s.ratio = static_cast<double>(c.first) / static_cast<double>(c.second);
    table.push_back(s);
  }
  std::stable_sort(table.begin(), table.end(), [](const auto& a, const auto& b) {
    return a.ratio != b.ratio ? a.ratio < b.ratio : a.skill < b.skill;
  });
  return table;
}

}  // namespace

std::vector<SkillDifficulty> skill_difficulty(const Dataset& dataset) {
  std::map<int, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& [id, seq] : dataset.learners) {
    for (const auto& x : seq) {
      for (int kc : x.kc_tags) {
        auto& c = counts[kc];
        c.first += x.correct ? 1 : 0;
        ++c.second;
      }
    }
  }
  return finish_table(counts);
}

std::vector<SkillDifficulty> skill_difficulty(std::span<const SparseFeatureRow> rows,
                                              const FeatureLayout& layout) {
  if (!layout.has_skills()) throw UsageError("layout has no skill block");
  const std::uint32_t lo = layout.skill_offset();
  const std::uint32_t hi = lo + static_cast<std::uint32_t>(layout.skills().size());
  std::map<int, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& row : rows) {
    for (const auto& [index, value] : row.entries) {
      if (index < lo || index >= hi || value == 0) continue;
      auto& c = counts[layout.skills()[index - lo]];
      c.first += row.label ? 1 : 0;
      ++c.second;
    }
  }
  return finish_table(counts);
}

void attach_lime_importance(std::vector<SkillDifficulty>& table,
                            std::span<const RowExplanation> explanations,
                            const FeatureLayout& layout) {
  if (!layout.has_skills()) return;
  const std::uint32_t lo = layout.skill_offset();
  const std::uint32_t hi = lo + static_cast<std::uint32_t>(layout.skills().size());
  std::map<int, std::pair<double, std::size_t>> sums;
  for (const auto& ex : explanations) {
    for (std::size_t k = 0; k < ex.features.size(); ++k) {
      const auto f = ex.features[k];
      if (f < lo || f >= hi) continue;
      auto& s = sums[layout.skills()[f - lo]];
      s.first += ex.correlations[k];
      ++s.second;
    }
  }
  for (auto& row : table) {
    const auto it = sums.find(row.skill);
    if (it != sums.end()) {
      row.lime_importance = it->second.first / static_cast<double>(it->second.second);
    }
  }
}

namespace {

std::string fmt(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

}  // namespace

std::string format_importance_table(const ExplanationReport& report) {
  std::string out =
      "Features\tCorrect Support\tCorrect Contradict\tIncorrect Support\tIncorrect Contradict\n";
  for (std::size_t g = 0; g < kReportGroups.size(); ++g) {
    out += group_name(kReportGroups[g]);
    for (std::size_t b = 0; b < 2; ++b) {
      const auto& cell = report.cells[g][b];
      out += "\t" + fmt(cell.support) + "\t" + fmt(cell.contradict);
    }
    out += "\n";
  }
  return out;
}

std::string format_skill_table(const std::vector<SkillDifficulty>& table, std::size_t top) {
  top = std::min(top, table.size());
  const std::string k = std::to_string(top);
  std::string out = "Top " + k + " Difficult Skills\tCorrectness Ratio\tLIME Importance\tTop " + k +
                    " Easy Skills\tCorrectness Ratio\tLIME Importance\n";
  for (std::size_t i = 0; i < top; ++i) {
    const auto& hard = table[i];
    const auto& easy = table[table.size() - top + i];
    out += std::to_string(hard.skill) + "\t" + fmt(hard.ratio) + "\t" + fmt(hard.lime_importance) +
           "\t" + std::to_string(easy.skill) + "\t" + fmt(easy.ratio) + "\t" +
           fmt(easy.lime_importance) + "\n";
  }
  return out;
}

}  // namespace ktrace
