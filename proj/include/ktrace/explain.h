#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ktrace/features.h"
#include "ktrace/linear_models.h"
#include "ktrace/prep.h"

namespace ktrace {

struct LimeConfig {
  std::size_t n_perturbations = 300;
  double flip_probability = 0.3;  // binary entries
  double noise_sigma = 0.5;       // count entries, in scaled units
  std::uint64_t seed = 0;
  std::size_t n_test_learners = 1000;

  void validate() const;
};

// Perturbation acts on a row's structural entries only: binary values are
// inverted with probability flip_probability, count values receive
// N(0, noise_sigma^2) noise and are clamped at zero.
// `kinds[k]` is the block kind of row.entries[k].
std::vector<std::vector<double>> perturb_values(const SparseFeatureRow& row,
                                                std::span<const BlockKind> kinds,
                                                const LimeConfig& config, std::uint64_t seed);
std::vector<SparseFeatureRow> perturb_sample(const SparseFeatureRow& row,
                                             const FeatureLayout& layout,
                                             const LimeConfig& config, std::uint64_t seed);

struct RowExplanation {
  std::string learner_id;
  std::int64_t timestamp_ms = 0;
  bool label = false;
  double prediction = 0;  // model output on the unperturbed row
  std::vector<std::uint32_t> features;
  std::vector<double> correlations;  // Pearson r per entry of `features`
  bool degenerate = false;           // fewer than two distinct perturbed predictions
};

// Pearson correlation between every entry column of the perturbed set and the
// model's predicted probability. Zero-variance columns get 0; a degenerate
// prediction set yields all zeros with `degenerate` set.
RowExplanation lime_correlations(const LinearModel& model, const SparseFeatureRow& row,
                                 std::span<const BlockKind> kinds, const LimeConfig& config,
                                 std::uint64_t seed);
RowExplanation lime_correlations(const LinearModel& model, const SparseFeatureRow& row,
                                 const FeatureLayout& layout, const LimeConfig& config,
                                 std::uint64_t seed);

// Rows of up to config.n_test_learners learners drawn with config.seed. Row
// r of the input is perturbed with derive_seed(config.seed, r), so results do
// not depend on `jobs`.
std::vector<RowExplanation> explain_rows(const LinearModel& model,
                                         std::span<const SparseFeatureRow> rows,
                                         const FeatureLayout& layout, const LimeConfig& config,
                                         unsigned jobs = 1);

struct ImportanceCell {
  std::optional<double> support;     // mean of positive correlations
  std::optional<double> contradict;  // mean of negative correlations
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
};

inline constexpr std::array<FeatureGroup, 4> kReportGroups = {
    FeatureGroup::kKcs, FeatureGroup::kAttempts, FeatureGroup::kWins, FeatureGroup::kItems};

struct ExplanationReport {
  // [group][bucket]; bucket 0 = correct predictions, 1 = incorrect.
  std::array<std::array<ImportanceCell, 2>, 4> cells{};
  std::array<std::size_t, 2> n_samples{};
  std::size_t n_degenerate = 0;
  std::size_t n_learners = 0;
  LimeConfig config;

  const ImportanceCell& cell(FeatureGroup group, bool correct_bucket) const;
};

// Buckets by (prediction >= 0.5) == label and averages over (sample, feature)
// pairs within each feature group.
ExplanationReport aggregate_importances(std::span<const RowExplanation> explanations,
                                        const FeatureLayout& layout);

struct SkillDifficulty {
  int skill = 0;
  std::size_t n_correct = 0;
  std::size_t n_interactions = 0;
  double ratio = 0;
  std::optional<double> lime_importance;  // mean correlation of the skill one-hot
};

// Correctness ratio per original KC, ascending by ratio then skill id.
std::vector<SkillDifficulty> skill_difficulty(const Dataset& dataset);
// Same table from encoded rows, reading each row's skill one-hot entries.
std::vector<SkillDifficulty> skill_difficulty(std::span<const SparseFeatureRow> rows,
                                              const FeatureLayout& layout);
void attach_lime_importance(std::vector<SkillDifficulty>& table,
                            std::span<const RowExplanation> explanations,
                            const FeatureLayout& layout);

// Delimited text with the published table layouts.
std::string format_importance_table(const ExplanationReport& report);
std::string format_skill_table(const std::vector<SkillDifficulty>& table, std::size_t top = 3);

}  // namespace ktrace
