#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ktrace/features.h"
#include "ktrace/linear_models.h"
#include "ktrace/prep.h"
#include "ktrace/seq_models.h"

namespace ktrace {

// Mann-Whitney AUC with average ranks for ties, O(n log n). Throws
// UsageError when the lengths differ or only one class is present.
double compute_auc(std::span<const std::uint8_t> labels, std::span<const double> scores);

// Fraction of (score >= 0.5) == label.
double accuracy_at_half(std::span<const std::uint8_t> labels, std::span<const double> scores);

enum class ModelKind { kBaseline, kLogistic, kDkt, kSakt };

std::string_view model_name(ModelKind kind);  // baseline, lr, dkt, sakt
ModelKind parse_model(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::kLogistic;
  LogisticOptions logistic;
  TrainConfig train;
  int hidden = 32;   // DKT hidden width
  int dim = 32;      // SAKT embedding width
  int seq_len = 0;   // SAKT max length; 0 means median interactions per learner
  double dropout = 0.25;
  SequenceVocabulary vocabulary = SequenceVocabulary::kCombined;
};

// Everything needed to score new learners; vocabularies come from the
// training learners only.
struct TrainedModel {
  ModelKind kind = ModelKind::kLogistic;
  FeatureLayout layout;  // logistic only
  LinearModel linear;
  BaselineModel baseline;
  SequenceVocab seq_vocab;
  DktModel dkt;
  SaktModel sakt;
  TrainConfig train;  // sequence models
  std::vector<double> loss_trace;  // L-BFGS objective or per-epoch loss
};

TrainedModel train_model(const Dataset& train, const ModelSpec& spec,
                         const FeatureConfig& features, unsigned jobs = 1);

struct Scored {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  std::size_t n_learners = 0;
};

Scored score(const TrainedModel& model, const Dataset& test, unsigned jobs = 1);

struct EvalReport {
  std::string model;
  std::string feature_family;  // family name, or "original" for sequence models
  double auc = 0;
  double accuracy = 0;
  std::size_t n_test_interactions = 0;
  std::size_t n_test_learners = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

EvalReport make_report(const TrainedModel& model, const Scored& scored, std::uint64_t seed,
                       std::string config_hash);

struct SplitParams {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

// split -> featurise on training vocabularies -> fit -> score held-out learners.
EvalReport run_experiment(const Dataset& dataset, const ModelSpec& spec,
                          const FeatureConfig& features, const SplitParams& split,
                          std::uint64_t seed, unsigned jobs = 1);

// Canonical description of a run, hashed into EvalReport::config_hash.
std::string describe_config(const ModelSpec& spec, const FeatureConfig& features,
                            const SplitParams& split, std::uint64_t seed);
std::string config_hash(std::string_view canonical);  // 16 hex digits, FNV-1a

// Display label matching the published tables, e.g. "Best LR-Features".
std::string feature_set_label(const EvalReport& report);
// "Feature Set<TAB>Model<TAB>AUC" followed by one line per report.
std::string format_leaderboard(std::span<const EvalReport> reports);

}  // namespace ktrace
