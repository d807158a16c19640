#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ktrace/ingest.h"

namespace ktrace {

// Dense ids for the distinct KC sets observed in a dataset. Singleton sets
// come first, ordered by skill id, followed by multi-KC sets in lexicographic
// order, so the id assignment depends only on the set of observed KC sets.
class CombinedKcVocab {
 public:
  CombinedKcVocab() = default;
  explicit CombinedKcVocab(const std::set<std::vector<int>>& observed);

  std::optional<int> find(const std::vector<int>& sorted_tags) const;
  // Number of assigned ids; the reserved id for unseen sets equals size().
  std::size_t size() const { return sets_.size(); }
  int unknown_id() const { return static_cast<int>(sets_.size()); }
  const std::vector<std::vector<int>>& sets() const { return sets_; }

 private:
  std::vector<std::vector<int>> sets_;
  std::map<std::vector<int>, int> ids_;
};

// Maps a KC set (any order, duplicates allowed) to its combined tag id.
// Throws UsageError for an empty set; unseen sets map to vocab.unknown_id().
int combine_kcs(std::vector<int> kc_tags, const CombinedKcVocab& vocab);

struct Dataset {
  // learner id -> interactions sorted by timestamp (stable on ties).
  std::map<std::string, std::vector<LabeledInteraction>> learners;
  std::set<int> kc_vocab;
  CombinedKcVocab combined_kc_vocab;
  std::set<std::string> item_vocab;

  std::size_t n_interactions() const;

  // Groups, stable-sorts and indexes interactions without filtering.
  static Dataset from_interactions(std::vector<LabeledInteraction> interactions);
  static Dataset from_learners(
      std::map<std::string, std::vector<LabeledInteraction>> learners);

  // Flattened in learner-id order, then time order.
  std::vector<LabeledInteraction> flatten() const;
};

struct PreprocessReport {
  std::size_t input_interactions = 0;
  std::size_t dropped_untagged = 0;
  std::size_t dropped_learners = 0;
  std::size_t dropped_learner_interactions = 0;
};

inline constexpr std::size_t kDefaultMinInteractions = 10;

// Drops untagged interactions, then learners left with fewer than
// `min_interactions`. Throws DataError when nothing survives.
Dataset preprocess(std::vector<LabeledInteraction> labeled,
                   std::size_t min_interactions = kDefaultMinInteractions,
                   PreprocessReport* report = nullptr);

struct DatasetStats {
  std::size_t n_learners = 0;
  std::size_t n_interactions = 0;
  // Interactions counted once per KC, the view used for raw-data totals.
  std::size_t n_interactions_expanded = 0;
  double mean_kcs_per_item = 0;
  double median_items_per_kc = 0;
  double median_learners_per_item = 0;
  double median_learners_per_kc = 0;
  double median_interactions_per_learner = 0;
  std::size_t n_correct = 0;
  std::size_t n_wrong = 0;
};

// Median with the mean-of-middles convention for even counts. Throws on empty.
double median(std::vector<double> values);

DatasetStats compute_stats(const Dataset& dataset);

// (interactions per learner, number of learners) sorted by count.
std::vector<std::pair<std::size_t, std::size_t>> powerlaw_histogram(
    const Dataset& dataset);

// Estimates the density exponent alpha of p(n) ~ n^-alpha from
// per-learner counts: logarithmic bins from `min_count`, density per unit
// width, least-squares slope on log-log axes over bins with at least
// `min_bin_learners` learners.
double fit_powerlaw_exponent(std::span<const std::size_t> counts,
                             std::size_t min_count = kDefaultMinInteractions,
                             std::size_t min_bin_learners = 5);

double correctness_ratio(const Dataset& dataset);

struct SplitManifest {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  std::vector<std::string> train;  // sorted
  std::vector<std::string> test;   // sorted
};

// Partitions learner ids. The test side holds round(test_fraction * n)
// learners, clamped so neither side is empty.
SplitManifest split_learners(const std::vector<std::string>& learner_ids,
                             double test_fraction, std::uint64_t seed);

// Restriction of a dataset to the given learners; vocabularies are rebuilt
// from the retained interactions only.
Dataset subset(const Dataset& dataset, const std::vector<std::string>& learner_ids);

std::vector<std::string> learner_ids(const Dataset& dataset);

std::pair<Dataset, Dataset> learner_split(const Dataset& dataset, double test_fraction,
                                          std::uint64_t seed);

// Uniform sample of n learners without replacement.
Dataset sample_learners(const Dataset& dataset, std::size_t n, std::uint64_t seed);

}  // namespace ktrace
