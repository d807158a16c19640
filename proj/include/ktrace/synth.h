#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ktrace/ingest.h"
#include "ktrace/prep.h"

namespace ktrace {

struct SynthConfig {
  std::size_t n_learners = 1000;
  std::size_t n_items = 200;
  std::size_t n_skills = 20;
  double two_kc_probability = 0.5;  // items carry 1 or 2 KCs
  double alpha = 2.0;               // density exponent of interactions per learner
  std::size_t min_interactions = 10;
  std::size_t max_interactions = 0;  // 0: uncapped
  double ability_mean = 0;
  double ability_sd = 1;
  double difficulty_mean = 0;
  double difficulty_sd = 1;
  // Added to the logit per unit of mean ln(1 + prior wins) over the item's KCs.
  double learning_increment = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  std::map<std::string, double> abilities;     // learner id
  std::map<std::string, double> difficulties;  // question id
  std::map<std::string, std::vector<int>> item_kcs;
  SynthConfig config;
};

struct SynthData {
  std::vector<InteractionRecord> records;  // learner then time order
  QuestionBank bank;
  Dataset dataset;
  GroundTruth truth;
};

// Learner a answers item q correctly with probability
//   sigmoid(ability_a - difficulty_q + learning_increment * mean_k ln(1 + wins_k))
// where wins_k counts the learner's earlier correct answers on KC k of q.
// Learner i draws from derive_seed(seed, i), so learners are independent.
SynthData generate(const SynthConfig& config);

// Writes kt1/u<learner>.csv, questions.csv and ground_truth.json.
void write_synth(const std::filesystem::path& dir, const SynthData& data);

}  // namespace ktrace
