#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ktrace/prep.h"
#include "ktrace/random.h"

namespace ktrace {

// Tag vocabulary for the sequence models: combined KC sets (default) or the
// smallest original KC of each item.
enum class SequenceVocabulary { kCombined, kOriginal };

struct SequenceVocab {
  SequenceVocabulary kind = SequenceVocabulary::kCombined;
  CombinedKcVocab combined;
  std::vector<int> original;  // sorted skill ids

  // Number of tags including the trailing slot for unseen values.
  int n_tags() const;
  int tag_of(const std::vector<int>& kc_tags) const;

  static SequenceVocab build(const Dataset& train, SequenceVocabulary kind);
};

struct SequenceSample {
  std::string learner_id;
  std::vector<int> tags;
  std::vector<std::uint8_t> correct;

  std::size_t size() const { return tags.size(); }
};

// One sample per learner with at least `min_length` interactions.
std::vector<SequenceSample> build_sequences(const Dataset& dataset, const SequenceVocab& vocab,
                                            std::size_t min_length = 2);

// Median interactions per learner (mean of middles), rounded half up.
int median_sequence_length(const Dataset& dataset);

// Named slice of a flat parameter vector; data is column-major.
struct TensorSpec {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
};

// Plain tanh RNN:
//   h_t = tanh(W_x x_t + W_h h_{t-1} + b_h),  y_t = sigmoid(W_y h_t + b_y)
// with x_t the one-hot of (tag, correct) at index tag + correct * K.
struct DktModel {
  int n_tags = 0;
  int hidden = 0;
  double dropout = 0.25;  // on the hidden-to-output path, training only
  std::vector<double> params;

  DktModel() = default;
  // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
  DktModel(int n_tags, int hidden, std::uint64_t seed, double dropout = 0.25);

  std::vector<TensorSpec> tensors() const;
};

// Probabilities for all K tags after steps 0..T-2; entry t predicts step t+1.
std::vector<std::vector<double>> dkt_forward(const DktModel& model,
                                             const SequenceSample& sample);
// Probability of a correct answer at steps 1..T-1 (read at the next tag).
std::vector<double> dkt_predict_next(const DktModel& model, const SequenceSample& sample);

// Summed next-step cross-entropy for one sample. When `grad` is non-null the
// analytic gradient is added to it. A non-null `dropout_rng` enables dropout.
double dkt_loss(const DktModel& model, const SequenceSample& sample,
                std::vector<double>* grad, Rng* dropout_rng = nullptr);

// Single-layer, single-head causal self-attention:
//   query_i = E[e_{i+1}]            keys/values_j = M[x_j] + P[j],  j <= i
//   a_i = softmax_j(q_i W_Q . k_j W_K / sqrt(d)) (k W_V)
//   r_i = a_i + query_i            f_i = relu(r_i W_1 + b_1) W_2 + b_2
//   p_i = sigmoid((f_i + r_i) . w_o + b_o)
// Sequences longer than max_len are cut into consecutive chunks.
struct SaktModel {
  int n_tags = 0;
  int dim = 0;
  int max_len = 0;
  double dropout = 0.25;  // on the attention and feed-forward outputs
  std::vector<double> params;

  SaktModel() = default;
  SaktModel(int n_tags, int dim, int max_len, std::uint64_t seed, double dropout = 0.25);

  std::vector<TensorSpec> tensors() const;
};

struct SaktOutput {
  std::vector<double> probabilities;  // per query position of the chunk
  std::vector<std::vector<double>> attention;  // row i has i + 1 weights
};

// One chunk of at most max_len interactions; position i predicts i + 1.
SaktOutput sakt_forward(const SaktModel& model, const SequenceSample& chunk,
                        bool train_mode = false, Rng* dropout_rng = nullptr);
std::vector<SequenceSample> sakt_chunks(const SequenceSample& sample, int max_len);
// Probabilities aligned with every non-first position of every chunk.
std::vector<double> sakt_predict_next(const SaktModel& model, const SequenceSample& sample);
// Labels aligned with sakt_predict_next / dkt_predict_next.
std::vector<std::uint8_t> next_step_labels(const SequenceSample& sample, int chunk_len = 0);

double sakt_loss(const SaktModel& model, const SequenceSample& chunk,
                 std::vector<double>* grad, Rng* dropout_rng = nullptr);

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;
  int epochs = 10;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean next-step cross-entropy per epoch
};

// Adam on the mean next-step cross-entropy. Throws NumericError when the
// loss becomes non-finite.
TrainResult train_sequence_model(DktModel& model, const std::vector<SequenceSample>& train,
                                 const TrainConfig& config);
TrainResult train_sequence_model(SaktModel& model, const std::vector<SequenceSample>& train,
                                 const TrainConfig& config);

}  // namespace ktrace
