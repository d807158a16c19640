#include "ktrace/seq_models.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "ktrace/error.h"

namespace ktrace {

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using MapMat = Map<MatrixXd>;
using MapVec = Map<VectorXd>;
using ConstMapMat = Map<const MatrixXd>;
using ConstMapVec = Map<const VectorXd>;

int SequenceVocab::n_tags() const {
  return kind == SequenceVocabulary::kCombined ? static_cast<int>(combined.size()) + 1
                                               : static_cast<int>(original.size()) + 1;
}

int SequenceVocab::tag_of(const std::vector<int>& kc_tags) const {
  if (kc_tags.empty()) throw DataError("sequence model input with an empty KC set");
  if (kind == SequenceVocabulary::kCombined) return combine_kcs(kc_tags, combined);
  const int first = *std::min_element(kc_tags.begin(), kc_tags.end());
  const auto it = std::lower_bound(original.begin(), original.end(), first);
  if (it == original.end() || *it != first) return static_cast<int>(original.size());
  return static_cast<int>(it - original.begin());
}

SequenceVocab SequenceVocab::build(const Dataset& train, SequenceVocabulary kind) {
  SequenceVocab v;
  v.kind = kind;
  v.combined = train.combined_kc_vocab;
  v.original.assign(train.kc_vocab.begin(), train.kc_vocab.end());
  return v;
}

std::vector<SequenceSample> build_sequences(const Dataset& dataset, const SequenceVocab& vocab,
                                            std::size_t min_length) {
  std::vector<SequenceSample> out;
  out.reserve(dataset.learners.size());
  for (const auto& [id, seq] : dataset.learners) {
    if (seq.size() < min_length) continue;
    SequenceSample s;
    s.learner_id = id;
    s.tags.reserve(seq.size());
    s.correct.reserve(seq.size());
    for (const auto& x : seq) {
      s.tags.push_back(vocab.tag_of(x.kc_tags));
      s.correct.push_back(x.correct ? 1 : 0);
    }
    out.push_back(std::move(s));
  }
  return out;
}

int median_sequence_length(const Dataset& dataset) {
  std::vector<double> counts;
  for (const auto& [id, seq] : dataset.learners) counts.push_back(static_cast<double>(seq.size()));
  return static_cast<int>(std::lround(median(std::move(counts))));
}

namespace {

double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<TensorSpec> pack(std::initializer_list<std::pair<const char*, std::pair<int, int>>> shapes) {
  std::vector<TensorSpec> out;
  std::size_t offset = 0;
  for (const auto& [name, shape] : shapes) {
    out.push_back({name, shape.first, shape.second, offset});
    offset += static_cast<std::size_t>(shape.first) * static_cast<std::size_t>(shape.second);
  }
  return out;
}

std::size_t total_size(const std::vector<TensorSpec>& specs) {
  const auto& last = specs.back();
  return last.offset + static_cast<std::size_t>(last.rows) * static_cast<std::size_t>(last.cols);
}

void init_uniform(std::vector<double>& params, const std::vector<TensorSpec>& specs,
                  const std::vector<int>& fan_in, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in[i]));
    const auto n = static_cast<std::size_t>(specs[i].rows) * static_cast<std::size_t>(specs[i].cols);
    for (std::size_t k = 0; k < n; ++k) params[specs[i].offset + k] = rng.uniform(-bound, bound);
  }
}

void check_tags(const SequenceSample& s, int n_tags) {
  if (s.tags.size() != s.correct.size()) throw UsageError("sequence tags/labels length mismatch");
  for (int tag : s.tags) {
    if (tag < 0 || tag >= n_tags) throw UsageError("sequence tag outside the vocabulary");
  }
}

// Inverted dropout mask: 0 with probability p, else 1 / (1 - p).
template <typename Mask>
void fill_mask(Mask& mask, double p, Rng& rng) {
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index c = 0; c < mask.cols(); ++c) {
    for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = rng.bernoulli(p) ? 0.0 : keep;
  }
}

// ---------------------------------------------------------------- DKT

struct DktViews {
  ConstMapMat w_x, w_h;
  ConstMapVec b_h;
  ConstMapMat w_y;
  ConstMapVec b_y;
};

struct DktGradViews {
  MapMat w_x, w_h;
  MapVec b_h;
  MapMat w_y;
  MapVec b_y;
};

}  // namespace

DktModel::DktModel(int n_tags_in, int hidden_in, std::uint64_t seed, double dropout_in)
    : n_tags(n_tags_in), hidden(hidden_in), dropout(dropout_in) {
  if (n_tags <= 0 || hidden <= 0) throw UsageError("DKT dimensions must be positive");
  if (dropout < 0 || dropout >= 1) throw UsageError("dropout must lie in [0, 1)");
  const auto specs = tensors();
  params.assign(total_size(specs), 0.0);
  init_uniform(params, specs, {2 * n_tags, hidden, hidden, hidden, hidden}, seed);
}

std::vector<TensorSpec> DktModel::tensors() const {
  return pack({{"W_x", {hidden, 2 * n_tags}},
               {"W_h", {hidden, hidden}},
               {"b_h", {hidden, 1}},
               {"W_y", {n_tags, hidden}},
               {"b_y", {n_tags, 1}}});
}

namespace {

DktViews dkt_views(const DktModel& m) {
  const auto s = m.tensors();
  const double* p = m.params.data();
  return {ConstMapMat(p + s[0].offset, s[0].rows, s[0].cols),
          ConstMapMat(p + s[1].offset, s[1].rows, s[1].cols),
          ConstMapVec(p + s[2].offset, s[2].rows),
          ConstMapMat(p + s[3].offset, s[3].rows, s[3].cols),
          ConstMapVec(p + s[4].offset, s[4].rows)};
}

DktGradViews dkt_grad_views(const DktModel& m, std::vector<double>& g) {
  const auto s = m.tensors();
  double* p = g.data();
  return {MapMat(p + s[0].offset, s[0].rows, s[0].cols),
          MapMat(p + s[1].offset, s[1].rows, s[1].cols),
          MapVec(p + s[2].offset, s[2].rows),
          MapMat(p + s[3].offset, s[3].rows, s[3].cols),
          MapVec(p + s[4].offset, s[4].rows)};
}

}  // namespace

std::vector<std::vector<double>> dkt_forward(const DktModel& model, const SequenceSample& sample) {
  check_tags(sample, model.n_tags);
  const auto v = dkt_views(model);
  std::vector<std::vector<double>> out;
  VectorXd h = VectorXd::Zero(model.hidden);
  for (std::size_t t = 0; t + 1 < sample.size(); ++t) {
    const int x = sample.tags[t] + sample.correct[t] * model.n_tags;
    h = (v.w_x.col(x) + v.w_h * h + v.b_h).array().tanh().matrix();
    const VectorXd z = v.w_y * h + v.b_y;
    std::vector<double> probs(static_cast<std::size_t>(model.n_tags));
    for (int k = 0; k < model.n_tags; ++k) probs[static_cast<std::size_t>(k)] = sigmoid(z(k));
    out.push_back(std::move(probs));
  }
  return out;
}

std::vector<double> dkt_predict_next(const DktModel& model, const SequenceSample& sample) {
  check_tags(sample, model.n_tags);
  const auto v = dkt_views(model);
  std::vector<double> out;
  VectorXd h = VectorXd::Zero(model.hidden);
  for (std::size_t t = 0; t + 1 < sample.size(); ++t) {
    const int x = sample.tags[t] + sample.correct[t] * model.n_tags;
    h = (v.w_x.col(x) + v.w_h * h + v.b_h).array().tanh().matrix();
    const int j = sample.tags[t + 1];
    out.push_back(sigmoid(v.w_y.row(j).dot(h) + v.b_y(j)));
  }
  return out;
}

double dkt_loss(const DktModel& model, const SequenceSample& sample, std::vector<double>* grad,
                Rng* dropout_rng) {
  check_tags(sample, model.n_tags);
  if (sample.size() < 2) return 0.0;
  const int hidden = model.hidden;
  const std::size_t steps = sample.size() - 1;
  const auto v = dkt_views(model);
  const bool use_dropout = dropout_rng != nullptr && model.dropout > 0;

  std::vector<VectorXd> h(steps + 1, VectorXd::Zero(hidden));  // h[t + 1] is h_t
  std::vector<VectorXd> h_out(steps);                           // after dropout
  std::vector<VectorXd> masks(use_dropout ? steps : 0);
  std::vector<double> delta(steps);
  double loss = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    const int x = sample.tags[t] + sample.correct[t] * model.n_tags;
    h[t + 1] = (v.w_x.col(x) + v.w_h * h[t] + v.b_h).array().tanh().matrix();
    if (use_dropout) {
      masks[t].resize(hidden);
      fill_mask(masks[t], model.dropout, *dropout_rng);
      h_out[t] = h[t + 1].cwiseProduct(masks[t]);
    } else {
      h_out[t] = h[t + 1];
    }
    const int j = sample.tags[t + 1];
    const double z = v.w_y.row(j).dot(h_out[t]) + v.b_y(j);
    const double y = sample.correct[t + 1];
    loss += softplus(z) - y * z;
    delta[t] = sigmoid(z) - y;
  }
  if (!grad) return loss;

  auto g = dkt_grad_views(model, *grad);
  VectorXd dh_next = VectorXd::Zero(hidden);
  for (std::size_t t = steps; t-- > 0;) {
    const int j = sample.tags[t + 1];
    g.w_y.row(j) += delta[t] * h_out[t].transpose();
    g.b_y(j) += delta[t];
    VectorXd dh = delta[t] * v.w_y.row(j).transpose();
    if (use_dropout) dh = dh.cwiseProduct(masks[t]);
    dh += dh_next;
    const VectorXd da = dh.cwiseProduct((1.0 - h[t + 1].array().square()).matrix());
    const int x = sample.tags[t] + sample.correct[t] * model.n_tags;
    g.w_x.col(x) += da;
    g.w_h.noalias() += da * h[t].transpose();
    g.b_h += da;
    dh_next.noalias() = v.w_h.transpose() * da;
  }
  return loss;
}

// ---------------------------------------------------------------- SAKT

SaktModel::SaktModel(int n_tags_in, int dim_in, int max_len_in, std::uint64_t seed,
                     double dropout_in)
    : n_tags(n_tags_in), dim(dim_in), max_len(max_len_in), dropout(dropout_in) {
  if (n_tags <= 0 || dim <= 0 || max_len < 2) {
    throw UsageError("SAKT needs positive dimensions and max_len >= 2");
  }
  if (dropout < 0 || dropout >= 1) throw UsageError("dropout must lie in [0, 1)");
  const auto specs = tensors();
  params.assign(total_size(specs), 0.0);
  // Embedding tables use the embedding width as fan-in.
  std::vector<int> fan_in(specs.size(), dim);
  init_uniform(params, specs, fan_in, seed);
}

std::vector<TensorSpec> SaktModel::tensors() const {
  return pack({{"interaction_embedding", {2 * n_tags, dim}},
               {"exercise_embedding", {n_tags, dim}},
               {"position_embedding", {max_len, dim}},
               {"W_Q", {dim, dim}},
               {"W_K", {dim, dim}},
               {"W_V", {dim, dim}},
               {"W_1", {dim, dim}},
               {"b_1", {dim, 1}},
               {"W_2", {dim, dim}},
               {"b_2", {dim, 1}},
               {"w_o", {dim, 1}},
               {"b_o", {1, 1}}});
}

namespace {

template <typename Ptr, typename Mat, typename Vec>
struct SaktViewsT {
  Mat m, e, p, wq, wk, wv, w1;
  Vec b1;
  Mat w2;
  Vec b2, wo;
  Ptr bo;
};
using SaktViews = SaktViewsT<const double*, ConstMapMat, ConstMapVec>;
using SaktGradViews = SaktViewsT<double*, MapMat, MapVec>;

template <typename Views, typename Ptr>
Views make_sakt_views(const SaktModel& model, Ptr base) {
  const auto s = model.tensors();
  auto mat = [&](int i) {
    return decltype(Views::m)(base + s[static_cast<std::size_t>(i)].offset,
                              s[static_cast<std::size_t>(i)].rows,
                              s[static_cast<std::size_t>(i)].cols);
  };
  auto vec = [&](int i) {
    return decltype(Views::b1)(base + s[static_cast<std::size_t>(i)].offset,
                               s[static_cast<std::size_t>(i)].rows);
  };
  return Views{mat(0), mat(1), mat(2), mat(3), mat(4), mat(5), mat(6),
               vec(7), mat(8), vec(9), vec(10), base + s[11].offset};
}

// Forward pass on one chunk with optional backward pass. Returns the summed
// cross-entropy over query positions.
double sakt_run(const SaktModel& model, const SequenceSample& chunk, Rng* dropout_rng,
                std::vector<double>* grad, SaktOutput* out) {
  check_tags(chunk, model.n_tags);
  if (static_cast<int>(chunk.size()) > model.max_len) {
    throw UsageError("SAKT chunk longer than max_len");
  }
  if (chunk.size() < 2) return 0.0;
  const int d = model.dim;
  const int K = model.n_tags;
  const auto q_len = static_cast<Eigen::Index>(chunk.size() - 1);
  const auto v = make_sakt_views<SaktViews>(model, model.params.data());
  const bool use_dropout = dropout_rng != nullptr && model.dropout > 0;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  MatrixXd qin(q_len, d), x(q_len, d);
  std::vector<int> interaction(static_cast<std::size_t>(q_len));
  for (Eigen::Index i = 0; i < q_len; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    qin.row(i) = v.e.row(chunk.tags[ui + 1]);
    interaction[ui] = chunk.tags[ui] + chunk.correct[ui] * K;
    x.row(i) = v.m.row(interaction[ui]) + v.p.row(i);
  }
  const MatrixXd q = qin * v.wq;
  const MatrixXd k = x * v.wk;
  const MatrixXd val = x * v.wv;
  MatrixXd att = MatrixXd::Zero(q_len, q_len);
  for (Eigen::Index i = 0; i < q_len; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j <= i; ++j) {
      att(i, j) = q.row(i).dot(k.row(j)) * scale;
      mx = std::max(mx, att(i, j));
    }
    double sum = 0;
    for (Eigen::Index j = 0; j <= i; ++j) {
      att(i, j) = std::exp(att(i, j) - mx);
      sum += att(i, j);
    }
    for (Eigen::Index j = 0; j <= i; ++j) att(i, j) /= sum;
  }
  MatrixXd attended = att * val;
  MatrixXd mask_a, mask_f;
  if (use_dropout) {
    mask_a.resize(q_len, d);
    mask_f.resize(q_len, d);
    fill_mask(mask_a, model.dropout, *dropout_rng);
    fill_mask(mask_f, model.dropout, *dropout_rng);
    attended = attended.cwiseProduct(mask_a);
  }
  const MatrixXd r1 = attended + qin;
  const MatrixXd pre1 = (r1 * v.w1).rowwise() + v.b1.transpose();
  const MatrixXd h1 = pre1.cwiseMax(0.0);
  MatrixXd f = (h1 * v.w2).rowwise() + v.b2.transpose();
  if (use_dropout) f = f.cwiseProduct(mask_f);
  const MatrixXd r2 = f + r1;
  const VectorXd logit = (r2 * v.wo).array() + *v.bo;

  double loss = 0;
  VectorXd delta(q_len);
  for (Eigen::Index i = 0; i < q_len; ++i) {
    const double y = chunk.correct[static_cast<std::size_t>(i) + 1];
    loss += softplus(logit(i)) - y * logit(i);
    delta(i) = sigmoid(logit(i)) - y;
  }
  if (out) {
    out->probabilities.resize(static_cast<std::size_t>(q_len));
    out->attention.assign(static_cast<std::size_t>(q_len), {});
    for (Eigen::Index i = 0; i < q_len; ++i) {
      out->probabilities[static_cast<std::size_t>(i)] = sigmoid(logit(i));
      auto& row = out->attention[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j <= i; ++j) row.push_back(att(i, j));
    }
  }
  if (!grad) return loss;

  auto g = make_sakt_views<SaktGradViews>(model, grad->data());
  g.wo += r2.transpose() * delta;
  *g.bo += delta.sum();
  const MatrixXd d_r2 = delta * v.wo.transpose();
  MatrixXd d_f = d_r2;
  if (use_dropout) d_f = d_f.cwiseProduct(mask_f);
  g.w2 += h1.transpose() * d_f;
  g.b2 += d_f.colwise().sum().transpose();
  const MatrixXd d_pre1 = (d_f * v.w2.transpose()).cwiseProduct(
      (pre1.array() > 0.0).cast<double>().matrix());
  g.w1 += r1.transpose() * d_pre1;
  g.b1 += d_pre1.colwise().sum().transpose();
  const MatrixXd d_r1 = d_r2 + d_pre1 * v.w1.transpose();
  MatrixXd d_att_out = d_r1;
  if (use_dropout) d_att_out = d_att_out.cwiseProduct(mask_a);
  MatrixXd d_qin = d_r1;

  const MatrixXd d_att = d_att_out * val.transpose();
  const MatrixXd d_val = att.transpose() * d_att_out;
  MatrixXd d_scores = MatrixXd::Zero(q_len, q_len);
  for (Eigen::Index i = 0; i < q_len; ++i) {
    double inner = 0;
    for (Eigen::Index j = 0; j <= i; ++j) inner += att(i, j) * d_att(i, j);
    for (Eigen::Index j = 0; j <= i; ++j) d_scores(i, j) = att(i, j) * (d_att(i, j) - inner) * scale;
  }
  const MatrixXd d_q = d_scores * k;
  const MatrixXd d_k = d_scores.transpose() * q;
  g.wq += qin.transpose() * d_q;
  d_qin += d_q * v.wq.transpose();
  g.wk += x.transpose() * d_k;
  g.wv += x.transpose() * d_val;
  const MatrixXd d_x = d_k * v.wk.transpose() + d_val * v.wv.transpose();
  for (Eigen::Index i = 0; i < q_len; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    g.m.row(interaction[ui]) += d_x.row(i);
    g.p.row(i) += d_x.row(i);
    g.e.row(chunk.tags[ui + 1]) += d_qin.row(i);
  }
  return loss;
}

}  // namespace

SaktOutput sakt_forward(const SaktModel& model, const SequenceSample& chunk, bool train_mode,
                        Rng* dropout_rng) {
  SaktOutput out;
  sakt_run(model, chunk, train_mode ? dropout_rng : nullptr, nullptr, &out);
  return out;
}

double sakt_loss(const SaktModel& model, const SequenceSample& chunk, std::vector<double>* grad,
                 Rng* dropout_rng) {
  return sakt_run(model, chunk, dropout_rng, grad, nullptr);
}

std::vector<SequenceSample> sakt_chunks(const SequenceSample& sample, int max_len) {
  std::vector<SequenceSample> out;
  const auto len = static_cast<std::size_t>(max_len);
  for (std::size_t start = 0; start < sample.size(); start += len) {
    const std::size_t end = std::min(sample.size(), start + len);
    SequenceSample c;
    c.learner_id = sample.learner_id;
    c.tags.assign(sample.tags.begin() + static_cast<std::ptrdiff_t>(start),
                  sample.tags.begin() + static_cast<std::ptrdiff_t>(end));
    c.correct.assign(sample.correct.begin() + static_cast<std::ptrdiff_t>(start),
                     sample.correct.begin() + static_cast<std::ptrdiff_t>(end));
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<double> sakt_predict_next(const SaktModel& model, const SequenceSample& sample) {
  std::vector<double> out;
  for (const auto& chunk : sakt_chunks(sample, model.max_len)) {
    if (chunk.size() < 2) continue;
    const auto o = sakt_forward(model, chunk, false);
    out.insert(out.end(), o.probabilities.begin(), o.probabilities.end());
  }
  return out;
}

std::vector<std::uint8_t> next_step_labels(const SequenceSample& sample, int chunk_len) {
  std::vector<std::uint8_t> out;
  const std::size_t len = chunk_len > 0 ? static_cast<std::size_t>(chunk_len) : sample.size();
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (len == 0 || i % len == 0) continue;
    out.push_back(sample.correct[i]);
  }
  return out;
}

namespace {

template <typename Model, typename LossFn>
TrainResult train_impl(Model& model, const std::vector<SequenceSample>& units,
                       const TrainConfig& config, LossFn loss_fn) {
  if (units.empty()) throw UsageError("training set is empty");
  if (config.learning_rate < 0) throw UsageError("learning rate must be non-negative");
  if (config.batch_size == 0) throw UsageError("batch size must be positive");
  const std::size_t n_params = model.params.size();
  std::vector<double> m(n_params, 0.0), v(n_params, 0.0), grad(n_params);
  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed);
  Rng* dropout_rng = model.dropout > 0 ? &rng : nullptr;
  TrainResult result;
  std::int64_t step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0;
    std::size_t epoch_targets = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += config.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + config.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0;
      std::size_t targets = 0;
      for (std::size_t b = lo; b < hi; ++b) {
        const auto& unit = units[order[b]];
        if (unit.size() < 2) continue;
        batch_loss += loss_fn(model, unit, &grad, dropout_rng);
        targets += unit.size() - 1;
      }
      if (targets == 0) continue;
      if (!std::isfinite(batch_loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch + 1) +
                           ", batch starting at " + std::to_string(lo));
      }
      epoch_loss += batch_loss;
      epoch_targets += targets;
      const double inv = 1.0 / static_cast<double>(targets);
      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < n_params; ++i) {
        const double gi = grad[i] * inv;
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
        model.params[i] -=
            config.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.epsilon);
      }
    }
    result.epoch_loss.push_back(epoch_targets ? epoch_loss / static_cast<double>(epoch_targets)
                                              : 0.0);
  }
  return result;
}

}  // namespace

TrainResult train_sequence_model(DktModel& model, const std::vector<SequenceSample>& train,
                                 const TrainConfig& config) {
  return train_impl(model, train, config,
                    [](const DktModel& mdl, const SequenceSample& s, std::vector<double>* g,
                       Rng* rng) { return dkt_loss(mdl, s, g, rng); });
}

TrainResult train_sequence_model(SaktModel& model, const std::vector<SequenceSample>& train,
                                 const TrainConfig& config) {
  std::vector<SequenceSample> chunks;
  for (const auto& s : train) {
    for (auto& c : sakt_chunks(s, model.max_len)) {
      if (c.size() >= 2) chunks.push_back(std::move(c));
    }
  }
  return train_impl(model, chunks, config,
                    [](const SaktModel& mdl, const SequenceSample& s, std::vector<double>* g,
                       Rng* rng) { return sakt_loss(mdl, s, g, rng); });
}

}  // namespace ktrace
