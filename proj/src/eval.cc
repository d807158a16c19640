#include "ktrace/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "ktrace/error.h"
#include "text_util.h"

namespace ktrace {

double compute_auc(std::span<const std::uint8_t> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw UsageError("AUC: labels and scores differ in length");
  const std::size_t n = labels.size();
  std::size_t n_pos = 0;
  for (auto y : labels) n_pos += y ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UsageError("AUC undefined: only one class present");
  for (double s : scores) {
    if (std::isnan(s)) throw UsageError("AUC: NaN score");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the positive rank sum; tied groups share rank (lo + hi + 1) / 2.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo + 1;
    while (hi < n && scores[order[hi]] == scores[order[lo]]) ++hi;
    std::size_t pos_in_group = 0;
    for (std::size_t i = lo; i < hi; ++i) pos_in_group += labels[order[i]] ? 1 : 0;
    twice_rank_sum += pos_in_group * (lo + 1 + hi);
    lo = hi;
  }
  // 2 * (#concordant + 0.5 * #tied), exact in integers.
  const std::uint64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double accuracy_at_half(std::span<const std::uint8_t> labels, std::span<const double> scores) {
  if (labels.size() != scores.size() || labels.empty()) {
    throw UsageError("accuracy: bad input lengths");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    hits += ((scores[i] >= 0.5) == (labels[i] != 0)) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBaseline: return "baseline";
    case ModelKind::kLogistic: return "lr";
    case ModelKind::kDkt: return "dkt";
    case ModelKind::kSakt: return "sakt";
  }
  return "unknown";
}

ModelKind parse_model(std::string_view name) {
  for (auto k : {ModelKind::kBaseline, ModelKind::kLogistic, ModelKind::kDkt, ModelKind::kSakt}) {
    if (model_name(k) == name) return k;
  }
  throw UsageError("unknown model '" + std::string(name) + "'");
}

TrainedModel train_model(const Dataset& train, const ModelSpec& spec,
                         const FeatureConfig& features, unsigned jobs) {
  TrainedModel m;
  m.kind = spec.kind;
  m.train = spec.train;
  switch (spec.kind) {
    case ModelKind::kBaseline:
      m.baseline = fit_baseline(train);
      break;
    case ModelKind::kLogistic: {
      m.layout = FeatureLayout::build(features, train);
      const auto rows = encode(train, m.layout, jobs);
      const auto x = to_matrix(rows, m.layout.width());
      auto options = spec.logistic;
      options.jobs = jobs;
      m.linear = fit_logistic(x, options);
      m.loss_trace = m.linear.convergence.loss_trace;
      break;
    }
    case ModelKind::kDkt: {
      m.seq_vocab = SequenceVocab::build(train, spec.vocabulary);
      const auto samples = build_sequences(train, m.seq_vocab);
      m.dkt = DktModel(m.seq_vocab.n_tags(), spec.hidden, derive_seed(spec.train.seed, 1),
                       spec.dropout);
      m.loss_trace = train_sequence_model(m.dkt, samples, spec.train).epoch_loss;
      break;
    }
    case ModelKind::kSakt: {
      m.seq_vocab = SequenceVocab::build(train, spec.vocabulary);
      const auto samples = build_sequences(train, m.seq_vocab);
      const int len = spec.seq_len > 0 ? spec.seq_len : std::max(2, median_sequence_length(train));
      m.sakt = SaktModel(m.seq_vocab.n_tags(), spec.dim, len, derive_seed(spec.train.seed, 2),
                         spec.dropout);
      m.loss_trace = train_sequence_model(m.sakt, samples, spec.train).epoch_loss;
      break;
    }
  }
  return m;
}

Scored score(const TrainedModel& model, const Dataset& test, unsigned jobs) {
  Scored out;
  out.n_learners = test.learners.size();
  switch (model.kind) {
    case ModelKind::kBaseline:
      out.scores = predict_baseline(model.baseline, test);
      for (const auto& [id, seq] : test.learners) {
        for (const auto& x : seq) out.labels.push_back(x.correct ? 1 : 0);
      }
      break;
    case ModelKind::kLogistic: {
      const auto rows = encode(test, model.layout, jobs);
      const auto x = to_matrix(rows, model.layout.width());
      out.scores = predict_proba(model.linear, x);
      out.labels = x.labels;
      break;
    }
    case ModelKind::kDkt:
    case ModelKind::kSakt: {
      for (const auto& s : build_sequences(test, model.seq_vocab)) {
        const bool dkt = model.kind == ModelKind::kDkt;
        const auto p = dkt ? dkt_predict_next(model.dkt, s) : sakt_predict_next(model.sakt, s);
        const auto y = next_step_labels(s, dkt ? 0 : model.sakt.max_len);
        out.scores.insert(out.scores.end(), p.begin(), p.end());
        out.labels.insert(out.labels.end(), y.begin(), y.end());
      }
      break;
    }
  }
  return out;
}

EvalReport make_report(const TrainedModel& model, const Scored& scored, std::uint64_t seed,
                       std::string hash) {
  EvalReport r;
  r.model = std::string(model_name(model.kind));
  switch (model.kind) {
    case ModelKind::kBaseline: r.feature_family = "item_frequency"; break;
    case ModelKind::kLogistic:
      r.feature_family = std::string(family_name(model.layout.config().family));
      break;
    default: r.feature_family = "original"; break;
  }
  r.auc = compute_auc(scored.labels, scored.scores);
  r.accuracy = accuracy_at_half(scored.labels, scored.scores);
  r.n_test_interactions = scored.labels.size();
  r.n_test_learners = scored.n_learners;
  r.seed = seed;
  r.config_hash = std::move(hash);
  return r;
}

EvalReport run_experiment(const Dataset& dataset, const ModelSpec& spec,
                          const FeatureConfig& features, const SplitParams& split,
                          std::uint64_t seed, unsigned jobs) {
  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const UsageError& e) {
      throw UsageError(std::string("[") + name + "] " + e.what());
    } catch (const NumericError& e) {
      throw NumericError(std::string("[") + name + "] " + e.what());
    } catch (const DataError& e) {
      throw DataError(std::string("[") + name + "] " + e.what());
    }
  };
  auto [train, test] =
      stage("split", [&] { return learner_split(dataset, split.test_fraction, split.seed); });
  ModelSpec seeded = spec;
  seeded.train.seed = seed;
  const auto model = stage("train", [&] { return train_model(train, seeded, features, jobs); });
  const auto scored = stage("predict", [&] { return score(model, test, jobs); });
  return stage("evaluate", [&] {
    return make_report(model, scored, seed,
                       config_hash(describe_config(seeded, features, split, seed)));
  });
}

std::string describe_config(const ModelSpec& spec, const FeatureConfig& features,
                            const SplitParams& split, std::uint64_t seed) {
  std::ostringstream s;
  s << "model=" << model_name(spec.kind);
  if (spec.kind == ModelKind::kLogistic) {
    s << ";family=" << family_name(features.family)
      << ";windows=" << format_windows(features.effective_windows()) << ";scale=" << features.scale
      << ";l2=" << detail::format_double(spec.logistic.l2)
      << ";max_iter=" << spec.logistic.max_iter
      << ";tol=" << detail::format_double(spec.logistic.tol)
      << ";memory=" << spec.logistic.memory;
  } else if (spec.kind != ModelKind::kBaseline) {
    s << ";lr=" << detail::format_double(spec.train.learning_rate)
      << ";epochs=" << spec.train.epochs << ";batch=" << spec.train.batch_size
      << ";dropout=" << detail::format_double(spec.dropout)
      << ";vocab=" << (spec.vocabulary == SequenceVocabulary::kCombined ? "combined" : "original");
    if (spec.kind == ModelKind::kDkt) s << ";hidden=" << spec.hidden;
    if (spec.kind == ModelKind::kSakt) s << ";dim=" << spec.dim << ";seq_len=" << spec.seq_len;
  }
  s << ";test=" << detail::format_double(split.test_fraction) << ";split_seed=" << split.seed
    << ";seed=" << seed;
  return s.str();
}

std::string config_hash(std::string_view canonical) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string feature_set_label(const EvalReport& r) {
  if (r.feature_family == "item_frequency") return "Correctness Probability per Item";
  if (r.feature_family == "irt") return "IRT";
  if (r.feature_family == "pfa") return "PFA";
  if (r.feature_family == "das3h") return "DAS3H";
  if (r.feature_family == "best_lr") return "Best LR-Features";
  if (r.feature_family == "best_lr_tw") return "Best LR-Features with Time windowing";
  if (r.feature_family == "original") return "Original features";
  return r.feature_family;
}

std::string format_leaderboard(std::span<const EvalReport> reports) {
  std::string out = "Feature Set\tModel\tAUC\n";
  for (const auto& r : reports) {
    std::string model = r.model == "lr" ? "LR" : r.model == "baseline" ? "Baseline Model"
                        : r.model == "dkt" ? "DKT" : r.model == "sakt" ? "SAKT" : r.model;
    char auc[32];
    std::snprintf(auc, sizeof auc, "%.4f", r.auc);
    out += feature_set_label(r) + "\t" + model + "\t" + auc + "\n";
  }
  return out;
}

}  // namespace ktrace
