#include "ktrace/json_io.h"

#include <fstream>
#include <set>
#include <sstream>

#include "ktrace/error.h"

namespace ktrace {

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& value) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << value.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

namespace {

template <typename T>
T get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DataError(std::string("missing JSON key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw DataError(std::string("bad JSON value for '") + key + "': " + e.what());
  }
}

template <typename T>
void maybe(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = get<T>(j, key);
}

std::string vocab_name(SequenceVocabulary v) {
  return v == SequenceVocabulary::kCombined ? "combined" : "original";
}

SequenceVocabulary parse_vocab(const std::string& s) {
  if (s == "combined") return SequenceVocabulary::kCombined;
  if (s == "original") return SequenceVocabulary::kOriginal;
  throw DataError("unknown sequence vocabulary '" + s + "'");
}

template <typename Model>
void check_params(const Model& m, const char* what) {
  const auto specs = m.tensors();
  const auto& last = specs.back();
  const std::size_t expected = last.offset + static_cast<std::size_t>(last.rows) * last.cols;
  if (m.params.size() != expected) {
    throw DataError(std::string(what) + " checkpoint has " + std::to_string(m.params.size()) +
                    " parameters, expected " + std::to_string(expected));
  }
}

}  // namespace

Json to_json(const PreprocessReport& r) {
  return {{"input_interactions", r.input_interactions},
          {"dropped_untagged", r.dropped_untagged},
          {"dropped_learners", r.dropped_learners},
          {"dropped_learner_interactions", r.dropped_learner_interactions}};
}

Json to_json(const DatasetStats& s) {
  return {{"n_learners", s.n_learners},
          {"n_interactions", s.n_interactions},
          {"n_interactions_expanded", s.n_interactions_expanded},
          {"mean_kcs_per_item", s.mean_kcs_per_item},
          {"median_items_per_kc", s.median_items_per_kc},
          {"median_learners_per_item", s.median_learners_per_item},
          {"median_learners_per_kc", s.median_learners_per_kc},
          {"median_interactions_per_learner", s.median_interactions_per_learner},
          {"n_correct", s.n_correct},
          {"n_wrong", s.n_wrong}};
}

Json to_json(const SplitManifest& s) {
  return {{"test_fraction", s.test_fraction}, {"seed", s.seed}, {"train", s.train}, {"test", s.test}};
}

SplitManifest split_from_json(const Json& j) {
  SplitManifest s;
  s.test_fraction = get<double>(j, "test_fraction");
  s.seed = get<std::uint64_t>(j, "seed");
  s.train = get<std::vector<std::string>>(j, "train");
  s.test = get<std::vector<std::string>>(j, "test");
  return s;
}

Json to_json(const FeatureConfig& c) {
  return {{"family", family_name(c.family)},
          {"windows", format_windows(c.windows)},
          {"scale", c.scale}};
}

FeatureConfig feature_config_from_json(const Json& j) {
  FeatureConfig c;
  try {
    c.family = parse_family(get<std::string>(j, "family"));
    c.windows = parse_windows(get<std::string>(j, "windows"));
  } catch (const UsageError& e) {
    throw DataError(e.what());
  }
  maybe(j, "scale", c.scale);
  return c;
}

Json to_json(const FeatureLayout& layout) {
  Json blocks = Json::array();
  for (const auto& b : layout.blocks()) {
    blocks.push_back({{"name", b.name},
                      {"kind", b.kind == BlockKind::kBinary ? "binary" : "count"},
                      {"group", group_name(b.group)},
                      {"offset", b.offset},
                      {"width", b.width}});
  }
  return {{"config", to_json(layout.config())},
          {"width", layout.width()},
          {"items", layout.items()},
          {"skills", layout.skills()},
          {"blocks", blocks}};
}

FeatureLayout layout_from_json(const Json& j) {
  FeatureLayout layout(feature_config_from_json(get<Json>(j, "config")),
                       get<std::vector<std::string>>(j, "items"),
                       get<std::vector<int>>(j, "skills"));
  if (j.contains("width") && get<std::uint32_t>(j, "width") != layout.width()) {
    throw DataError("layout width does not match its vocabularies");
  }
  return layout;
}

Json to_json(const LogisticOptions& o) {
  return {{"l2", o.l2}, {"max_iter", o.max_iter}, {"tol", o.tol}, {"memory", o.memory}};
}

LogisticOptions logistic_options_from_json(const Json& j) {
  LogisticOptions o;
  maybe(j, "l2", o.l2);
  maybe(j, "max_iter", o.max_iter);
  maybe(j, "tol", o.tol);
  maybe(j, "memory", o.memory);
  return o;
}

Json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1},
          {"beta2", c.beta2},                 {"epsilon", c.epsilon},
          {"batch_size", c.batch_size},       {"epochs", c.epochs},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  maybe(j, "learning_rate", c.learning_rate);
  maybe(j, "beta1", c.beta1);
  maybe(j, "beta2", c.beta2);
  maybe(j, "epsilon", c.epsilon);
  maybe(j, "batch_size", c.batch_size);
  maybe(j, "epochs", c.epochs);
  maybe(j, "seed", c.seed);
  return c;
}

Json to_json(const TrainedModel& m) {
  Json j = {{"model", model_name(m.kind)}, {"seed", m.train.seed}, {"loss_trace", m.loss_trace}};
  switch (m.kind) {
    case ModelKind::kBaseline:
      j["item_probability"] = m.baseline.item_probability;
      j["global_mean"] = m.baseline.global_mean;
      break;
    case ModelKind::kLogistic: {
      const auto& c = m.linear.convergence;
      j["layout"] = to_json(m.layout);
      j["options"] = to_json(m.linear.options);
      j["weights"] = m.linear.weights;
      j["bias"] = m.linear.bias;
      j["convergence"] = {{"iterations", c.iterations},
                          {"final_loss", c.final_loss},
                          {"final_gradient_norm", c.final_gradient_norm},
                          {"converged", c.converged}};
      break;
    }
    case ModelKind::kDkt:
    case ModelKind::kSakt: {
      j["train"] = to_json(m.train);
      j["vocabulary"] = {{"kind", vocab_name(m.seq_vocab.kind)},
                         {"combined", m.seq_vocab.combined.sets()},
                         {"original", m.seq_vocab.original}};
      if (m.kind == ModelKind::kDkt) {
        j["n_tags"] = m.dkt.n_tags;
        j["hidden"] = m.dkt.hidden;
        j["dropout"] = m.dkt.dropout;
        j["params"] = m.dkt.params;
      } else {
        j["n_tags"] = m.sakt.n_tags;
        j["dim"] = m.sakt.dim;
        j["max_len"] = m.sakt.max_len;
        j["dropout"] = m.sakt.dropout;
        j["params"] = m.sakt.params;
      }
      break;
    }
  }
  return j;
}

TrainedModel model_from_json(const Json& j) {
  TrainedModel m;
  try {
    m.kind = parse_model(get<std::string>(j, "model"));
  } catch (const UsageError& e) {
    throw DataError(e.what());
  }
  maybe(j, "loss_trace", m.loss_trace);
  maybe(j, "seed", m.train.seed);
  switch (m.kind) {
    case ModelKind::kBaseline:
      m.baseline.item_probability = get<std::map<std::string, double>>(j, "item_probability");
      m.baseline.global_mean = get<double>(j, "global_mean");
      break;
    case ModelKind::kLogistic: {
      m.layout = layout_from_json(get<Json>(j, "layout"));
      m.linear.options = logistic_options_from_json(get<Json>(j, "options"));
      m.linear.weights = get<std::vector<double>>(j, "weights");
      m.linear.bias = get<double>(j, "bias");
      if (m.linear.weights.size() != m.layout.width()) {
        throw DataError("model weights do not match the layout width");
      }
      const Json c = get<Json>(j, "convergence");
      auto& r = m.linear.convergence;
      r.iterations = get<int>(c, "iterations");
      r.final_loss = get<double>(c, "final_loss");
      r.final_gradient_norm = get<double>(c, "final_gradient_norm");
      r.converged = get<bool>(c, "converged");
      r.loss_trace = m.loss_trace;
      break;
    }
    case ModelKind::kDkt:
    case ModelKind::kSakt: {
      m.train = train_config_from_json(get<Json>(j, "train"));
      const Json v = get<Json>(j, "vocabulary");
      m.seq_vocab.kind = parse_vocab(get<std::string>(v, "kind"));
      const auto sets = get<std::vector<std::vector<int>>>(v, "combined");
      m.seq_vocab.combined = CombinedKcVocab(std::set<std::vector<int>>(sets.begin(), sets.end()));
      if (m.seq_vocab.combined.sets() != sets) throw DataError("combined KC vocabulary is not canonical");
      m.seq_vocab.original = get<std::vector<int>>(v, "original");
      const int n_tags = get<int>(j, "n_tags");
      if (n_tags != m.seq_vocab.n_tags()) throw DataError("tag count does not match the vocabulary");
      if (m.kind == ModelKind::kDkt) {
        m.dkt.n_tags = n_tags;
        m.dkt.hidden = get<int>(j, "hidden");
        m.dkt.dropout = get<double>(j, "dropout");
        m.dkt.params = get<std::vector<double>>(j, "params");
        check_params(m.dkt, "DKT");
      } else {
        m.sakt.n_tags = n_tags;
        m.sakt.dim = get<int>(j, "dim");
        m.sakt.max_len = get<int>(j, "max_len");
        m.sakt.dropout = get<double>(j, "dropout");
        m.sakt.params = get<std::vector<double>>(j, "params");
        check_params(m.sakt, "SAKT");
      }
      break;
    }
  }
  return m;
}

Json to_json(const EvalReport& r) {
  return {{"model", r.model},
          {"feature_family", r.feature_family},
          {"auc", r.auc},
          {"accuracy", r.accuracy},
          {"n_test_interactions", r.n_test_interactions},
          {"n_test_learners", r.n_test_learners},
          {"seed", r.seed},
          {"config_hash", r.config_hash}};
}

EvalReport report_from_json(const Json& j) {
  EvalReport r;
  r.model = get<std::string>(j, "model");
  r.feature_family = get<std::string>(j, "feature_family");
  r.auc = get<double>(j, "auc");
  r.accuracy = get<double>(j, "accuracy");
  r.n_test_interactions = get<std::size_t>(j, "n_test_interactions");
  r.n_test_learners = get<std::size_t>(j, "n_test_learners");
  r.seed = get<std::uint64_t>(j, "seed");
  r.config_hash = get<std::string>(j, "config_hash");
  return r;
}

Json to_json(const LimeConfig& c) {
  return {{"n_perturbations", c.n_perturbations},
          {"flip_probability", c.flip_probability},
          {"noise_sigma", c.noise_sigma},
          {"seed", c.seed},
          {"n_test_learners", c.n_test_learners}};
}

Json to_json(const ExplanationReport& r) {
  Json groups = Json::array();
  for (std::size_t g = 0; g < kReportGroups.size(); ++g) {
    Json entry = {{"group", group_name(kReportGroups[g])}};
    for (std::size_t b = 0; b < 2; ++b) {
      const auto& c = r.cells[g][b];
      Json cell = {{"n_positive", c.n_positive}, {"n_negative", c.n_negative}};
      cell["support"] = c.support ? Json(*c.support) : Json(nullptr);
      cell["contradict"] = c.contradict ? Json(*c.contradict) : Json(nullptr);
      entry[b == 0 ? "correct" : "incorrect"] = cell;
    }
    groups.push_back(entry);
  }
  return {{"groups", groups},
          {"n_correct_predictions", r.n_samples[0]},
          {"n_incorrect_predictions", r.n_samples[1]},
          {"n_degenerate", r.n_degenerate},
          {"n_learners", r.n_learners},
          {"config", to_json(r.config)}};
}

Json to_json(const std::vector<SkillDifficulty>& table) {
  Json out = Json::array();
  for (const auto& s : table) {
    out.push_back({{"skill", s.skill},
                   {"n_correct", s.n_correct},
                   {"n_interactions", s.n_interactions},
                   {"correctness_ratio", s.ratio},
                   {"lime_importance",
                    s.lime_importance ? Json(*s.lime_importance) : Json(nullptr)}});
  }
  return out;
}

Json to_json(const SynthConfig& c) {
  return {{"n_learners", c.n_learners},
          {"n_items", c.n_items},
          {"n_skills", c.n_skills},
          {"two_kc_probability", c.two_kc_probability},
          {"alpha", c.alpha},
          {"min_interactions", c.min_interactions},
          {"max_interactions", c.max_interactions},
          {"ability_mean", c.ability_mean},
          {"ability_sd", c.ability_sd},
          {"difficulty_mean", c.difficulty_mean},
          {"difficulty_sd", c.difficulty_sd},
          {"learning_increment", c.learning_increment},
          {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const Json& j, SynthConfig c) {
  if (!j.is_object()) throw UsageError("synth config must be a JSON object");
  const Json known = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw UsageError("unknown synth config key '" + key + "'");
  }
  try {
    maybe(j, "n_learners", c.n_learners);
    maybe(j, "n_items", c.n_items);
    maybe(j, "n_skills", c.n_skills);
    maybe(j, "two_kc_probability", c.two_kc_probability);
    maybe(j, "alpha", c.alpha);
    maybe(j, "min_interactions", c.min_interactions);
    maybe(j, "max_interactions", c.max_interactions);
    maybe(j, "ability_mean", c.ability_mean);
    maybe(j, "ability_sd", c.ability_sd);
    maybe(j, "difficulty_mean", c.difficulty_mean);
    maybe(j, "difficulty_sd", c.difficulty_sd);
    maybe(j, "learning_increment", c.learning_increment);
    maybe(j, "seed", c.seed);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  return c;
}

Json to_json(const GroundTruth& t) {
  return {{"config", to_json(t.config)},
          {"abilities", t.abilities},
          {"difficulties", t.difficulties},
          {"item_kcs", t.item_kcs}};
}

GroundTruth ground_truth_from_json(const Json& j) {
  GroundTruth t;
  t.config = synth_config_from_json(get<Json>(j, "config"));
  t.abilities = get<std::map<std::string, double>>(j, "abilities");
  t.difficulties = get<std::map<std::string, double>>(j, "difficulties");
  t.item_kcs = get<std::map<std::string, std::vector<int>>>(j, "item_kcs");
  return t;
}

}  // namespace ktrace
