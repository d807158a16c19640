#include "ktrace/cli.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ktrace/error.h"
#include "ktrace/eval.h"
#include "ktrace/explain.h"
#include "ktrace/ingest.h"
#include "ktrace/json_io.h"
#include "ktrace/synth.h"

namespace ktrace {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  return fs::path(path.string() + suffix);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string stats_table(const DatasetStats& s) {
  std::string out = "Description\tValue\n";
  out += "Number of Students\t" + std::to_string(s.n_learners) + "\n";
  out += "Number of Interactions\t" + std::to_string(s.n_interactions) + "\n";
  out += "Mean KCs per item/question\t" + num(s.mean_kcs_per_item) + "\n";
  out += "Median items per KC\t" + num(s.median_items_per_kc) + "\n";
  out += "Median learners per item\t" + num(s.median_learners_per_item) + "\n";
  out += "Median learners per KC\t" + num(s.median_learners_per_kc) + "\n";
  out += "Median interactions per learner\t" + num(s.median_interactions_per_learner) + "\n";
  out += "Correct answers\t" + std::to_string(s.n_correct) + "\n";
  out += "Wrong answers\t" + std::to_string(s.n_wrong) + "\n";
  return out;
}

}  // namespace

Dataset load_dataset_dir(const fs::path& dir) {
  const fs::path file = fs::is_directory(dir) ? dir / "interactions.csv" : dir;
  auto in = open_in(file);
  return Dataset::from_interactions(read_labeled(in));
}

void save_dataset_dir(const fs::path& dir, const Dataset& dataset) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "interactions.csv");
    write_labeled(out, dataset.flatten());
  }
  const auto stats = compute_stats(dataset);
  Json j = to_json(stats);
  j["correctness_ratio"] = correctness_ratio(dataset);
  std::vector<std::size_t> counts;
  for (const auto& [id, seq] : dataset.learners) counts.push_back(seq.size());
  try {
    j["powerlaw_exponent"] = fit_powerlaw_exponent(counts);
  } catch (const DataError&) {
    j["powerlaw_exponent"] = nullptr;
  }
  j["n_kcs"] = dataset.kc_vocab.size();
  j["n_combined_kcs"] = dataset.combined_kc_vocab.size();
  j["n_items"] = dataset.item_vocab.size();
  write_json_file(dir / "stats.json", j);
  write_text(dir / "stats.tsv", stats_table(stats));
  std::string hist = "interactions\tlearners\n";
  for (const auto& [n, k] : powerlaw_histogram(dataset)) {
    hist += std::to_string(n) + "\t" + std::to_string(k) + "\n";
  }
  write_text(dir / "powerlaw.tsv", hist);
}

void save_rows(const fs::path& path, std::span<const SparseFeatureRow> rows,
               const FeatureLayout& layout) {
  {
    auto out = open_out(path);
    write_rows(out, rows);
    if (!out) throw DataError("write failed: " + path.string());
  }
  {
    auto out = open_out(sibling(path, ".index.tsv"));
    write_row_index(out, rows);
  }
  write_json_file(sibling(path, ".layout.json"), to_json(layout));
}

std::pair<std::vector<SparseFeatureRow>, FeatureLayout> load_rows(const fs::path& path) {
  auto layout = layout_from_json(read_json_file(sibling(path, ".layout.json")));
  std::vector<SparseFeatureRow> rows;
  {
    auto in = open_in(path);
    rows = read_rows(in);
  }
  const fs::path index = sibling(path, ".index.tsv");
  if (fs::exists(index)) {
    auto in = open_in(index);
    read_row_index(in, rows);
  }
  for (const auto& r : rows) {
    if (!r.entries.empty() && r.entries.back().first >= layout.width()) {
      throw DataError(path.string() + ": feature index outside the layout");
    }
  }
  return {std::move(rows), std::move(layout)};
}

namespace {

using Clock = std::chrono::steady_clock;

// Everything needed to re-execute a command, written next to its outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  Json options = Json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  Json seeds = Json::object();
  std::string config_hash;
  Json timings = Json::object();
  Clock::time_point started = Clock::now();

  template <typename Fn>
  auto time(const std::string& stage, Fn&& fn) {
    const auto t0 = Clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      timings[stage] = std::chrono::duration<double>(Clock::now() - t0).count();
    } else {
      auto result = fn();
      timings[stage] = std::chrono::duration<double>(Clock::now() - t0).count();
      return result;
    }
  }

  void write(const fs::path& path) {
    if (config_hash.empty()) config_hash = ktrace::config_hash(command + options.dump());
    timings["total"] = std::chrono::duration<double>(Clock::now() - started).count();
    write_json_file(path, {{"tool", "ktrace"},
                           {"version", kVersion},
                           {"command", command},
                           {"argv", argv},
                           {"options", options},
                           {"config_hash", config_hash},
                           {"seeds", seeds},
                           {"inputs", inputs},
                           {"outputs", outputs},
                           {"timings", timings}});
  }
};

void record_options(const CLI::App& sub, RunManifest& m) {
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_name() == "--help" || opt->get_name() == "--config") continue;
    std::string name = opt->get_single_name();
    std::string value;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
    } else {
      value = opt->get_default_str();
    }
    m.options[name] = value;
  }
}

// Appends "--key value" for every config-file key the command line does not
// already set, so flags take precedence over the file.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  std::optional<std::string> config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (!config_path) return args;
  const Json j = read_json_file(*config_path);
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  std::vector<std::string> out = args;
  for (const auto& [key, value] : j.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (given) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back(flag);
    } else if (value.is_string()) {
      out.push_back(flag);
      out.push_back(value.get<std::string>());
    } else if (value.is_number() || value.is_array()) {
      std::string text;
      if (value.is_array()) {
        for (std::size_t i = 0; i < value.size(); ++i) {
          text += (i ? "," : "") +
                  (value[i].is_string() ? value[i].get<std::string>() : value[i].dump());
        }
      } else {
        text = value.dump();
      }
      out.push_back(flag);
      out.push_back(text);
    } else {
      throw UsageError("unsupported config value for '" + key + "'");
    }
  }
  return out;
}

void require_distinct(const std::vector<std::string>& inputs, const fs::path& output) {
  for (const auto& in : inputs) {
    std::error_code ec;
    if (fs::exists(in) && fs::exists(output) && fs::equivalent(in, output, ec)) {
      throw UsageError("output " + output.string() + " would overwrite input " + in);
    }
  }
}

bool is_rows_file(const fs::path& p) {
  return fs::is_regular_file(p) && fs::exists(sibling(p, ".layout.json"));
}

std::vector<fs::path> kt1_files(const fs::path& dir) {
  std::vector<fs::path> files;
  if (fs::is_regular_file(dir)) return {dir};
  if (!fs::is_directory(dir)) throw DataError("no such file or directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .csv files in " + dir.string());
  return files;
}

Json layout_json_of_model(const Json& model) {
  if (!model.contains("layout")) throw UsageError("model has no feature layout");
  return model.at("layout");
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> argv;
};

// ---- subcommand options ----

struct IngestOpts {
  std::string data, questions, out;
};
struct PrepOpts {
  std::string store, out;
  std::size_t min_interactions = kDefaultMinInteractions;
};
struct SampleOpts {
  std::string dataset, out;
  std::size_t n = 50000;
  std::uint64_t seed = 0;
};
struct SplitOpts {
  std::string dataset, out;
  double test = 0.2;
  std::uint64_t seed = 0;
};
struct FeaturizeOpts {
  std::string dataset, out, family = "best_lr_tw", windows = "1h,1d,7d,30d,inf", layout;
  unsigned jobs = 1;
};
struct ModelOpts {
  std::string model = "lr";
  std::string family = "best_lr_tw", windows = "1h,1d,7d,30d,inf";
  double l2 = 1.0, tol = 1e-6;
  int max_iter = 100, memory = 10;
  int epochs = 10, hidden = 32, dim = 32, seq_len = 0;
  double lr = 0.001, dropout = 0.25;
  std::size_t batch_size = 32;
  std::string vocabulary = "combined";
  std::uint64_t seed = 0;
  unsigned jobs = 1;

  ModelSpec spec() const {
    ModelSpec s;
    s.kind = parse_model(model);
    s.logistic.l2 = l2;
    s.logistic.tol = tol;
    s.logistic.max_iter = max_iter;
    s.logistic.memory = memory;
    s.logistic.jobs = jobs;
    s.train.learning_rate = lr;
    s.train.epochs = epochs;
    s.train.batch_size = batch_size;
    s.train.seed = seed;
    s.hidden = hidden;
    s.dim = dim;
    s.seq_len = seq_len;
    s.dropout = dropout;
    if (vocabulary == "combined") {
      s.vocabulary = SequenceVocabulary::kCombined;
    } else if (vocabulary == "original") {
      s.vocabulary = SequenceVocabulary::kOriginal;
    } else {
      throw UsageError("unknown vocabulary '" + vocabulary + "'");
    }
    return s;
  }
  FeatureConfig features() const {
    FeatureConfig c;
    c.family = parse_family(family);
    c.windows = parse_windows(windows);
    c.validate();
    return c;
  }
};
struct TrainOpts {
  std::string input, out;
  ModelOpts m;
};
struct EvalOpts {
  std::string model, test, out;
  unsigned jobs = 1;
};
struct LeaderboardOpts {
  std::vector<std::string> reports;
  std::string out;
};
struct ExplainOpts {
  std::string model, rows, out, dataset;
  LimeConfig lime;
  std::size_t top = 3;
  unsigned jobs = 1;
};
struct ExperimentOpts {
  std::string dataset, out;
  double test = 0.2;
  std::uint64_t split_seed = 0;
  ModelOpts m;
};

void add_model_flags(CLI::App* sub, ModelOpts& m) {
  sub->add_option("--model", m.model, "baseline, lr, dkt or sakt")
      ->check(CLI::IsMember({"baseline", "lr", "dkt", "sakt"}));
  sub->add_option("--family", m.family, "feature family when featurising a dataset");
  sub->add_option("--windows", m.windows, "time windows, e.g. 1h,1d,7d,30d,inf");
  sub->add_option("--l2", m.l2, "ridge strength (sum convention, 1 = C of 1)");
  sub->add_option("--max-iter", m.max_iter, "L-BFGS iteration cap");
  sub->add_option("--tol", m.tol, "gradient max-norm tolerance");
  sub->add_option("--memory", m.memory, "L-BFGS memory");
  sub->add_option("--epochs", m.epochs, "sequence model epochs");
  sub->add_option("--lr", m.lr, "Adam learning rate");
  sub->add_option("--batch-size", m.batch_size, "sequences per Adam step");
  sub->add_option("--hidden", m.hidden, "DKT hidden width");
  sub->add_option("--dim", m.dim, "SAKT embedding width");
  sub->add_option("--seq-len", m.seq_len, "SAKT window; 0 = median sequence length");
  sub->add_option("--dropout", m.dropout, "dropout rate");
  sub->add_option("--vocabulary", m.vocabulary, "combined or original KC tags");
  sub->add_option("--seed", m.seed, "training seed");
  sub->add_option("--jobs", m.jobs, "worker threads");
}

// ---- handlers ----

void cmd_ingest(const IngestOpts& o, RunManifest& man, Context& ctx) {
  const fs::path out_dir(o.out);
  require_distinct({o.data, o.questions}, out_dir);
  const auto bank = man.time("load_questions", [&] { return load_question_bank(fs::path(o.questions)); });
  std::vector<InteractionRecord> records;
  std::vector<RowError> errors;
  const auto files = kt1_files(o.data);
  man.time("parse", [&] {
    for (const auto& f : files) {
      auto r = parse_kt1(f);
      records.insert(records.end(), std::make_move_iterator(r.records.begin()),
                     std::make_move_iterator(r.records.end()));
      errors.insert(errors.end(), r.errors.begin(), r.errors.end());
    }
  });
  auto labeled = man.time("label", [&] { return label_correctness(records, bank); });
  fs::create_directories(out_dir);
  man.time("write", [&] {
    auto out = open_out(out_dir / "interactions.csv");
    write_labeled(out, labeled.labeled);
  });
  Json errs = Json::array();
  for (std::size_t i = 0; i < errors.size() && i < 1000; ++i) {
    const auto& e = errors[i];
    errs.push_back({{"source", fs::path(e.source).filename().string()},
                    {"line", e.line},
                    {"message", e.message}});
  }
  std::size_t unanswered = 0;
  for (const auto& r : records) unanswered += r.user_answer ? 0 : 1;
  write_json_file(out_dir / "ingest_report.json",
                  {{"files", files.size()},
                   {"records", records.size()},
                   {"labeled", labeled.labeled.size()},
                   {"unanswered_labeled_incorrect", unanswered},
                   {"excluded_unknown_question", labeled.excluded},
                   {"unknown_questions", labeled.unknown_questions},
                   {"row_errors", errors.size()},
                   {"row_error_samples", errs}});
  man.inputs = {o.data, o.questions};
  man.outputs = {(out_dir / "interactions.csv").string(), (out_dir / "ingest_report.json").string()};
  man.write(out_dir / "manifest.json");
  ctx.out << "ingested " << labeled.labeled.size() << " interactions from " << files.size()
          << " files; " << errors.size() << " malformed rows, " << labeled.excluded
          << " interactions with unknown questions excluded\n";
}

void cmd_prep(const PrepOpts& o, RunManifest& man, Context& ctx) {
  require_distinct({o.store}, o.out);
  auto labeled = man.time("load", [&] {
    auto in = open_in(fs::is_directory(o.store) ? fs::path(o.store) / "interactions.csv"
                                                : fs::path(o.store));
    return read_labeled(in);
  });
  PreprocessReport report;
  const auto dataset =
      man.time("preprocess", [&] { return preprocess(std::move(labeled), o.min_interactions, &report); });
  man.time("write", [&] { save_dataset_dir(o.out, dataset); });
  write_json_file(fs::path(o.out) / "prep_report.json", to_json(report));
  man.inputs = {o.store};
  man.outputs = {o.out};
  man.write(fs::path(o.out) / "manifest.json");
  ctx.out << dataset.learners.size() << " learners, " << dataset.n_interactions()
          << " interactions after preprocessing\n";
}

void cmd_sample(const SampleOpts& o, RunManifest& man, Context& ctx) {
  require_distinct({o.dataset}, o.out);
  const auto dataset = man.time("load", [&] { return load_dataset_dir(o.dataset); });
  const auto sampled = man.time("sample", [&] { return sample_learners(dataset, o.n, o.seed); });
  man.time("write", [&] { save_dataset_dir(o.out, sampled); });
  man.seeds["sample"] = o.seed;
  man.inputs = {o.dataset};
  man.outputs = {o.out};
  man.write(fs::path(o.out) / "manifest.json");
  ctx.out << "sampled " << sampled.learners.size() << " learners\n";
}

void cmd_split(const SplitOpts& o, RunManifest& man, Context& ctx) {
  require_distinct({o.dataset}, o.out);
  const auto dataset = man.time("load", [&] { return load_dataset_dir(o.dataset); });
  const auto split =
      man.time("split", [&] { return split_learners(learner_ids(dataset), o.test, o.seed); });
  const fs::path out(o.out);
  fs::create_directories(out);
  write_json_file(out / "split.json", to_json(split));
  man.time("write", [&] {
    save_dataset_dir(out / "train", subset(dataset, split.train));
    save_dataset_dir(out / "test", subset(dataset, split.test));
  });
  man.seeds["split"] = o.seed;
  man.inputs = {o.dataset};
  man.outputs = {(out / "split.json").string(), (out / "train").string(), (out / "test").string()};
  man.write(out / "manifest.json");
  ctx.out << split.train.size() << " train / " << split.test.size() << " test learners\n";
}

void cmd_featurize(const FeaturizeOpts& o, const CLI::App& sub, RunManifest& man, Context& ctx) {
  require_distinct({o.dataset}, o.out);
  const auto dataset = man.time("load", [&] { return load_dataset_dir(o.dataset); });
  FeatureLayout layout;
  if (!o.layout.empty()) {
    Json j = read_json_file(o.layout);
    if (j.contains("layout")) j = j.at("layout");
    layout = layout_from_json(j);
    if (sub.count("--family") && parse_family(o.family) != layout.config().family) {
      throw UsageError("--family disagrees with the family of --layout");
    }
    man.inputs = {o.dataset, o.layout};
  } else {
    FeatureConfig config;
    config.family = parse_family(o.family);
    config.windows = parse_windows(o.windows);
    config.validate();
    layout = FeatureLayout::build(config, dataset);
    man.inputs = {o.dataset};
  }
  const auto rows = man.time("encode", [&] { return encode(dataset, layout, o.jobs); });
  man.time("write", [&] { save_rows(o.out, rows, layout); });
  man.outputs = {o.out, sibling(o.out, ".layout.json").string(), sibling(o.out, ".index.tsv").string()};
  man.config_hash = config_hash(to_json(layout.config()).dump());
  man.write(sibling(o.out, ".manifest.json"));
  ctx.out << rows.size() << " rows, " << layout.width() << " features ("
          << family_name(layout.config().family) << ")\n";
}

void cmd_train(const TrainOpts& o, RunManifest& man, Context& ctx) {
  require_distinct({o.input}, o.out);
  const ModelSpec spec = o.m.spec();
  TrainedModel model;
  if (is_rows_file(o.input)) {
    if (spec.kind != ModelKind::kLogistic) {
      throw UsageError("model '" + o.m.model + "' trains on a dataset directory, not feature rows");
    }
    auto [rows, layout] = man.time("load", [&] { return load_rows(o.input); });
    const auto x = to_matrix(rows, layout.width());
    model.kind = ModelKind::kLogistic;
    model.train = spec.train;
    model.layout = std::move(layout);
    LogisticOptions options = spec.logistic;
    model.linear = man.time("fit", [&] { return fit_logistic(x, options); });
    model.loss_trace = model.linear.convergence.loss_trace;
  } else {
    const auto dataset = man.time("load", [&] { return load_dataset_dir(o.input); });
    const FeatureConfig features =
        spec.kind == ModelKind::kLogistic ? o.m.features() : FeatureConfig{};
    model = man.time("fit", [&] { return train_model(dataset, spec, features, o.m.jobs); });
  }
  write_json_file(o.out, to_json(model));
  std::string trace = model.kind == ModelKind::kLogistic ? "iteration\tobjective\n" : "epoch\tloss\n";
  for (std::size_t i = 0; i < model.loss_trace.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\n", i + 1, model.loss_trace[i]);
    trace += buf;
  }
  write_text(sibling(o.out, ".trace.tsv"), trace);
  man.seeds["train"] = spec.train.seed;
  man.inputs = {o.input};
  man.outputs = {o.out, sibling(o.out, ".trace.tsv").string()};
  man.write(sibling(o.out, ".manifest.json"));
  ctx.out << "trained " << model_name(model.kind);
  if (model.kind == ModelKind::kLogistic) {
    const auto& c = model.linear.convergence;
    ctx.out << ": " << c.iterations << " iterations, objective " << c.final_loss
            << (c.converged ? " (converged)" : " (not converged)");
  } else if (!model.loss_trace.empty()) {
    ctx.out << ": final epoch loss " << model.loss_trace.back();
  }
  ctx.out << "\n";
}

std::string model_config_hash(const Json& model) {
  Json canon = {{"model", model.at("model")}, {"seed", model.value("seed", Json(0))}};
  for (const char* key : {"options", "train", "hidden", "dim", "max_len", "dropout"}) {
    if (model.contains(key)) canon[key] = model.at(key);
  }
  if (model.contains("layout")) canon["features"] = model.at("layout").at("config");
  if (model.contains("vocabulary")) canon["vocabulary"] = model.at("vocabulary").at("kind");
  return config_hash(canon.dump());
}

void cmd_eval(const EvalOpts& o, RunManifest& man, Context& ctx) {
  require_distinct({o.model, o.test}, o.out);
  const Json mj = man.time("load_model", [&] { return read_json_file(o.model); });
  const auto model = model_from_json(mj);
  Scored scored;
  if (is_rows_file(o.test)) {
    if (model.kind != ModelKind::kLogistic) {
      throw UsageError("feature rows can only be scored by an lr model");
    }
    const Json rows_layout = read_json_file(sibling(o.test, ".layout.json"));
    if (rows_layout != layout_json_of_model(mj)) {
      throw UsageError("test rows were featurised with a different layout than the model; "
                       "use featurize --layout <train rows>.layout.json");
    }
    auto [rows, layout] = man.time("load", [&] { return load_rows(o.test); });
    const auto x = to_matrix(rows, layout.width());
    std::set<std::string> learners;
    for (const auto& r : rows) learners.insert(r.learner_id);
    scored.scores = predict_proba(model.linear, x);
    scored.labels = x.labels;
    scored.n_learners = learners.size();
  } else {
    const auto test = man.time("load", [&] { return load_dataset_dir(o.test); });
    scored = man.time("score", [&] { return score(model, test, o.jobs); });
  }
  const auto report = man.time("evaluate", [&] {
    return make_report(model, scored, model.train.seed, model_config_hash(mj));
  });
  write_json_file(o.out, to_json(report));
  const fs::path tsv = fs::path(o.out).replace_extension(".tsv");
  const auto board = format_leaderboard(std::span<const EvalReport>(&report, 1));
  write_text(tsv, board);
  man.config_hash = report.config_hash;
  man.seeds["train"] = report.seed;
  man.inputs = {o.model, o.test};
  man.outputs = {o.out, tsv.string()};
  man.write(sibling(o.out, ".manifest.json"));
  ctx.out << board;
}

void cmd_leaderboard(const LeaderboardOpts& o, Context& ctx) {
  std::vector<EvalReport> reports;
  for (const auto& p : o.reports) reports.push_back(report_from_json(read_json_file(p)));
  const auto text = format_leaderboard(reports);
  if (!o.out.empty()) {
    require_distinct(o.reports, o.out);
    write_text(o.out, text);
  }
  ctx.out << text;
}

void cmd_explain(const ExplainOpts& o, RunManifest& man, Context& ctx) {
  const fs::path out(o.out);
  require_distinct({o.model, o.rows}, out);
  const Json mj = read_json_file(o.model);
  const auto model = model_from_json(mj);
  if (model.kind != ModelKind::kLogistic) throw UsageError("explain supports lr models only");
  if (read_json_file(sibling(o.rows, ".layout.json")) != layout_json_of_model(mj)) {
    throw UsageError("rows were featurised with a different layout than the model");
  }
  auto [rows, layout] = man.time("load", [&] { return load_rows(o.rows); });
  const auto explanations = man.time("lime", [&] {
    return explain_rows(model.linear, rows, layout, o.lime, o.jobs);
  });
  auto report = aggregate_importances(explanations, layout);
  report.config = o.lime;
  std::vector<SkillDifficulty> skills;
  if (!o.dataset.empty()) {
    skills = skill_difficulty(load_dataset_dir(o.dataset));
  } else if (layout.has_skills()) {
    skills = skill_difficulty(rows, layout);
  }
  attach_lime_importance(skills, explanations, layout);

  write_json_file(out / "explanation.json",
                  {{"importances", to_json(report)}, {"skills", to_json(skills)}});
  write_text(out / "importance.tsv", format_importance_table(report));
  write_text(out / "skills.tsv", format_skill_table(skills, o.top));
  man.seeds["lime"] = o.lime.seed;
  man.inputs = {o.model, o.rows};
  if (!o.dataset.empty()) man.inputs.push_back(o.dataset);
  man.outputs = {(out / "explanation.json").string(), (out / "importance.tsv").string(),
                 (out / "skills.tsv").string()};
  man.write(out / "manifest.json");
  ctx.out << "explained " << explanations.size() << " rows from " << report.n_learners
          << " learners";
  if (report.n_degenerate) ctx.out << " (" << report.n_degenerate << " degenerate)";
  ctx.out << "\n" << format_importance_table(report);
}

void cmd_synth(const SynthConfig& config, const std::string& out_dir, RunManifest& man,
               Context& ctx) {
  const auto data = man.time("generate", [&] { return generate(config); });
  man.time("write", [&] { write_synth(out_dir, data); });
  man.seeds["synth"] = config.seed;
  man.outputs = {(fs::path(out_dir) / "kt1").string(), (fs::path(out_dir) / "questions.csv").string(),
                 (fs::path(out_dir) / "ground_truth.json").string()};
  man.config_hash = config_hash(to_json(config).dump());
  man.write(fs::path(out_dir) / "manifest.json");
  ctx.out << "generated " << data.records.size() << " interactions for " << config.n_learners
          << " learners\n";
}

void cmd_experiment(const ExperimentOpts& o, RunManifest& man, Context& ctx) {
  require_distinct({o.dataset}, o.out);
  const auto dataset = man.time("load", [&] { return load_dataset_dir(o.dataset); });
  const ModelSpec spec = o.m.spec();
  const FeatureConfig features =
      spec.kind == ModelKind::kLogistic ? o.m.features() : FeatureConfig{};
  SplitParams split{o.test, o.split_seed};
  const auto report = man.time("run", [&] {
    return run_experiment(dataset, spec, features, split, o.m.seed, o.m.jobs);
  });
  write_json_file(o.out, to_json(report));
  man.config_hash = report.config_hash;
  man.seeds["split"] = o.split_seed;
  man.seeds["train"] = o.m.seed;
  man.inputs = {o.dataset};
  man.outputs = {o.out};
  man.write(sibling(o.out, ".manifest.json"));
  ctx.out << format_leaderboard(std::span<const EvalReport>(&report, 1));
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return 4;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const UsageError*>(&e)) return 2;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return 3;
  if (dynamic_cast<const Json::exception*>(&e)) return 3;
  return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Context ctx{out, err, raw_args};
  std::string stage = raw_args.empty() ? "cli" : raw_args[0];
  try {
    const auto args = merge_config(raw_args);

    CLI::App app{"Knowledge tracing experiments on KT1-style learner logs", "ktrace"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    IngestOpts ingest;
    auto* s_ingest = app.add_subcommand("ingest", "label raw KT1 logs against a question bank");
    s_ingest->add_option("data", ingest.data, "directory of u<learner>.csv files or one consolidated file")->required();
    s_ingest->add_option("--questions", ingest.questions, "question bank")->required();
    s_ingest->add_option("--out", ingest.out, "labeled store directory")->required();

    PrepOpts prep;
    auto* s_prep = app.add_subcommand("prep", "drop untagged interactions and short learners");
    s_prep->add_option("store", prep.store, "labeled store")->required();
    s_prep->add_option("--min-interactions", prep.min_interactions, "minimum interactions per learner");
    s_prep->add_option("--out", prep.out, "dataset directory")->required();

    SampleOpts sample;
    auto* s_sample = app.add_subcommand("sample", "sample learners without replacement");
    s_sample->add_option("dataset", sample.dataset)->required();
    s_sample->add_option("--n", sample.n, "learners to keep");
    s_sample->add_option("--seed", sample.seed);
    s_sample->add_option("--out", sample.out)->required();

    SplitOpts split;
    auto* s_split = app.add_subcommand("split", "learner-level train/test split");
    s_split->add_option("dataset", split.dataset)->required();
    s_split->add_option("--test", split.test, "held-out learner fraction");
    s_split->add_option("--seed", split.seed);
    s_split->add_option("--out", split.out, "directory for split.json, train/ and test/")->required();

    FeaturizeOpts feat;
    auto* s_feat = app.add_subcommand("featurize", "extract sparse feature rows");
    s_feat->add_option("dataset", feat.dataset)->required();
    s_feat->add_option("--family", feat.family, "irt, pfa, das3h, best_lr or best_lr_tw");
    s_feat->add_option("--windows", feat.windows);
    s_feat->add_option("--layout", feat.layout, "reuse the layout of earlier rows (or an lr model)");
    s_feat->add_option("--jobs", feat.jobs);
    s_feat->add_option("--out", feat.out, "rows file")->required();

    TrainOpts train;
    auto* s_train = app.add_subcommand("train", "fit a model");
    s_train->add_option("input", train.input, "feature rows (lr) or dataset directory")->required();
    add_model_flags(s_train, train.m);
    s_train->add_option("--out", train.out, "model file")->required();

    EvalOpts ev;
    auto* s_eval = app.add_subcommand("eval", "score held-out learners");
    s_eval->add_option("model", ev.model)->required();
    s_eval->add_option("test", ev.test, "test rows (lr) or dataset directory")->required();
    s_eval->add_option("--jobs", ev.jobs);
    s_eval->add_option("--out", ev.out, "report file")->required();

    LeaderboardOpts board;
    auto* s_board = app.add_subcommand("leaderboard", "combine reports into one table");
    s_board->add_option("reports", board.reports)->required();
    s_board->add_option("--out", board.out);

    ExplainOpts ex;
    auto* s_explain = app.add_subcommand("explain", "correlation LIME for an lr model");
    s_explain->add_option("model", ex.model)->required();
    s_explain->add_option("rows", ex.rows, "test rows")->required();
    s_explain->add_option("--n-learners", ex.lime.n_test_learners);
    s_explain->add_option("--n-perturb", ex.lime.n_perturbations);
    s_explain->add_option("--flip-probability", ex.lime.flip_probability);
    s_explain->add_option("--noise-sigma", ex.lime.noise_sigma);
    s_explain->add_option("--seed", ex.lime.seed);
    s_explain->add_option("--dataset", ex.dataset, "dataset for skill correctness ratios");
    s_explain->add_option("--top", ex.top, "skills listed per side");
    s_explain->add_option("--jobs", ex.jobs);
    s_explain->add_option("--out", ex.out, "report directory")->required();

    SynthConfig synth;
    std::string synth_out;
    auto* s_synth = app.add_subcommand("synth", "generate a synthetic dataset with ground truth");
    s_synth->add_option("--n-learners", synth.n_learners);
    s_synth->add_option("--n-items", synth.n_items);
    s_synth->add_option("--n-skills", synth.n_skills);
    s_synth->add_option("--two-kc-probability", synth.two_kc_probability);
    s_synth->add_option("--alpha", synth.alpha);
    s_synth->add_option("--min-interactions", synth.min_interactions);
    s_synth->add_option("--max-interactions", synth.max_interactions, "0 = uncapped");
    s_synth->add_option("--ability-mean", synth.ability_mean);
    s_synth->add_option("--ability-sd", synth.ability_sd);
    s_synth->add_option("--difficulty-mean", synth.difficulty_mean);
    s_synth->add_option("--difficulty-sd", synth.difficulty_sd);
    s_synth->add_option("--learning-increment", synth.learning_increment);
    s_synth->add_option("--seed", synth.seed);
    s_synth->add_option("--out", synth_out)->required();

    ExperimentOpts exp;
    auto* s_exp = app.add_subcommand("experiment", "split, train and evaluate in one step");
    s_exp->add_option("dataset", exp.dataset)->required();
    s_exp->add_option("--test", exp.test);
    s_exp->add_option("--split-seed", exp.split_seed);
    add_model_flags(s_exp, exp.m);
    s_exp->add_option("--out", exp.out, "report file")->required();

    std::string rerun_manifest;
    auto* s_rerun = app.add_subcommand("rerun", "re-execute the command recorded in a manifest");
    s_rerun->add_option("manifest", rerun_manifest)->required();

    std::string config_file;
    for (auto* sub : app.get_subcommands({})) {
      if (sub != s_rerun && sub != s_board) {
        sub->add_option("--config", config_file, "JSON file of option defaults");
      }
    }

    try {
      std::vector<std::string> reversed(args.rbegin(), args.rend());
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) {
        app.exit(e, out, err);
        return 0;
      }
      err << "[" << stage << "] " << e.what() << "\n";
      return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    stage = sub->get_name();
    RunManifest man;
    man.command = stage;
    man.argv = raw_args;
    record_options(*sub, man);

    if (sub == s_ingest) cmd_ingest(ingest, man, ctx);
    else if (sub == s_prep) cmd_prep(prep, man, ctx);
    else if (sub == s_sample) cmd_sample(sample, man, ctx);
    else if (sub == s_split) cmd_split(split, man, ctx);
    else if (sub == s_feat) cmd_featurize(feat, *sub, man, ctx);
    else if (sub == s_train) cmd_train(train, man, ctx);
    else if (sub == s_eval) cmd_eval(ev, man, ctx);
    else if (sub == s_board) cmd_leaderboard(board, ctx);
    else if (sub == s_explain) cmd_explain(ex, man, ctx);
    else if (sub == s_synth) cmd_synth(synth, synth_out, man, ctx);
    else if (sub == s_exp) cmd_experiment(exp, man, ctx);
    else if (sub == s_rerun) {
      const Json j = read_json_file(rerun_manifest);
      const auto argv = j.at("argv").get<std::vector<std::string>>();
      if (!argv.empty() && argv[0] == "rerun") throw UsageError("manifest records a rerun");
      return run_cli(argv, out, err);
    }
    return 0;
  } catch (const std::exception& e) {
    err << "[" << stage << "] error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace ktrace
