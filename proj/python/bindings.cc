#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ktrace/cli.h"
#include "ktrace/error.h"
#include "ktrace/eval.h"
#include "ktrace/explain.h"
#include "ktrace/json_io.h"
#include "ktrace/synth.h"

namespace py = pybind11;
using namespace ktrace;

namespace {

py::object to_python(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Json from_python(const py::handle& obj) {
  return Json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

template <typename T>
T take(Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  T v = j.at(key).get<T>();
  j.erase(key);
  return v;
}

struct ExperimentConfig {
  ModelSpec spec;
  FeatureConfig features;
  SplitParams split;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

ExperimentConfig experiment_config(const py::dict& options) {
  Json j = from_python(options);
  if (j.is_null()) j = Json::object();
  ExperimentConfig c;
  c.spec.kind = parse_model(take<std::string>(j, "model", "lr"));
  c.features.family = parse_family(take<std::string>(j, "family", "best_lr_tw"));
  if (j.contains("windows")) c.features.windows = parse_windows(take<std::string>(j, "windows", ""));
  c.spec.logistic.l2 = take(j, "l2", c.spec.logistic.l2);
  c.spec.logistic.max_iter = take(j, "max_iter", c.spec.logistic.max_iter);
  c.spec.logistic.tol = take(j, "tol", c.spec.logistic.tol);
  c.spec.train.epochs = take(j, "epochs", c.spec.train.epochs);
  c.spec.train.learning_rate = take(j, "learning_rate", c.spec.train.learning_rate);
  c.spec.train.batch_size = take(j, "batch_size", c.spec.train.batch_size);
  c.spec.hidden = take(j, "hidden", c.spec.hidden);
  c.spec.dim = take(j, "dim", c.spec.dim);
  c.spec.seq_len = take(j, "seq_len", c.spec.seq_len);
  c.spec.dropout = take(j, "dropout", c.spec.dropout);
  const auto vocab = take<std::string>(j, "vocabulary", "combined");
  if (vocab == "original") c.spec.vocabulary = SequenceVocabulary::kOriginal;
  else if (vocab != "combined") throw UsageError("vocabulary must be combined or original");
  c.split.test_fraction = take(j, "test", c.split.test_fraction);
  c.split.seed = take(j, "split_seed", c.split.seed);
  c.seed = take(j, "seed", c.seed);
  c.jobs = take(j, "jobs", c.jobs);
  if (!j.empty()) throw UsageError("unknown experiment option '" + j.begin().key() + "'");
  c.features.validate();
  return c;
}

py::dict featurize(const Dataset& vocabulary, const Dataset& dataset, const std::string& family,
                   const std::string& windows, unsigned jobs) {
  FeatureConfig fc;
  fc.family = parse_family(family);
  if (!windows.empty()) fc.windows = parse_windows(windows);
  fc.validate();
  const auto layout = FeatureLayout::build(fc, vocabulary);
  FeatureMatrix x;
  {
    py::gil_scoped_release release;
    const auto rows = encode(dataset, layout, jobs);
    x = to_matrix(rows, layout.width());
  }
  py::list blocks;
  for (const auto& b : layout.blocks()) {
    py::dict d;
    d["name"] = b.name;
    d["group"] = std::string(group_name(b.group));
    d["offset"] = b.offset;
    d["width"] = b.width;
    blocks.append(d);
  }
  py::dict out;
  out["row_ptr"] = py::array_t<std::uint64_t>(static_cast<py::ssize_t>(x.row_ptr.size()),
                                              reinterpret_cast<const std::uint64_t*>(x.row_ptr.data()));
  out["cols"] = py::array_t<std::uint32_t>(static_cast<py::ssize_t>(x.cols.size()), x.cols.data());
  out["vals"] = py::array_t<double>(static_cast<py::ssize_t>(x.vals.size()), x.vals.data());
  out["labels"] = py::array_t<std::uint8_t>(static_cast<py::ssize_t>(x.labels.size()), x.labels.data());
  out["n_cols"] = x.n_cols;
  out["blocks"] = blocks;
  out["items"] = layout.items();
  out["skills"] = layout.skills();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Knowledge tracing baselines, feature extraction and explanations";
  m.attr("__version__") = kVersion;

  // Later registrations are tried first, so the subclasses go last.
  auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("n_learners", [](const Dataset& d) { return d.learners.size(); })
      .def_property_readonly("n_interactions", &Dataset::n_interactions)
      .def_property_readonly("n_items", [](const Dataset& d) { return d.item_vocab.size(); })
      .def_property_readonly("n_kcs", [](const Dataset& d) { return d.kc_vocab.size(); })
      .def("learner_ids", [](const Dataset& d) { return learner_ids(d); })
      .def("correctness_ratio", [](const Dataset& d) { return correctness_ratio(d); })
      .def("stats", [](const Dataset& d) { return to_python(to_json(compute_stats(d))); })
      .def("records",
           [](const Dataset& d) {
             py::list out;
             for (const auto& x : d.flatten()) {
               out.append(py::make_tuple(x.learner_id, x.timestamp_ms, x.question_id,
                                         x.kc_tags, static_cast<bool>(x.correct)));
             }
             return out;
           },
           "(learner_id, timestamp_ms, question_id, kc_tags, correct) tuples")
      .def("__len__", &Dataset::n_interactions)
      .def("__repr__", [](const Dataset& d) {
        return "<ktrace.Dataset " + std::to_string(d.learners.size()) + " learners, " +
               std::to_string(d.n_interactions()) + " interactions>";
      });

  m.def("from_records",
        [](const std::vector<std::tuple<std::string, std::int64_t, std::string, std::vector<int>, bool>>& rows) {
          std::vector<LabeledInteraction> xs;
          xs.reserve(rows.size());
          for (const auto& [learner, t, q, kcs, correct] : rows) {
            LabeledInteraction x;
            x.learner_id = learner;
            x.timestamp_ms = t;
            x.question_id = q;
            x.kc_tags = kcs;
            x.correct = correct;
            x.user_answer = correct ? 'a' : 'b';
            xs.push_back(std::move(x));
          }
          return Dataset::from_interactions(std::move(xs));
        },
        py::arg("records"),
        "Dataset from (learner_id, timestamp_ms, question_id, kc_tags, correct) tuples");

  m.def("load_dataset", &load_dataset_dir, py::arg("path"));
  m.def("save_dataset", &save_dataset_dir, py::arg("path"), py::arg("dataset"));

  m.def("preprocess",
        [](const Dataset& d, std::size_t min_interactions) {
          PreprocessReport report;
          auto out = preprocess(d.flatten(), min_interactions, &report);
          return py::make_tuple(std::move(out), to_python(to_json(report)));
        },
        py::arg("dataset"), py::arg("min_interactions") = kDefaultMinInteractions);
  m.def("split", &learner_split, py::arg("dataset"), py::arg("test_fraction") = 0.2,
        py::arg("seed") = 0);
  m.def("sample", &sample_learners, py::arg("dataset"), py::arg("n"), py::arg("seed") = 0);
  m.def("median_sequence_length", &median_sequence_length, py::arg("dataset"));

  m.def("generate",
        [](const py::dict& config) {
          const auto c = synth_config_from_json(from_python(config));
          auto data = generate(c);
          return py::make_tuple(std::move(data.dataset), to_python(to_json(data.truth)));
        },
        py::arg("config") = py::dict(), "Synthetic dataset and its ground truth");

  m.def("featurize", &featurize, py::arg("vocabulary"), py::arg("dataset"),
        py::arg("family") = "best_lr_tw", py::arg("windows") = "", py::arg("jobs") = 1,
        "CSR arrays for `dataset` under a layout built from `vocabulary`");

  m.def("compute_auc",
        [](const std::vector<std::uint8_t>& labels, const std::vector<double>& scores) {
          return compute_auc(labels, scores);
        },
        py::arg("labels"), py::arg("scores"));

  m.def("run_experiment",
        [](const Dataset& d, const py::dict& options) {
          const auto c = experiment_config(options);
          EvalReport r;
          {
            py::gil_scoped_release release;
            r = run_experiment(d, c.spec, c.features, c.split, c.seed, c.jobs);
          }
          return to_python(to_json(r));
        },
        py::arg("dataset"), py::arg("options") = py::dict(),
        "Split, train and score; options: model, family, windows, l2, max_iter, tol, epochs, "
        "learning_rate, batch_size, hidden, dim, seq_len, dropout, vocabulary, test, "
        "split_seed, seed, jobs");

  m.def("leaderboard",
        [](const py::list& reports) {
          std::vector<EvalReport> rs;
          for (const auto& r : reports) rs.push_back(report_from_json(from_python(r)));
          return format_leaderboard(rs);
        },
        py::arg("reports"));

  m.def("skill_difficulty",
        [](const Dataset& d) { return to_python(to_json(skill_difficulty(d))); },
        py::arg("dataset"));

  m.def("explain",
        [](const Dataset& train, const Dataset& test, const std::string& family,
           std::size_t n_learners, std::size_t n_perturbations, std::uint64_t seed,
           unsigned jobs) {
          FeatureConfig fc;
          fc.family = parse_family(family);
          LimeConfig lc;
          lc.n_test_learners = n_learners;
          lc.n_perturbations = n_perturbations;
          lc.seed = seed;
          lc.validate();
          ExplanationReport report;
          std::vector<SkillDifficulty> skills;
          {
            py::gil_scoped_release release;
            const auto layout = FeatureLayout::build(fc, train);
            const auto model = fit_logistic(to_matrix(encode(train, layout, jobs), layout.width()));
            const auto rows = encode(test, layout, jobs);
            const auto ex = explain_rows(model, rows, layout, lc, jobs);
            report = aggregate_importances(ex, layout);
            skills = skill_difficulty(test);
            attach_lime_importance(skills, ex, layout);
          }
          py::dict out;
          out["importance"] = to_python(to_json(report));
          out["importance_table"] = format_importance_table(report);
          out["skills"] = to_python(to_json(skills));
          out["skill_table"] = format_skill_table(skills);
          return out;
        },
        py::arg("train"), py::arg("test"), py::arg("family") = "best_lr_tw",
        py::arg("n_learners") = 1000, py::arg("n_perturbations") = 300, py::arg("seed") = 0,
        py::arg("jobs") = 1, "Fit LR on `train` and explain rows of `test` with correlation LIME");

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          int code;
          {
            py::gil_scoped_release release;
            code = run_cli(args, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one ktrace subcommand; returns (exit_code, stdout, stderr)");
}
