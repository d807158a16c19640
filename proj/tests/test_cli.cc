#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "doctest.h"
#include "ktrace/cli.h"
#include "ktrace/ingest.h"
#include "ktrace/json_io.h"
#include "test_util.h"

using namespace ktrace;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

bool is_manifest(const fs::path& p) {
  const auto name = p.filename().string();
  return name.size() >= 13 && name.compare(name.size() - 13, 13, "manifest.json") == 0;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && !is_manifest(e.path())) {
      files[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
  }
  return files;
}

void require_ok(const Run& r) {
  INFO(r.err);
  REQUIRE(r.code == 0);
}

}  // namespace

TEST_CASE("full pipeline and byte-identical reruns") {
  testing::TempDir tmp("cli");
  const auto d = [&](const char* name) { return (tmp.path / name).string(); };

  require_ok(cli({"synth", "--n-learners", "120", "--n-items", "30", "--seed", "3", "--out",
                  d("raw")}));
  require_ok(cli({"ingest", d("raw/kt1"), "--questions", d("raw/questions.csv"), "--out",
                  d("store")}));
  require_ok(cli({"prep", d("store"), "--out", d("data")}));
  require_ok(cli({"sample", d("data"), "--n", "100", "--seed", "2", "--out", d("sampled")}));
  require_ok(cli({"split", d("sampled"), "--test", "0.25", "--seed", "1", "--out", d("split")}));
  require_ok(cli({"featurize", d("split/train"), "--family", "das3h", "--windows", "1d,inf",
                  "--out", d("train.rows")}));
  require_ok(cli({"featurize", d("split/test"), "--layout", d("train.rows.layout.json"), "--out",
                  d("test.rows")}));
  require_ok(cli({"train", d("train.rows"), "--model", "lr", "--out", d("lr.json")}));
  require_ok(cli({"eval", d("lr.json"), d("test.rows"), "--out", d("lr_report.json")}));
  require_ok(cli({"train", d("split/train"), "--model", "baseline", "--out", d("base.json")}));
  require_ok(cli({"eval", d("base.json"), d("split/test"), "--out", d("base_report.json")}));
  require_ok(cli({"train", d("split/train"), "--model", "dkt", "--epochs", "2", "--hidden", "8",
                  "--out", d("dkt.json")}));
  require_ok(cli({"eval", d("dkt.json"), d("split/test"), "--out", d("dkt_report.json")}));
  require_ok(cli({"train", d("split/train"), "--model", "sakt", "--epochs", "2", "--dim", "8",
                  "--out", d("sakt.json")}));
  require_ok(cli({"eval", d("sakt.json"), d("split/test"), "--out", d("sakt_report.json")}));
  require_ok(cli({"explain", d("lr.json"), d("test.rows"), "--n-learners", "5", "--n-perturb",
                  "30", "--dataset", d("split/train"), "--out", d("explain")}));
  const auto board = cli({"leaderboard", d("lr_report.json"), d("base_report.json"),
                          d("dkt_report.json"), d("sakt_report.json")});
  require_ok(board);
  CHECK(board.out.rfind("Feature Set\tModel\tAUC\nDAS3H\tLR\t", 0) == 0);
  CHECK(board.out.find("Correctness Probability per Item\tBaseline Model\t") != std::string::npos);
  CHECK(board.out.find("Original features\tSAKT\t") != std::string::npos);

  for (const char* f : {"store/manifest.json", "data/manifest.json", "data/stats.json",
                        "data/stats.tsv", "data/powerlaw.tsv", "split/split.json",
                        "train.rows.index.tsv", "lr.json.manifest.json", "lr.json.trace.tsv",
                        "explain/importance.tsv", "explain/skills.tsv", "explain/manifest.json"}) {
    CHECK_MESSAGE(fs::exists(tmp.path / f), f);
  }
  const auto man = read_json_file(tmp.path / "lr.json.manifest.json");
  CHECK(man.at("config_hash").get<std::string>().size() == 16);
  CHECK(man.contains("timings"));
  CHECK(man.at("version") == kVersion);

  const auto before = snapshot(tmp.path);
  std::vector<fs::path> manifests;
  for (const auto& e : fs::recursive_directory_iterator(tmp.path)) {
    if (e.is_regular_file() && is_manifest(e.path())) manifests.push_back(e.path());
  }
  CHECK(manifests.size() >= 14);
  std::sort(manifests.begin(), manifests.end());
  // Upstream directories first so reruns see the same inputs.
  const std::vector<std::string> order = {"raw", "store", "data", "sampled", "split"};
  std::stable_sort(manifests.begin(), manifests.end(), [&](const fs::path& a, const fs::path& b) {
    auto rank = [&](const fs::path& p) {
      const auto top = fs::relative(p, tmp.path).begin()->string();
      const auto it = std::find(order.begin(), order.end(), top);
      return it == order.end() ? order.size() : static_cast<std::size_t>(it - order.begin());
    };
    return rank(a) < rank(b);
  });
  for (const auto& m : manifests) {
    INFO(m.string());
    CHECK(cli({"rerun", m.string()}).code == 0);
  }
  const auto after = snapshot(tmp.path);
  CHECK(before.size() == after.size());
  for (const auto& [name, bytes] : before) {
    INFO(name);
    CHECK(after.at(name) == bytes);
  }
}

TEST_CASE("prep reports when no learner survives") {
  testing::TempDir tmp("cli_prep");
  std::vector<LabeledInteraction> xs;
  for (int l = 0; l < 5; ++l) {
    for (int i = 0; i < 9; ++i) {
      xs.push_back(testing::make_interaction("L" + std::to_string(l), i * 1000, "q1", {1}, i % 2));
    }
  }
  fs::create_directories(tmp.path / "store");
  {
    std::ofstream f(tmp.path / "store" / "interactions.csv", std::ios::binary);
    write_labeled(f, xs);
  }
  const auto r = cli({"prep", (tmp.path / "store").string(), "--out", (tmp.path / "data").string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("[prep]") != std::string::npos);
  CHECK(r.err.find("no learners survive preprocessing") != std::string::npos);

  CHECK(cli({"prep", (tmp.path / "store").string(), "--min-interactions", "9", "--out",
             (tmp.path / "data").string()})
            .code == 0);
}

TEST_CASE("usage and input errors map to exit codes") {
  testing::TempDir tmp("cli_err");
  CHECK(cli({"prep", "x", "--out", "y", "--bogus"}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({}).code == 2);
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"--version"}).out.find(kVersion) != std::string::npos);
  const auto missing = cli({"prep", (tmp.path / "nope").string(), "--out",
                            (tmp.path / "o").string()});
  CHECK(missing.code == 3);
  CHECK(missing.err.find("[prep]") != std::string::npos);
  CHECK(cli({"synth", "--alpha", "0.5", "--out", (tmp.path / "s").string()}).code == 2);
  CHECK(cli({"synth", "--n-learners", "abc", "--out", (tmp.path / "s").string()}).code == 2);
}

TEST_CASE("config files fill options and flags win") {
  testing::TempDir tmp("cli_cfg");
  {
    std::ofstream f(tmp.path / "cfg.json");
    f << R"({"n_learners": 12, "n_items": 9, "seed": 4})";
  }
  require_ok(cli({"synth", "--config", (tmp.path / "cfg.json").string(), "--n-items", "7",
                  "--out", (tmp.path / "s").string()}));
  const auto truth = ground_truth_from_json(read_json_file(tmp.path / "s" / "ground_truth.json"));
  CHECK(truth.abilities.size() == 12);
  CHECK(truth.difficulties.size() == 7);
  CHECK(truth.config.seed == 4);
  {
    std::ofstream f(tmp.path / "bad.json");
    f << R"({"n_lerners": 12})";
  }
  CHECK(cli({"synth", "--config", (tmp.path / "bad.json").string(), "--out",
             (tmp.path / "t").string()})
            .code == 2);
}

TEST_CASE("commands refuse to overwrite their inputs") {
  testing::TempDir tmp("cli_inplace");
  require_ok(cli({"synth", "--n-learners", "20", "--out", (tmp.path / "raw").string()}));
  require_ok(cli({"ingest", (tmp.path / "raw/kt1").string(), "--questions",
                  (tmp.path / "raw/questions.csv").string(), "--out",
                  (tmp.path / "store").string()}));
  require_ok(cli({"prep", (tmp.path / "store").string(), "--out", (tmp.path / "data").string()}));
  const auto before = snapshot(tmp.path / "data");
  CHECK(cli({"sample", (tmp.path / "data").string(), "--n", "5", "--out",
             (tmp.path / "data").string()})
            .code != 0);
  CHECK(snapshot(tmp.path / "data") == before);
}
