#include <cmath>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "ktrace/error.h"
#include "ktrace/ingest.h"
#include "ktrace/json_io.h"
#include "ktrace/synth.h"
#include "test_util.h"

using namespace ktrace;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

}  // namespace

TEST_CASE("configuration checks") {
  SynthConfig c;
  CHECK(c.alpha == 2.0);
  CHECK(c.min_interactions == 10);
  CHECK(c.learning_increment == 0.0);
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.min_interactions = 9;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = c;
  bad.alpha = 1.0;
  CHECK_THROWS_AS(generate(bad), UsageError);
  bad = c;
  bad.max_interactions = 5;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = c;
  bad.n_skills = 1;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad.two_kc_probability = 0;
  CHECK_NOTHROW(bad.validate());
}

TEST_CASE("zero logits give balanced answers") {
  SynthConfig c;
  c.n_learners = 20000;
  c.min_interactions = 50;
  c.max_interactions = 50;
  c.ability_sd = 0;
  c.difficulty_sd = 0;
  c.seed = 1;
  const auto data = generate(c);
  REQUIRE(data.dataset.n_interactions() == 1000000);
  CHECK(std::abs(correctness_ratio(data.dataset) - 0.5) <= 0.01);
}

TEST_CASE("a logit of ln 3 gives three correct answers in four") {
  SynthConfig c;
  c.n_learners = 100;
  c.n_items = 1;
  c.n_skills = 1;
  c.two_kc_probability = 0;
  c.min_interactions = 100;
  c.max_interactions = 100;
  c.ability_mean = std::log(3.0);
  c.ability_sd = 0;
  c.difficulty_sd = 0;
  c.seed = 2;
  const auto data = generate(c);
  REQUIRE(data.dataset.n_interactions() == 10000);
  CHECK(std::abs(correctness_ratio(data.dataset) - 0.75) <= 0.02);
}

TEST_CASE("generated data is well formed") {
  SynthConfig c;
  c.n_learners = 500;
  c.seed = 3;
  const auto data = generate(c);
  CHECK(data.dataset.learners.size() == 500);
  CHECK(data.truth.abilities.size() == 500);
  CHECK(data.truth.difficulties.size() == c.n_items);
  std::size_t kcs = 0;
  for (const auto& [q, tags] : data.truth.item_kcs) {
    REQUIRE((tags.size() == 1 || tags.size() == 2));
    kcs += tags.size();
    for (int t : tags) CHECK((t >= 1 && t <= static_cast<int>(c.n_skills)));
  }
  CHECK(std::abs(static_cast<double>(kcs) / c.n_items - 1.5) <= 0.15);

  const std::int64_t hour = 3'600'000, day = 24 * hour;
  std::size_t bins[5] = {};
  for (const auto& [id, seq] : data.dataset.learners) {
    CHECK(seq.size() >= 10);
    for (std::size_t i = 1; i < seq.size(); ++i) {
      const auto gap = seq[i].timestamp_ms - seq[i - 1].timestamp_ms;
      REQUIRE(gap > 0);
      ++bins[gap < hour ? 0 : gap < day ? 1 : gap < 7 * day ? 2 : gap < 30 * day ? 3 : 4];
    }
  }
  for (auto b : bins) CHECK(b > 0);
}

TEST_CASE("generation is deterministic per seed") {
  testing::TempDir a("sa"), b("sb"), other("so");
  SynthConfig c;
  c.n_learners = 60;
  c.seed = 4;
  write_synth(a.path, generate(c));
  write_synth(b.path, generate(c));
  c.seed = 5;
  write_synth(other.path, generate(c));
  CHECK(slurp(a.path / "questions.csv") == slurp(b.path / "questions.csv"));
  CHECK(slurp(a.path / "ground_truth.json") == slurp(b.path / "ground_truth.json"));
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a.path / "kt1")) {
    ++files;
    CHECK(slurp(e.path()) == slurp(b.path / "kt1" / e.path().filename()));
  }
  CHECK(files == 60);
  CHECK(slurp(a.path / "ground_truth.json") != slurp(other.path / "ground_truth.json"));
}

TEST_CASE("emitted files read back as the generated dataset") {
  testing::TempDir dir("rt");
  SynthConfig c;
  c.n_learners = 80;
  c.seed = 6;
  const auto data = generate(c);
  write_synth(dir.path, data);

  const auto bank = load_question_bank(dir.path / "questions.csv");
  CHECK(bank.size() == data.bank.size());
  std::vector<InteractionRecord> records;
  for (const auto& e : fs::directory_iterator(dir.path / "kt1")) {
    auto parsed = parse_kt1(e.path());
    CHECK(parsed.errors.empty());
    records.insert(records.end(), parsed.records.begin(), parsed.records.end());
  }
  auto labeled = label_correctness(records, bank);
  CHECK(labeled.excluded == 0);
  const auto back = Dataset::from_interactions(std::move(labeled.labeled));
  CHECK(back.learners == data.dataset.learners);

  const auto truth = ground_truth_from_json(read_json_file(dir.path / "ground_truth.json"));
  CHECK(truth.abilities == data.truth.abilities);
  CHECK(truth.difficulties == data.truth.difficulties);
  CHECK(truth.item_kcs == data.truth.item_kcs);
  CHECK(truth.config.seed == c.seed);
}

TEST_CASE("preprocessing leaves generated data unchanged") {
  SynthConfig c;
  c.n_learners = 300;
  c.seed = 7;
  const auto data = generate(c);
  PreprocessReport rep;
  const auto pre = preprocess(data.dataset.flatten(), kDefaultMinInteractions, &rep);
  CHECK(pre.learners == data.dataset.learners);
  CHECK(rep.dropped_untagged == 0);
  CHECK(rep.dropped_learners == 0);
}

TEST_CASE("the learning increment makes wins predictive") {
  SynthConfig c;
  c.n_learners = 400;
  c.n_skills = 3;
  c.min_interactions = 60;
  c.max_interactions = 60;
  c.learning_increment = 1.0;
  c.seed = 8;
  const auto data = generate(c);
  double early = 0, late = 0;
  for (const auto& [id, seq] : data.dataset.learners) {
    for (std::size_t i = 0; i < 10; ++i) early += seq[i].correct;
    for (std::size_t i = 50; i < 60; ++i) late += seq[i].correct;
  }
  CHECK(late > early * 1.1);
}

TEST_CASE("config JSON merges over defaults") {
  const auto c = synth_config_from_json(Json{{"n_learners", 7}, {"alpha", 1.75}});
  CHECK(c.n_learners == 7);
  CHECK(c.alpha == 1.75);
  CHECK(c.n_items == SynthConfig{}.n_items);
  CHECK_THROWS_AS(synth_config_from_json(Json{{"n_learner", 7}}), UsageError);
}
