#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "ktrace/error.h"
#include "ktrace/prep.h"
#include "ktrace/synth.h"
#include "test_util.h"

using namespace ktrace;
using testing::make_interaction;

namespace {

std::vector<LabeledInteraction> learner(const std::string& id, int n, int untagged = 0) {
  std::vector<LabeledInteraction> out;
  for (int i = 0; i < n; ++i) {
    std::vector<int> kcs;
    if (i >= untagged) kcs = {1 + i % 3};
    out.push_back(make_interaction(id, 1000 + i, "q" + std::to_string(i % 4), kcs, i % 2 == 0));
  }
  return out;
}

std::vector<LabeledInteraction> concat(std::initializer_list<std::vector<LabeledInteraction>> parts) {
  std::vector<LabeledInteraction> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

TEST_CASE("preprocess thresholds") {
  PreprocessReport report;
  const auto ds = preprocess(concat({learner("a", 9), learner("b", 10), learner("c", 12, 3)}),
                             10, &report);
  REQUIRE(ds.learners.size() == 1);
  CHECK(ds.learners.count("b") == 1);
  CHECK(ds.learners.at("b").size() == 10);
  CHECK(report.input_interactions == 31);
  CHECK(report.dropped_untagged == 3);
  CHECK(report.dropped_learners == 2);
  CHECK(report.dropped_learner_interactions == 18);
}

TEST_CASE("preprocess fails when nothing survives") {
  try {
    preprocess(concat({learner("a", 9), learner("b", 9)}));
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("no learners survive preprocessing") != std::string::npos);
  }
}

TEST_CASE("preprocess sorts stably by time") {
  std::vector<LabeledInteraction> xs;
  for (int i = 0; i < 10; ++i) {
    xs.push_back(make_interaction("a", (9 - i) / 2, "q" + std::to_string(i), {1}, true));
  }
  const auto ds = preprocess(xs);
  const auto& seq = ds.learners.at("a");
  for (std::size_t i = 1; i < seq.size(); ++i) {
    CHECK(seq[i - 1].timestamp_ms <= seq[i].timestamp_ms);
  }
  // q8 and q9 share timestamp 0; file order keeps q8 first.
  CHECK(seq[0].question_id == "q8");
  CHECK(seq[1].question_id == "q9");
}

TEST_CASE("combined KC ids") {
  const CombinedKcVocab vocab(std::set<std::vector<int>>{{2, 7}, {5}, {2, 8}, {2}, {1, 2, 3}});
  CHECK(combine_kcs({5}, vocab) == combine_kcs({5}, vocab));
  CHECK(combine_kcs({2, 7}, vocab) == combine_kcs({7, 2}, vocab));
  CHECK(combine_kcs({7, 2, 7}, vocab) == combine_kcs({2, 7}, vocab));
  CHECK(combine_kcs({2, 7}, vocab) != combine_kcs({2, 8}, vocab));
  // singletons first, in skill order
  CHECK(combine_kcs({2}, vocab) == 0);
  CHECK(combine_kcs({5}, vocab) == 1);
  CHECK(combine_kcs({9}, vocab) == vocab.unknown_id());
  CHECK_THROWS_AS(combine_kcs({}, vocab), UsageError);
  std::set<int> ids;
  for (const auto& s : vocab.sets()) ids.insert(combine_kcs(s, vocab));
  CHECK(ids.size() == vocab.size());
  CHECK(*ids.rbegin() == static_cast<int>(vocab.size()) - 1);
}

TEST_CASE("median convention") {
  CHECK(median({10, 20, 30}) == 20);
  CHECK(median({1, 2, 3, 4}) == 2.5);
  CHECK(median({48, 49}) == 48.5);
  CHECK_THROWS(median({}));
}

TEST_CASE("stats on a hand-built dataset") {
  std::vector<LabeledInteraction> xs;
  for (int i = 0; i < 10; ++i) xs.push_back(make_interaction("a", i, "q1", {1, 2}, true));
  for (int i = 0; i < 20; ++i) xs.push_back(make_interaction("b", i, i % 2 ? "q1" : "q2", i % 2 ? std::vector<int>{1, 2} : std::vector<int>{3}, i < 5));
  for (int i = 0; i < 30; ++i) xs.push_back(make_interaction("c", i, "q2", {3}, false));
  const auto ds = preprocess(xs);
  const auto s = compute_stats(ds);
  CHECK(s.n_learners == 3);
  CHECK(s.n_interactions == 60);
  CHECK(s.median_interactions_per_learner == 20);
  CHECK(s.mean_kcs_per_item == doctest::Approx(1.5));
  CHECK(s.median_items_per_kc == 1);
  CHECK(s.median_learners_per_item == 2);  // q1: {a,b}, q2: {b,c}
  CHECK(s.median_learners_per_kc == 2);
  CHECK(s.n_correct == 15);
  CHECK(s.n_correct + s.n_wrong == s.n_interactions);
}

TEST_CASE("power-law histogram") {
  std::vector<LabeledInteraction> xs = concat({learner("a", 10), learner("b", 10), learner("c", 25)});
  const auto ds = Dataset::from_interactions(xs);
  const auto h = powerlaw_histogram(ds);
  REQUIRE(h.size() == 2);
  CHECK(h[0] == std::pair<std::size_t, std::size_t>{10, 2});
  CHECK(h[1] == std::pair<std::size_t, std::size_t>{25, 1});
  CHECK(powerlaw_histogram(Dataset::from_interactions(learner("z", 12))).size() == 1);
}

TEST_CASE("power-law fit recovers the generator exponent") {
  SynthConfig c;
  c.n_learners = 10000;
  c.n_items = 20;
  c.n_skills = 4;
  c.alpha = 2.0;
  c.seed = 21;
  const auto data = generate(c);
  std::vector<std::size_t> counts;
  for (const auto& [id, seq] : data.dataset.learners) counts.push_back(seq.size());
  CHECK(std::abs(fit_powerlaw_exponent(counts) - 2.0) <= 0.15);
}

TEST_CASE("learner split") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("l" + std::to_string(i));
  const auto s = split_learners(ids, 0.2, 4);
  CHECK(s.train.size() == 8);
  CHECK(s.test.size() == 2);
  std::set<std::string> all(s.train.begin(), s.train.end());
  for (const auto& t : s.test) CHECK(all.insert(t).second);
  CHECK(all.size() == 10);
  const auto again = split_learners(ids, 0.2, 4);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK_THROWS_AS(split_learners(ids, 0.0, 1), UsageError);
  CHECK_THROWS_AS(split_learners(ids, 1.0, 1), UsageError);
  CHECK_THROWS_AS(split_learners({"only"}, 0.5, 1), UsageError);
}

TEST_CASE("learner split keeps learners whole with train-only vocabularies") {
  const auto ds = testing::random_dataset(3, 30, 10, 20);
  const auto [train, test] = learner_split(ds, 0.3, 9);
  CHECK(train.learners.size() + test.learners.size() == ds.learners.size());
  for (const auto& [id, seq] : test.learners) {
    CHECK(train.learners.count(id) == 0);
    CHECK(seq == ds.learners.at(id));
  }
  std::set<std::string> items;
  for (const auto& [id, seq] : train.learners) {
    for (const auto& x : seq) items.insert(x.question_id);
  }
  CHECK(items == train.item_vocab);
}

TEST_CASE("sample learners") {
  SynthConfig c;
  c.n_learners = 10000;
  c.n_items = 50;
  c.max_interactions = 500;
  c.seed = 8;
  const auto ds = generate(c).dataset;
  const auto full = sample_learners(ds, ds.learners.size(), 1);
  CHECK(learner_ids(full) == learner_ids(ds));
  const auto one = sample_learners(ds, 1, 2);
  REQUIRE(one.learners.size() == 1);
  CHECK(one.learners.begin()->second == ds.learners.at(one.learners.begin()->first));
  const auto fifth = sample_learners(ds, 2000, 3);
  CHECK(std::abs(correctness_ratio(fifth) - correctness_ratio(ds)) <= 0.02);
  CHECK(learner_ids(sample_learners(ds, 2000, 3)) == learner_ids(fifth));
  CHECK_THROWS_AS(sample_learners(ds, 10001, 1), UsageError);
}

TEST_CASE("combined KC ids ignore tag order and repeats") {
  std::vector<LabeledInteraction> xs = {testing::make_interaction("a", 0, "q1", {2, 1}, true),
                                        testing::make_interaction("a", 1, "q2", {1, 2, 2}, true),
                                        testing::make_interaction("a", 2, "q3", {1, 2}, false)};
  const auto ds = Dataset::from_interactions(xs);
  CHECK(ds.combined_kc_vocab.size() == 1);
  CHECK(ds.combined_kc_vocab.sets()[0] == std::vector<int>{1, 2});
}
