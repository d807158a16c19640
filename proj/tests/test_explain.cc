#include <cmath>
#include <set>

#include "doctest.h"
#include "ktrace/error.h"
#include "ktrace/explain.h"
#include "ktrace/json_io.h"
#include "test_util.h"

using namespace ktrace;
using testing::make_interaction;

namespace {

SparseFeatureRow binary_row(std::uint32_t n) {
  SparseFeatureRow r;
  for (std::uint32_t j = 0; j < n; ++j) r.entries.emplace_back(j, j % 2 ? 1.0 : 0.0);
  return r;
}

LinearModel model_with(std::vector<double> w, double b = 0) {
  LinearModel m;
  m.weights = std::move(w);
  m.bias = b;
  return m;
}

Dataset small_dataset() {
  std::vector<LabeledInteraction> xs = {
      make_interaction("a", 0, "q1", {1}, true), make_interaction("a", 1, "q2", {1, 2}, true),
      make_interaction("a", 2, "q1", {1}, false), make_interaction("b", 0, "q3", {3}, true),
      make_interaction("b", 5, "q2", {1, 2}, true), make_interaction("b", 9, "q3", {3}, true)};
  return Dataset::from_interactions(xs);
}

}  // namespace

TEST_CASE("LIME configuration") {
  LimeConfig c;
  CHECK(c.n_perturbations == 300);
  CHECK(c.flip_probability == 0.3);
  CHECK(c.n_test_learners == 1000);
  CHECK_NOTHROW(c.validate());
  c.n_perturbations = 1;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = {};
  c.flip_probability = 1.5;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = {};
  c.noise_sigma = -1;
  CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("null perturbation copies the row") {
  SparseFeatureRow r;
  r.entries = {{0, 1.0}, {3, 0.0}, {5, 2.5}};
  const std::vector<BlockKind> kinds = {BlockKind::kBinary, BlockKind::kBinary, BlockKind::kCount};
  LimeConfig c;
  c.flip_probability = 0;
  c.noise_sigma = 0;
  c.n_perturbations = 50;
  const auto p = perturb_values(r, kinds, c, 1);
  REQUIRE(p.size() == 50);
  for (const auto& v : p) CHECK(v == std::vector<double>{1.0, 0.0, 2.5});
}

TEST_CASE("certain flips invert every binary entry") {
  SparseFeatureRow r;
  r.entries = {{0, 1.0}, {3, 0.0}, {5, 2.5}};
  const std::vector<BlockKind> kinds = {BlockKind::kBinary, BlockKind::kBinary, BlockKind::kCount};
  LimeConfig c;
  c.flip_probability = 1;
  c.noise_sigma = 0;
  for (const auto& v : perturb_values(r, kinds, c, 2)) CHECK(v == std::vector<double>{0.0, 1.0, 2.5});
}

TEST_CASE("count noise is centred on the original value") {
  SparseFeatureRow r;
  r.entries = {{0, 3.0}, {1, 0.0}};
  const std::vector<BlockKind> kinds = {BlockKind::kCount, BlockKind::kCount};
  LimeConfig c;
  c.n_perturbations = 10000;
  const auto p = perturb_values(r, kinds, c, 3);
  double mean = 0;
  for (const auto& v : p) {
    mean += v[0];
    CHECK(v[1] >= 0.0);
    CHECK(v[0] >= 0.0);
  }
  mean /= p.size();
  CHECK(std::abs(mean - 3.0) <= 3 * 0.5 / std::sqrt(10000.0));
}

TEST_CASE("perturbation is deterministic per seed") {
  const auto r = binary_row(6);
  const std::vector<BlockKind> kinds(6, BlockKind::kBinary);
  LimeConfig c;
  CHECK(perturb_values(r, kinds, c, 7) == perturb_values(r, kinds, c, 7));
  CHECK(perturb_values(r, kinds, c, 7) != perturb_values(r, kinds, c, 8));
  CHECK_THROWS_AS(perturb_values(r, std::vector<BlockKind>(5, BlockKind::kBinary), c, 7),
                  UsageError);
}

TEST_CASE("perturbed rows keep the layout's structure") {
  const auto ds = small_dataset();
  FeatureConfig fc;
  const auto layout = FeatureLayout::build(fc, ds);
  const auto rows = encode(ds, layout);
  LimeConfig c;
  c.n_perturbations = 20;
  for (const auto& p : perturb_sample(rows[2], layout, c, 1)) {
    REQUIRE(p.entries.size() == rows[2].entries.size());
    for (std::size_t k = 0; k < p.entries.size(); ++k) {
      CHECK(p.entries[k].first == rows[2].entries[k].first);
      const auto kind = layout.block_of(p.entries[k].first).kind;
      if (kind == BlockKind::kBinary) {
        CHECK((p.entries[k].second == 0.0 || p.entries[k].second == 1.0));
      } else {
        CHECK(p.entries[k].second >= 0.0);
      }
    }
  }
}

TEST_CASE("a model reading one feature is recovered") {
  const std::uint32_t n = 6;
  std::vector<double> w(n, 0.0);
  w[2] = 3.0;
  const auto m = model_with(w);
  const std::vector<BlockKind> kinds(n, BlockKind::kBinary);
  LimeConfig c;
  c.n_perturbations = 2000;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto e = lime_correlations(m, binary_row(n), kinds, c, seed);
    REQUIRE(e.correlations.size() == n);
    CHECK(e.correlations[2] >= 0.9);
    for (std::uint32_t j = 0; j < n; ++j) {
      if (j != 2) CHECK(std::abs(e.correlations[j]) <= 0.1);
    }
  }
  auto neg = w;
  neg[2] = -3.0;
  const auto a = lime_correlations(m, binary_row(n), kinds, c, 4);
  const auto b = lime_correlations(model_with(neg), binary_row(n), kinds, c, 4);
  for (std::uint32_t j = 0; j < n; ++j) {
    CHECK(b.correlations[j] == doctest::Approx(-a.correlations[j]).epsilon(1e-9));
  }
}

TEST_CASE("constant columns and constant predictions") {
  SparseFeatureRow r;
  r.entries = {{0, 1.0}, {1, 2.0}};
  const std::vector<BlockKind> kinds = {BlockKind::kBinary, BlockKind::kCount};
  LimeConfig c;
  c.noise_sigma = 0;
  const auto e = lime_correlations(model_with({1.0, 1.0}), r, kinds, c, 1);
  CHECK(e.correlations[1] == 0.0);
  CHECK(e.correlations[0] > 0.99);
  CHECK_FALSE(e.degenerate);

  const auto flat = lime_correlations(model_with({0.0, 0.0}, 0.3), r, kinds, LimeConfig{}, 1);
  CHECK(flat.degenerate);
  CHECK(flat.correlations == std::vector<double>{0.0, 0.0});
  CHECK(flat.prediction == doctest::Approx(1 / (1 + std::exp(-0.3))));
}

TEST_CASE("correlation signs follow linear weights") {
  Rng rng(11);
  std::size_t agree = 0, total = 0;
  LimeConfig c;
  c.flip_probability = 0.1;
  c.noise_sigma = 0.2;
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint32_t n = 8;
    std::vector<double> w(n);
    for (auto& v : w) v = rng.uniform(-2.0, 2.0);
    SparseFeatureRow r;
    std::vector<BlockKind> kinds;
    for (std::uint32_t j = 0; j < n; ++j) {
      const bool count = j >= 5;
      r.entries.emplace_back(j, count ? rng.uniform(0.0, 3.0) : static_cast<double>(rng.below(2)));
      kinds.push_back(count ? BlockKind::kCount : BlockKind::kBinary);
    }
    const auto e = lime_correlations(model_with(w, rng.uniform(-1.0, 1.0)), r, kinds, c,
                                     static_cast<std::uint64_t>(trial));
    for (std::uint32_t j = 0; j < n; ++j) {
      CHECK(std::abs(e.correlations[j]) <= 1.0);
      if (std::abs(w[j]) < 0.5) continue;
      ++total;
      agree += (e.correlations[j] > 0) == (w[j] > 0);
    }
  }
  CHECK(static_cast<double>(agree) >= 0.95 * static_cast<double>(total));
}

TEST_CASE("hand-built aggregation") {
  const auto ds = small_dataset();
  FeatureConfig fc;
  const auto layout = FeatureLayout::build(fc, ds);
  const std::uint32_t item = layout.item_offset() + layout.item_slot("q1");
  const std::uint32_t kc = layout.skill_offset() + layout.skill_slot(2);
  const std::uint32_t att = layout.window_attempts_offset(0);
  const std::uint32_t win = layout.window_wins_offset(0);

  RowExplanation s1;
  s1.label = true;
  s1.prediction = 0.8;
  s1.features = {item, kc};
  s1.correlations = {0.4, -0.2};
  RowExplanation s2 = s1;
  s2.prediction = 0.6;
  s2.correlations = {0.2, -0.6};
  RowExplanation s3;
  s3.label = false;
  s3.prediction = 0.7;
  s3.features = {att, win, item};
  s3.correlations = {0.5, 0.0, -0.1};
  const std::vector<RowExplanation> all = {s1, s2, s3};
  const auto rep = aggregate_importances(all, layout);

  CHECK(rep.n_samples[0] == 2);
  CHECK(rep.n_samples[1] == 1);
  const auto& items_c = rep.cell(FeatureGroup::kItems, true);
  CHECK(*items_c.support == doctest::Approx(0.3));
  CHECK_FALSE(items_c.contradict.has_value());
  const auto& kcs_c = rep.cell(FeatureGroup::kKcs, true);
  CHECK(*kcs_c.contradict == doctest::Approx(-0.4));
  CHECK_FALSE(kcs_c.support.has_value());
  CHECK(*rep.cell(FeatureGroup::kAttempts, false).support == doctest::Approx(0.5));
  CHECK(*rep.cell(FeatureGroup::kItems, false).contradict == doctest::Approx(-0.1));
  const auto& wins_i = rep.cell(FeatureGroup::kWins, false);
  CHECK_FALSE(wins_i.support.has_value());
  CHECK_FALSE(wins_i.contradict.has_value());
  CHECK_FALSE(rep.cell(FeatureGroup::kAttempts, true).support.has_value());

  const auto table = format_importance_table(rep);
  CHECK(table.rfind("Features\tCorrect Support\tCorrect Contradict\tIncorrect Support\t"
                    "Incorrect Contradict\n", 0) == 0);
  CHECK(table.find("Item (One hot encoded)\t0.3000\tNA\tNA\t-0.1000\n") != std::string::npos);
  CHECK(table.find("KCs (One hot encoded)\tNA\t-0.4000\tNA\tNA\n") != std::string::npos);
}

TEST_CASE("one-sided correlations give plain means") {
  const auto ds = small_dataset();
  const auto layout = FeatureLayout::build(FeatureConfig{}, ds);
  const std::uint32_t a = layout.item_offset(), b = layout.item_offset() + 1;
  RowExplanation s;
  s.label = false;
  s.prediction = 0.1;
  s.features = {a, b};
  s.correlations = {0.1, 0.3};
  RowExplanation t = s;
  t.correlations = {0.5, 0.7};
  const std::vector<RowExplanation> v = {s, t};
  const auto rep = aggregate_importances(v, layout);
  CHECK(*rep.cell(FeatureGroup::kItems, true).support == doctest::Approx(0.4));
  CHECK_FALSE(rep.cell(FeatureGroup::kItems, true).contradict.has_value());
}

TEST_CASE("skill difficulty by hand") {
  std::vector<LabeledInteraction> xs;
  const bool s1[] = {true, false, true, true};
  for (int i = 0; i < 4; ++i) xs.push_back(make_interaction("a", i, "q1", {7}, s1[i]));
  for (int i = 0; i < 3; ++i) xs.push_back(make_interaction("b", i, "q2", {4}, true));
  xs.push_back(make_interaction("b", 9, "q3", {4, 7}, false));
  const auto ds = Dataset::from_interactions(xs);
  const auto table = skill_difficulty(ds);
  REQUIRE(table.size() == 2);
  CHECK(table[0].skill == 7);
  CHECK(table[0].n_correct == 3);
  CHECK(table[0].n_interactions == 5);
  CHECK(table[0].ratio == doctest::Approx(0.6));
  CHECK(table[1].skill == 4);
  CHECK(table[1].ratio == doctest::Approx(0.75));

  std::vector<LabeledInteraction> easy;
  for (int i = 0; i < 3; ++i) easy.push_back(make_interaction("a", i, "q", {2}, true));
  CHECK(skill_difficulty(Dataset::from_interactions(easy))[0].ratio == 1.0);

  FeatureConfig fc;
  fc.family = FeatureFamily::kDas3h;
  const auto layout = FeatureLayout::build(fc, ds);
  const auto rows = encode(ds, layout);
  const auto from_rows = skill_difficulty(rows, layout);
  REQUIRE(from_rows.size() == table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    CHECK(from_rows[i].skill == table[i].skill);
    CHECK(from_rows[i].n_correct == table[i].n_correct);
    CHECK(from_rows[i].n_interactions == table[i].n_interactions);
  }
}

TEST_CASE("skill table shape") {
  std::vector<SkillDifficulty> t;
  for (int s = 1; s <= 5; ++s) {
    SkillDifficulty d;
    d.skill = s * 10;
    d.ratio = 0.1 * s;
    if (s == 1) d.lime_importance = -0.038;
    t.push_back(d);
  }
  CHECK(format_skill_table(t, 2) ==
        "Top 2 Difficult Skills\tCorrectness Ratio\tLIME Importance\tTop 2 Easy Skills\t"
        "Correctness Ratio\tLIME Importance\n"
        "10\t0.1000\t-0.0380\t40\t0.4000\tNA\n"
        "20\t0.2000\tNA\t50\t0.5000\tNA\n");
}

TEST_CASE("explanations are reproducible and independent of jobs") {
  const auto ds = testing::random_dataset(3, 30, 5, 20);
  FeatureConfig fc;
  const auto layout = FeatureLayout::build(fc, ds);
  const auto rows = encode(ds, layout);
  const auto model = fit_logistic(to_matrix(rows, layout.width()));
  LimeConfig c;
  c.n_perturbations = 50;
  c.n_test_learners = 10;
  c.seed = 5;
  const auto e1 = explain_rows(model, rows, layout, c, 1);
  const auto e3 = explain_rows(model, rows, layout, c, 3);
  REQUIRE(e1.size() == e3.size());
  std::set<std::string> learners;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    CHECK(e1[i].correlations == e3[i].correlations);
    learners.insert(e1[i].learner_id);
    for (double r : e1[i].correlations) CHECK(std::abs(r) <= 1.0);
  }
  CHECK(learners.size() == 10);
  const auto r1 = aggregate_importances(e1, layout);
  const auto r3 = aggregate_importances(e3, layout);
  CHECK(to_json(r1).dump() == to_json(r3).dump());
  CHECK(r1.n_learners == 10);

  auto table = skill_difficulty(rows, layout);
  attach_lime_importance(table, e1, layout);
  std::size_t with = 0;
  for (const auto& s : table) with += s.lime_importance.has_value();
  CHECK(with > 0);
}
