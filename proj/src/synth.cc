#include "ktrace/synth.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ktrace/error.h"
#include "ktrace/json_io.h"
#include "ktrace/linear_models.h"
#include "ktrace/random.h"

namespace ktrace {

void SynthConfig::validate() const {
  if (n_learners == 0) throw UsageError("synth: n_learners must be positive");
  if (n_items == 0) throw UsageError("synth: n_items must be positive");
  if (n_skills == 0) throw UsageError("synth: n_skills must be positive");
  if (!(two_kc_probability >= 0 && two_kc_probability <= 1)) {
    throw UsageError("synth: two_kc_probability must lie in [0, 1]");
  }
  if (two_kc_probability > 0 && n_skills < 2) {
    throw UsageError("synth: two-KC items need at least 2 skills");
  }
  if (!(alpha > 1)) throw UsageError("synth: alpha must exceed 1");
  if (min_interactions < 10) throw UsageError("synth: min_interactions must be at least 10");
  if (max_interactions != 0 && max_interactions < min_interactions) {
    throw UsageError("synth: max_interactions below min_interactions");
  }
  if (ability_sd < 0 || difficulty_sd < 0) throw UsageError("synth: negative spread");
}

namespace {

constexpr std::uint64_t kItemStream = 0xffffffffULL;
constexpr std::int64_t kMinute = 60'000;
constexpr std::int64_t kHour = 60 * kMinute;
constexpr std::int64_t kDay = 24 * kHour;
constexpr std::int64_t kEpoch = 1'500'000'000'000;  // mid 2017, ms

std::int64_t draw_gap(Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.50) return static_cast<std::int64_t>(rng.uniform(0.5, 60.0) * kMinute);
  if (u < 0.75) return static_cast<std::int64_t>(rng.uniform(1.0, 24.0) * kHour);
  if (u < 0.90) return static_cast<std::int64_t>(rng.uniform(1.0, 7.0) * kDay);
  return static_cast<std::int64_t>(rng.uniform(7.0, 35.0) * kDay);
}

char other_answer(char correct, Rng& rng) {
  char c = static_cast<char>('a' + rng.below(3));
  if (c >= correct) ++c;
  return c;
}

}  // namespace

SynthData generate(const SynthConfig& config) {
  config.validate();
  SynthData out;
  out.truth.config = config;

  Rng item_rng(derive_seed(config.seed, kItemStream));
  std::vector<std::string> qids(config.n_items);
  std::vector<double> difficulty(config.n_items);
  std::vector<std::vector<std::size_t>> item_slots(config.n_items);
  std::vector<char> answer(config.n_items);
  for (std::size_t i = 0; i < config.n_items; ++i) {
    qids[i] = "q" + std::to_string(i + 1);
    difficulty[i] = item_rng.normal(config.difficulty_mean, config.difficulty_sd);
    answer[i] = static_cast<char>('a' + item_rng.below(4));
    std::size_t first = item_rng.below(config.n_skills);
    item_slots[i].push_back(first);
    if (item_rng.bernoulli(config.two_kc_probability)) {
      std::size_t second = item_rng.below(config.n_skills - 1);
      if (second >= first) ++second;
      item_slots[i].push_back(second);
    }
    std::sort(item_slots[i].begin(), item_slots[i].end());
    QuestionInfo info;
    info.correct_answer = answer[i];
    for (auto s : item_slots[i]) info.kc_tags.push_back(static_cast<int>(s) + 1);
    out.bank.emplace(qids[i], info);
    out.truth.difficulties.emplace(qids[i], difficulty[i]);
    out.truth.item_kcs.emplace(qids[i], info.kc_tags);
  }

  const double tail = 1.0 / (config.alpha - 1.0);
  std::vector<std::uint32_t> wins(config.n_skills);
  for (std::size_t a = 0; a < config.n_learners; ++a) {
    Rng rng(derive_seed(config.seed, a));
    const std::string learner = std::to_string(a + 1);
    const double ability = rng.normal(config.ability_mean, config.ability_sd);
    out.truth.abilities.emplace(learner, ability);

    double u = rng.uniform();
    while (u <= 0) u = rng.uniform();
    double n_real = static_cast<double>(config.min_interactions) * std::pow(u, -tail);
    if (config.max_interactions != 0) {
      n_real = std::min(n_real, static_cast<double>(config.max_interactions));
    }
    const auto n = static_cast<std::size_t>(
        std::min(n_real, 1e9));  // guards the uncapped heavy tail

    std::fill(wins.begin(), wins.end(), 0);
    std::int64_t t = kEpoch + static_cast<std::int64_t>(rng.uniform(0.0, 30.0) * kDay);
    for (std::size_t k = 0; k < n; ++k) {
      if (k > 0) t += std::max<std::int64_t>(1000, draw_gap(rng));
      const std::size_t item = rng.below(config.n_items);
      double logit = ability - difficulty[item];
      if (config.learning_increment != 0) {
        double learned = 0;
        for (auto s : item_slots[item]) learned += std::log1p(static_cast<double>(wins[s]));
        logit += config.learning_increment * learned /
                 static_cast<double>(item_slots[item].size());
      }
      const bool correct = rng.bernoulli(sigmoid(logit));
      if (correct) {
        for (auto s : item_slots[item]) ++wins[s];
      }
      InteractionRecord r;
      r.learner_id = learner;
      r.timestamp_ms = t;
      r.question_id = qids[item];
      r.bundle_id = "b" + std::to_string(item + 1);
      r.user_answer = correct ? answer[item] : other_answer(answer[item], rng);
      r.elapsed_time_ms = static_cast<std::int64_t>(rng.uniform(5.0, 60.0) * 1000);
      out.records.push_back(std::move(r));
    }
  }

  auto labeled = label_correctness(out.records, out.bank);
  out.dataset = Dataset::from_interactions(std::move(labeled.labeled));
  return out;
}

void write_synth(const std::filesystem::path& dir, const SynthData& data) {
  namespace fs = std::filesystem;
  const fs::path kt1 = dir / "kt1";
  fs::create_directories(kt1);
  std::size_t begin = 0;
  while (begin < data.records.size()) {
    std::size_t end = begin;
    while (end < data.records.size() &&
           data.records[end].learner_id == data.records[begin].learner_id) {
      ++end;
    }
    const fs::path file = kt1 / ("u" + data.records[begin].learner_id + ".csv");
    std::ofstream f(file, std::ios::binary);
    if (!f) throw DataError("cannot write " + file.string());
    write_kt1(f, {data.records.begin() + static_cast<std::ptrdiff_t>(begin),
                  data.records.begin() + static_cast<std::ptrdiff_t>(end)},
              false);
    begin = end;
  }
  {
    std::ofstream f(dir / "questions.csv", std::ios::binary);
    if (!f) throw DataError("cannot write " + (dir / "questions.csv").string());
    write_question_bank(f, data.bank);
  }
  write_json_file(dir / "ground_truth.json", to_json(data.truth));
}

}  // namespace ktrace
