#include "ktrace/prep.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "ktrace/error.h"
#include "ktrace/random.h"

namespace ktrace {

CombinedKcVocab::CombinedKcVocab(const std::set<std::vector<int>>& observed) {
  for (const auto& s : observed) {
    if (s.size() == 1) sets_.push_back(s);
  }
  for (const auto& s : observed) {
    if (s.size() > 1) sets_.push_back(s);
  }
  for (std::size_t i = 0; i < sets_.size(); ++i) {
    ids_.emplace(sets_[i], static_cast<int>(i));
  }
}

std::optional<int> CombinedKcVocab::find(const std::vector<int>& sorted_tags) const {
  const auto it = ids_.find(sorted_tags);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

int combine_kcs(std::vector<int> kc_tags, const CombinedKcVocab& vocab) {
  if (kc_tags.empty()) throw UsageError("combine_kcs: empty KC set");
  std::sort(kc_tags.begin(), kc_tags.end());
  kc_tags.erase(std::unique(kc_tags.begin(), kc_tags.end()), kc_tags.end());
  return vocab.find(kc_tags).value_or(vocab.unknown_id());
}

std::size_t Dataset::n_interactions() const {
  std::size_t n = 0;
  for (const auto& [id, seq] : learners) n += seq.size();
  return n;
}

Dataset Dataset::from_learners(
    std::map<std::string, std::vector<LabeledInteraction>> learners) {
  Dataset d;
  std::set<std::vector<int>> observed;
  for (auto& [id, seq] : learners) {
    std::stable_sort(seq.begin(), seq.end(), [](const auto& a, const auto& b) {
      return a.timestamp_ms < b.timestamp_ms;
    });
    for (const auto& li : seq) {
      d.item_vocab.insert(li.question_id);
      d.kc_vocab.insert(li.kc_tags.begin(), li.kc_tags.end());
      if (li.kc_tags.empty()) continue;
      std::vector<int> key = li.kc_tags;
      std::sort(key.begin(), key.end());
      key.erase(std::unique(key.begin(), key.end()), key.end());
      observed.insert(std::move(key));
    }
  }
  d.learners = std::move(learners);
  d.combined_kc_vocab = CombinedKcVocab(observed);
  return d;
}

Dataset Dataset::from_interactions(std::vector<LabeledInteraction> interactions) {
  std::map<std::string, std::vector<LabeledInteraction>> grouped;
  for (auto& li : interactions) grouped[li.learner_id].push_back(std::move(li));
  return from_learners(std::move(grouped));
}

std::vector<LabeledInteraction> Dataset::flatten() const {
  std::vector<LabeledInteraction> out;
  out.reserve(n_interactions());
  for (const auto& [id, seq] : learners) out.insert(out.end(), seq.begin(), seq.end());
  return out;
}

Dataset preprocess(std::vector<LabeledInteraction> labeled,
                   std::size_t min_interactions, PreprocessReport* report) {
  PreprocessReport r;
  r.input_interactions = labeled.size();
  std::map<std::string, std::vector<LabeledInteraction>> grouped;
  for (auto& li : labeled) {
    if (li.kc_tags.empty()) {
      ++r.dropped_untagged;
      continue;
    }
    grouped[li.learner_id].push_back(std::move(li));
  }
  for (auto it = grouped.begin(); it != grouped.end();) {
    if (it->second.size() < min_interactions) {
      ++r.dropped_learners;
      r.dropped_learner_interactions += it->second.size();
      it = grouped.erase(it);
    } else {
      ++it;
    }
  }
  if (report) *report = r;
  if (grouped.empty()) throw DataError("no learners survive preprocessing");
  return Dataset::from_learners(std::move(grouped));
}

double median(std::vector<double> values) {
  if (values.empty()) throw UsageError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

DatasetStats compute_stats(const Dataset& dataset) {
  if (dataset.learners.empty()) throw DataError("compute_stats: empty dataset");
  DatasetStats s;
  s.n_learners = dataset.learners.size();

  struct ItemInfo {
    const std::vector<int>* kcs = nullptr;
    std::size_t learners = 0;
  };
  std::unordered_map<std::string, ItemInfo> items;
  std::map<int, std::size_t> learners_per_kc;
  std::vector<double> per_learner;
  per_learner.reserve(dataset.learners.size());

  std::vector<const std::string*> seen_items;
  std::vector<int> seen_kcs;
  for (const auto& [id, seq] : dataset.learners) {
    per_learner.push_back(static_cast<double>(seq.size()));
    seen_items.clear();
    seen_kcs.clear();
    for (const auto& li : seq) {
      ++s.n_interactions;
      s.n_interactions_expanded += li.kc_tags.size();
      (li.correct ? s.n_correct : s.n_wrong) += 1;
      auto& info = items[li.question_id];
      if (!info.kcs) info.kcs = &li.kc_tags;
      seen_items.push_back(&items.find(li.question_id)->first);
      seen_kcs.insert(seen_kcs.end(), li.kc_tags.begin(), li.kc_tags.end());
    }
    std::sort(seen_items.begin(), seen_items.end());
    seen_items.erase(std::unique(seen_items.begin(), seen_items.end()),
                     seen_items.end());
    for (const auto* q : seen_items) ++items[*q].learners;
    std::sort(seen_kcs.begin(), seen_kcs.end());
    seen_kcs.erase(std::unique(seen_kcs.begin(), seen_kcs.end()), seen_kcs.end());
    for (int kc : seen_kcs) ++learners_per_kc[kc];
  }

  std::map<int, std::size_t> items_per_kc;
  double kc_total = 0;
  std::vector<double> learners_per_item;
  learners_per_item.reserve(items.size());
  for (const auto& [qid, info] : items) {
    kc_total += static_cast<double>(info.kcs->size());
    for (int kc : *info.kcs) ++items_per_kc[kc];
    learners_per_item.push_back(static_cast<double>(info.learners));
  }
  s.mean_kcs_per_item = kc_total / static_cast<double>(items.size());

  std::vector<double> ipk, lpk;
  for (const auto& [kc, n] : items_per_kc) ipk.push_back(static_cast<double>(n));
  for (const auto& [kc, n] : learners_per_kc) lpk.push_back(static_cast<double>(n));
  s.median_items_per_kc = ipk.empty() ? 0.0 : median(std::move(ipk));
  s.median_learners_per_kc = lpk.empty() ? 0.0 : median(std::move(lpk));
  s.median_learners_per_item = median(std::move(learners_per_item));
  s.median_interactions_per_learner = median(std::move(per_learner));
  return s;
}

std::vector<std::pair<std::size_t, std::size_t>> powerlaw_histogram(
    const Dataset& dataset) {
  std::map<std::size_t, std::size_t> h;
  for (const auto& [id, seq] : dataset.learners) ++h[seq.size()];
  return {h.begin(), h.end()};
}

double fit_powerlaw_exponent(std::span<const std::size_t> counts,
                             std::size_t min_count, std::size_t min_bin_learners) {
  if (min_count == 0) min_count = 1;
  std::size_t max_count = 0;
  for (auto c : counts) max_count = std::max(max_count, c);
  // Doubling bins [b, 2b): the ratio is constant, so the average density in
  // each bin sits on the same line as the underlying density.
  std::vector<double> xs, ys;
  for (std::size_t lo = min_count; lo <= max_count; lo *= 2) {
    const std::size_t hi = lo * 2;
    const auto n = static_cast<std::size_t>(std::count_if(
        counts.begin(), counts.end(), [&](std::size_t c) { return c >= lo && c < hi; }));
    if (n < min_bin_learners) continue;
    const double width = static_cast<double>(hi - lo);
    xs.push_back(std::log(std::sqrt(static_cast<double>(lo) * static_cast<double>(hi))));
    ys.push_back(std::log(static_cast<double>(n) / width));
  }
  if (xs.size() < 2) throw DataError("power-law fit needs at least two populated bins");
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return -sxy / sxx;
}

double correctness_ratio(const Dataset& dataset) {
  std::size_t n = 0, c = 0;
  for (const auto& [id, seq] : dataset.learners) {
    for (const auto& li : seq) {
      ++n;
      c += li.correct ? 1 : 0;
    }
  }
  if (n == 0) throw DataError("correctness_ratio: empty dataset");
  return static_cast<double>(c) / static_cast<double>(n);
}

std::vector<std::string> learner_ids(const Dataset& dataset) {
  std::vector<std::string> ids;
  ids.reserve(dataset.learners.size());
  for (const auto& [id, seq] : dataset.learners) ids.push_back(id);
  return ids;
}

SplitManifest split_learners(const std::vector<std::string>& ids, double test_fraction,
                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw UsageError("test fraction must lie strictly between 0 and 1");
  }
  if (ids.size() < 2) throw UsageError("a learner split needs at least two learners");
  std::vector<std::string> order(ids);
  std::sort(order.begin(), order.end());
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(order));
  const std::size_t n = order.size();
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * n));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  SplitManifest m;
  m.test_fraction = test_fraction;
  m.seed = seed;
  m.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  m.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(m.train.begin(), m.train.end());
  std::sort(m.test.begin(), m.test.end());
  return m;
}

Dataset subset(const Dataset& dataset, const std::vector<std::string>& ids) {
  std::map<std::string, std::vector<LabeledInteraction>> picked;
  for (const auto& id : ids) {
    const auto it = dataset.learners.find(id);
    if (it == dataset.learners.end()) throw DataError("unknown learner '" + id + "'");
    picked.emplace(id, it->second);
  }
  return Dataset::from_learners(std::move(picked));
}

std::pair<Dataset, Dataset> learner_split(const Dataset& dataset, double test_fraction,
                                          std::uint64_t seed) {
  const auto m = split_learners(learner_ids(dataset), test_fraction, seed);
  return {subset(dataset, m.train), subset(dataset, m.test)};
}

Dataset sample_learners(const Dataset& dataset, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw UsageError("sample size must be positive");
  if (n > dataset.learners.size()) {
    throw UsageError("cannot sample " + std::to_string(n) + " learners from " +
                     std::to_string(dataset.learners.size()));
  }
  auto ids = learner_ids(dataset);
  Rng rng(seed);
  // Partial Fisher-Yates: the first n slots become the sample.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(ids.size() - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(n);
  std::sort(ids.begin(), ids.end());
  return subset(dataset, ids);
}

}  // namespace ktrace
