#include "ktrace/features.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <thread>

#include "ktrace/error.h"
#include "text_util.h"

namespace ktrace {
namespace {

constexpr std::int64_t kSecond = 1000;
constexpr std::int64_t kMinute = 60 * kSecond;
constexpr std::int64_t kHour = 60 * kMinute;
constexpr std::int64_t kDay = 24 * kHour;
constexpr std::int64_t kWeek = 7 * kDay;

}  // namespace

std::string_view family_name(FeatureFamily family) {
  switch (family) {
    case FeatureFamily::kIrt: return "irt";
    case FeatureFamily::kPfa: return "pfa";
    case FeatureFamily::kDas3h: return "das3h";
    case FeatureFamily::kBestLr: return "best_lr";
    case FeatureFamily::kBestLrTw: return "best_lr_tw";
  }
  return "unknown";
}

FeatureFamily parse_family(std::string_view name) {
  for (auto f : {FeatureFamily::kIrt, FeatureFamily::kPfa, FeatureFamily::kDas3h,
                 FeatureFamily::kBestLr, FeatureFamily::kBestLrTw}) {
    if (family_name(f) == name) return f;
  }
  throw UsageError("unknown feature family '" + std::string(name) + "'");
}

std::vector<std::int64_t> default_windows() {
  return {kHour, kDay, 7 * kDay, 30 * kDay, kInfiniteWindow};
}

std::vector<std::int64_t> parse_windows(std::string_view spec) {
  std::vector<std::string_view> parts;
  detail::split(spec, ',', parts);
  std::vector<std::int64_t> out;
  for (auto raw : parts) {
    const auto token = detail::trim(raw);
    if (token == "inf" || token == "infinity") {
      out.push_back(kInfiniteWindow);
      continue;
    }
    std::size_t digits = 0;
    while (digits < token.size() && token[digits] >= '0' && token[digits] <= '9') ++digits;
    const auto number = detail::parse_int(token.substr(0, digits));
    const auto unit = token.substr(digits);
    std::int64_t scale = 0;
    if (unit.empty() || unit == "ms") scale = 1;
    else if (unit == "s") scale = kSecond;
    else if (unit == "m") scale = kMinute;
    else if (unit == "h") scale = kHour;
    else if (unit == "d") scale = kDay;
    else if (unit == "w") scale = kWeek;
    if (!number || scale == 0) {
      throw UsageError("bad window '" + std::string(token) + "'");
    }
    out.push_back(*number * scale);
  }
  return out;
}

std::string format_window(std::int64_t w) {
  if (w == kInfiniteWindow) return "inf";
  if (w % kDay == 0) return std::to_string(w / kDay) + "d";
  if (w % kHour == 0) return std::to_string(w / kHour) + "h";
  if (w % kMinute == 0) return std::to_string(w / kMinute) + "m";
  if (w % kSecond == 0) return std::to_string(w / kSecond) + "s";
  return std::to_string(w) + "ms";
}

std::string format_windows(std::span<const std::int64_t> windows) {
  std::string out;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (i) out.push_back(',');
    out += format_window(windows[i]);
  }
  return out;
}

void FeatureConfig::validate() const {
  if (scale != "log1p") throw UsageError("unsupported count scaling '" + scale + "'");
  if (windows.empty()) throw UsageError("window list is empty");
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i] <= 0) throw UsageError("windows must be positive");
    if (i && windows[i] <= windows[i - 1]) {
      throw UsageError("windows must be strictly increasing");
    }
  }
  if (windows.back() != kInfiniteWindow) {
    throw UsageError("the last window must be inf");
  }
}

std::vector<std::int64_t> FeatureConfig::effective_windows() const {
  switch (family) {
    case FeatureFamily::kIrt: return {};
    case FeatureFamily::kPfa:
    case FeatureFamily::kBestLr: return {kInfiniteWindow};
    case FeatureFamily::kDas3h:
    case FeatureFamily::kBestLrTw: return windows;
  }
  return {};
}

double scale_count(double x) {
  if (!(x >= 0.0)) throw UsageError("scale_count: negative count");
  return std::log1p(x);
}

std::string_view group_name(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::kKcs: return "KCs (One hot encoded)";
    case FeatureGroup::kAttempts: return "Attempt (Counts)";
    case FeatureGroup::kWins: return "Wins (Counts)";
    case FeatureGroup::kItems: return "Item (One hot encoded)";
  }
  return "unknown";
}

std::string window_block_name(std::string_view base, std::int64_t window_ms) {
  return std::string(base) + "[" + format_window(window_ms) + "]";
}

FeatureLayout::FeatureLayout(FeatureConfig config, std::vector<std::string> items,
                             std::vector<int> skills)
    : config_(std::move(config)), items_(std::move(items)), skills_(std::move(skills)) {
  config_.validate();
  std::sort(items_.begin(), items_.end());
  items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
  std::sort(skills_.begin(), skills_.end());
  skills_.erase(std::unique(skills_.begin(), skills_.end()), skills_.end());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    item_index_.emplace(items_[i], static_cast<std::uint32_t>(i));
  }
  for (std::size_t i = 0; i < skills_.size(); ++i) {
    skill_index_.emplace(skills_[i], static_cast<std::uint32_t>(i));
  }

  auto add = [&](std::string name, BlockKind kind, FeatureGroup group,
                 std::uint32_t width) {
    blocks_.push_back({std::move(name), kind, group, width_, width});
    width_ += width;
    return static_cast<int>(blocks_.size() - 1);
  };
  const auto family = config_.family;
  const bool items_on = family != FeatureFamily::kPfa;
  const bool skills_on = family != FeatureFamily::kIrt;
  if (items_on) {
    item_block_ = add("item", BlockKind::kBinary, FeatureGroup::kItems, n_item_slots());
  }
  if (skills_on) {
    skill_block_ = add("skill", BlockKind::kBinary, FeatureGroup::kKcs, n_skill_slots());
    for (auto w : config_.effective_windows()) {
      window_blocks_.push_back(add(window_block_name("skill_attempts", w), BlockKind::kCount,
                                   FeatureGroup::kAttempts, n_skill_slots()));
      add(window_block_name("skill_wins", w), BlockKind::kCount, FeatureGroup::kWins,
          n_skill_slots());
    }
  }
  if (family == FeatureFamily::kBestLr || family == FeatureFamily::kBestLrTw) {
    totals_block_ = add("item_attempts", BlockKind::kCount, FeatureGroup::kAttempts, 1);
    add("all_attempts", BlockKind::kCount, FeatureGroup::kAttempts, 1);
    add("item_wins", BlockKind::kCount, FeatureGroup::kWins, 1);
    add("all_wins", BlockKind::kCount, FeatureGroup::kWins, 1);
  }
}

FeatureLayout FeatureLayout::build(const FeatureConfig& config, const Dataset& train) {
  return FeatureLayout(config,
                       std::vector<std::string>(train.item_vocab.begin(), train.item_vocab.end()),
                       std::vector<int>(train.kc_vocab.begin(), train.kc_vocab.end()));
}

std::uint32_t FeatureLayout::item_slot(const std::string& question_id) const {
  const auto it = item_index_.find(question_id);
  return it == item_index_.end() ? static_cast<std::uint32_t>(items_.size()) : it->second;
}

std::uint32_t FeatureLayout::skill_slot(int kc) const {
  const auto it = skill_index_.find(kc);
  return it == skill_index_.end() ? static_cast<std::uint32_t>(skills_.size()) : it->second;
}

const FeatureBlock* FeatureLayout::find(std::string_view name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

const FeatureBlock& FeatureLayout::block_of(std::uint32_t feature_index) const {
  if (feature_index >= width_) throw UsageError("feature index outside layout");
  const auto it = std::upper_bound(
      blocks_.begin(), blocks_.end(), feature_index,
      [](std::uint32_t i, const FeatureBlock& b) { return i < b.offset; });
  return *(it - 1);
}

std::uint32_t FeatureLayout::item_offset() const {
  return blocks_[static_cast<std::size_t>(item_block_)].offset;
}
std::uint32_t FeatureLayout::skill_offset() const {
  return blocks_[static_cast<std::size_t>(skill_block_)].offset;
}
std::uint32_t FeatureLayout::window_attempts_offset(std::size_t k) const {
  return blocks_[static_cast<std::size_t>(window_blocks_[k])].offset;
}
std::uint32_t FeatureLayout::window_wins_offset(std::size_t k) const {
  return blocks_[static_cast<std::size_t>(window_blocks_[k]) + 1].offset;
}
std::uint32_t FeatureLayout::totals_offset() const {
  return blocks_[static_cast<std::size_t>(totals_block_)].offset;
}

FeatureEncoder::FeatureEncoder(const FeatureLayout& layout) : layout_(&layout) {
  windows_ = layout.windows();
  for (auto w : windows_) {
    if (w != kInfiniteWindow) finite_windows_.push_back(w);
  }
  item_attempts_.assign(layout.n_item_slots(), 0);
  item_wins_.assign(layout.n_item_slots(), 0);
  skills_.resize(layout.n_skill_slots());
  for (auto& s : skills_) {
    s.cum_wins.assign(1, 0);
    s.window_start.assign(finite_windows_.size(), 0);
  }
}

void FeatureEncoder::reset() {
  last_time_ = std::numeric_limits<std::int64_t>::min();
  all_attempts_ = all_wins_ = 0;
  for (auto slot : touched_items_) item_attempts_[slot] = item_wins_[slot] = 0;
  touched_items_.clear();
  for (auto slot : touched_skills_) {
    auto& s = skills_[slot];
    s.times.clear();
    s.cum_wins.assign(1, 0);
    std::fill(s.window_start.begin(), s.window_start.end(), 0);
  }
  touched_skills_.clear();
}

SparseFeatureRow FeatureEncoder::next(const LabeledInteraction& x) {
  const FeatureLayout& layout = *layout_;
  if (x.timestamp_ms < last_time_) {
    throw DataError("learner " + x.learner_id + ": interactions out of time order");
  }
  last_time_ = x.timestamp_ms;
  const std::int64_t t = x.timestamp_ms;

  SparseFeatureRow row;
  row.label = x.correct;
  row.learner_id = x.learner_id;
  row.timestamp_ms = t;

  const std::uint32_t item = layout.item_slot(x.question_id);
  slot_scratch_.clear();
  for (int kc : x.kc_tags) slot_scratch_.push_back(layout.skill_slot(kc));
  std::sort(slot_scratch_.begin(), slot_scratch_.end());
  slot_scratch_.erase(std::unique(slot_scratch_.begin(), slot_scratch_.end()),
                      slot_scratch_.end());

  auto& e = row.entries;
  if (layout.has_items()) e.emplace_back(layout.item_offset() + item, 1.0);
  if (layout.has_skills()) {
    for (auto s : slot_scratch_) e.emplace_back(layout.skill_offset() + s, 1.0);
    const auto& windows = windows_;
    for (auto s : slot_scratch_) {
      auto& h = skills_[s];
      for (std::size_t k = 0; k < finite_windows_.size(); ++k) {
        auto& start = h.window_start[k];
        while (start < h.times.size() && t - h.times[start] >= finite_windows_[k]) ++start;
      }
    }
    std::size_t finite_k = 0;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      const bool infinite = windows[k] == kInfiniteWindow;
      const auto a_off = layout.window_attempts_offset(k);
      for (auto s : slot_scratch_) {
        const auto& h = skills_[s];
        const std::size_t start = infinite ? 0 : h.window_start[finite_k];
        e.emplace_back(a_off + s, scale_count(static_cast<double>(h.times.size() - start)));
      }
      const auto w_off = layout.window_wins_offset(k);
      for (auto s : slot_scratch_) {
        const auto& h = skills_[s];
        const std::size_t start = infinite ? 0 : h.window_start[finite_k];
        e.emplace_back(w_off + s,
                       scale_count(static_cast<double>(h.cum_wins.back() - h.cum_wins[start])));
      }
      if (!infinite) ++finite_k;
    }
  }
  if (layout.has_totals()) {
    const auto off = layout.totals_offset();
    e.emplace_back(off + 0, scale_count(item_attempts_[item]));
    e.emplace_back(off + 1, scale_count(static_cast<double>(all_attempts_)));
    e.emplace_back(off + 2, scale_count(item_wins_[item]));
    e.emplace_back(off + 3, scale_count(static_cast<double>(all_wins_)));
  }

  // Counters absorb the interaction only after its row is complete.
  const std::uint32_t win = x.correct ? 1 : 0;
  if (item_attempts_[item] == 0) touched_items_.push_back(item);
  ++item_attempts_[item];
  item_wins_[item] += win;
  ++all_attempts_;
  all_wins_ += win;
  for (auto s : slot_scratch_) {
    auto& h = skills_[s];
    if (h.times.empty()) touched_skills_.push_back(s);
    h.times.push_back(t);
    h.cum_wins.push_back(h.cum_wins.back() + win);
  }
  return row;
}

std::vector<SparseFeatureRow> encode_learner(std::span<const LabeledInteraction> history,
                                             const FeatureLayout& layout) {
  FeatureEncoder enc(layout);
  std::vector<SparseFeatureRow> rows;
  rows.reserve(history.size());
  for (const auto& x : history) rows.push_back(enc.next(x));
  return rows;
}

std::vector<SparseFeatureRow> encode(const Dataset& history, const FeatureLayout& layout,
                                     unsigned jobs) {
  std::vector<const std::vector<LabeledInteraction>*> seqs;
  seqs.reserve(history.learners.size());
  for (const auto& [id, seq] : history.learners) seqs.push_back(&seq);

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(seqs.size())));
  std::vector<std::vector<SparseFeatureRow>> parts(jobs);
  auto work = [&](unsigned part) {
    const std::size_t lo = seqs.size() * part / jobs;
    const std::size_t hi = seqs.size() * (part + 1) / jobs;
    FeatureEncoder enc(layout);
    auto& out = parts[part];
    for (std::size_t i = lo; i < hi; ++i) {
      enc.reset();
      for (const auto& x : *seqs[i]) out.push_back(enc.next(x));
    }
  };
  if (jobs == 1) {
    parts[0].reserve(history.n_interactions());
    work(0);
    return std::move(parts[0]);
  }
  {
    std::vector<std::jthread> threads;
    for (unsigned p = 0; p < jobs; ++p) threads.emplace_back(work, p);
  }
  std::vector<SparseFeatureRow> rows;
  rows.reserve(history.n_interactions());
  for (auto& p : parts) std::move(p.begin(), p.end(), std::back_inserter(rows));
  return rows;
}

namespace {

FeatureLayout make_layout(FeatureFamily family, const std::set<std::string>& items,
                          const std::set<int>& skills,
                          std::vector<std::int64_t> windows = default_windows()) {
  FeatureConfig config;
  config.family = family;
  config.windows = std::move(windows);
  return FeatureLayout(config, {items.begin(), items.end()}, {skills.begin(), skills.end()});
}

}  // namespace

std::vector<SparseFeatureRow> encode_irt(const Dataset& history,
                                         const std::set<std::string>& item_vocab) {
  return encode(history, make_layout(FeatureFamily::kIrt, item_vocab, {}));
}

std::vector<SparseFeatureRow> encode_pfa(const Dataset& history,
                                         const std::set<int>& skill_vocab) {
  return encode(history, make_layout(FeatureFamily::kPfa, {}, skill_vocab));
}

std::vector<SparseFeatureRow> encode_das3h(const Dataset& history,
                                           const std::set<std::string>& item_vocab,
                                           const std::set<int>& skill_vocab,
                                           std::vector<std::int64_t> windows) {
  return encode(history,
                make_layout(FeatureFamily::kDas3h, item_vocab, skill_vocab, std::move(windows)));
}

std::vector<SparseFeatureRow> encode_best_lr(const Dataset& history,
                                             const std::set<std::string>& item_vocab,
                                             const std::set<int>& skill_vocab) {
  return encode(history, make_layout(FeatureFamily::kBestLr, item_vocab, skill_vocab));
}

std::vector<SparseFeatureRow> encode_best_lr_tw(const Dataset& history,
                                                const std::set<std::string>& item_vocab,
                                                const std::set<int>& skill_vocab,
                                                std::vector<std::int64_t> windows) {
  return encode(history, make_layout(FeatureFamily::kBestLrTw, item_vocab, skill_vocab,
                                     std::move(windows)));
}

void write_row(std::string& out, const SparseFeatureRow& row) {
  out.push_back(row.label ? '1' : '0');
  for (const auto& [index, value] : row.entries) {
    out.push_back(' ');
    out += std::to_string(index);
    out.push_back(':');
    detail::append_double(out, value);
  }
  out.push_back('\n');
}

void write_rows(std::ostream& out, std::span<const SparseFeatureRow> rows) {
  std::string buf;
  for (const auto& row : rows) {
    write_row(buf, row);
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
}

void write_row_index(std::ostream& out, std::span<const SparseFeatureRow> rows) {
  std::string buf;
  for (const auto& row : rows) {
    buf += row.learner_id;
    buf.push_back('\t');
    buf += std::to_string(row.timestamp_ms);
    buf.push_back('\n');
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
}

std::vector<SparseFeatureRow> read_rows(std::istream& in) {
  std::vector<SparseFeatureRow> rows;
  std::string line;
  std::vector<std::string_view> tokens;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = detail::strip_cr(line);
    if (detail::trim(view).empty()) continue;
    detail::split(view, ' ', tokens);
    const std::string where = "rows line " + std::to_string(line_no);
    SparseFeatureRow row;
    if (tokens[0] == "1") row.label = true;
    else if (tokens[0] != "0") throw DataError(where + ": bad label");
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      if (tokens[i].empty()) continue;
      const auto colon = tokens[i].find(':');
      if (colon == std::string_view::npos) throw DataError(where + ": bad entry");
      const auto index = detail::parse_int(tokens[i].substr(0, colon));
      const auto value = detail::parse_double(tokens[i].substr(colon + 1));
      if (!index || *index < 0 || !value) throw DataError(where + ": bad entry");
      const auto idx = static_cast<std::uint32_t>(*index);
      if (!row.entries.empty() && row.entries.back().first >= idx) {
        throw DataError(where + ": indices must be strictly increasing");
      }
      row.entries.emplace_back(idx, *value);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void read_row_index(std::istream& in, std::vector<SparseFeatureRow>& rows) {
  std::string line;
  std::size_t i = 0;
  while (std::getline(in, line)) {
    const auto view = detail::strip_cr(line);
    if (view.empty()) continue;
    if (i >= rows.size()) throw DataError("row index longer than rows file");
    const auto tab = view.find('\t');
    if (tab == std::string_view::npos) throw DataError("bad row index line");
    const auto ts = detail::parse_int(view.substr(tab + 1));
    if (!ts) throw DataError("bad row index timestamp");
    rows[i].learner_id = std::string(view.substr(0, tab));
    rows[i].timestamp_ms = *ts;
    ++i;
  }
  if (i != rows.size()) throw DataError("row index shorter than rows file");
}

FeatureMatrix to_matrix(std::span<const SparseFeatureRow> rows, std::uint32_t n_cols) {
  FeatureMatrix m;
  m.n_cols = n_cols;
  std::size_t nnz = 0;
  for (const auto& r : rows) nnz += r.entries.size();
  m.row_ptr.reserve(rows.size() + 1);
  m.cols.reserve(nnz);
  m.vals.reserve(nnz);
  m.labels.reserve(rows.size());
  for (const auto& r : rows) {
    for (const auto& [index, value] : r.entries) {
      if (index >= n_cols) {
        throw UsageError("feature index " + std::to_string(index) +
                         " outside model dimension " + std::to_string(n_cols));
      }
      m.cols.push_back(index);
      m.vals.push_back(value);
    }
    m.row_ptr.push_back(m.cols.size());
    m.labels.push_back(r.label ? 1 : 0);
  }
  return m;
}

}  // namespace ktrace
