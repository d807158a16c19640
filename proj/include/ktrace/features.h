#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ktrace/prep.h"

namespace ktrace {

enum class FeatureFamily { kIrt, kPfa, kDas3h, kBestLr, kBestLrTw };

std::string_view family_name(FeatureFamily family);
// Accepts "irt", "pfa", "das3h", "best_lr", "best_lr_tw".
FeatureFamily parse_family(std::string_view name);

inline constexpr std::int64_t kInfiniteWindow = std::numeric_limits<std::int64_t>::max();

// 1 hour, 1 day, 7 days, 30 days, unbounded (milliseconds).
std::vector<std::int64_t> default_windows();
// "1h,1d,7d,30d,inf"; units ms, s, m, h, d, w.
std::vector<std::int64_t> parse_windows(std::string_view spec);
std::string format_window(std::int64_t window_ms);
std::string format_windows(std::span<const std::int64_t> windows);

struct FeatureConfig {
  FeatureFamily family = FeatureFamily::kBestLrTw;
  // Strictly increasing, last entry kInfiniteWindow. Only DAS3H and
  // Best-LR-TW read it; the other families use the unbounded window alone.
  std::vector<std::int64_t> windows = default_windows();
  std::string scale = "log1p";

  void validate() const;
  // Windows the family actually uses.
  std::vector<std::int64_t> effective_windows() const;
};

// ln(1 + x). Throws UsageError on negative input.
double scale_count(double x);

enum class BlockKind { kBinary, kCount };
enum class FeatureGroup { kKcs, kAttempts, kWins, kItems };

std::string_view group_name(FeatureGroup group);

struct FeatureBlock {
  std::string name;
  BlockKind kind = BlockKind::kBinary;
  FeatureGroup group = FeatureGroup::kItems;
  std::uint32_t offset = 0;
  std::uint32_t width = 0;
};

// Column layout for one feature family over fixed item and skill
// vocabularies. Item- and skill-indexed blocks have one extra trailing slot
// shared by every value missing from the vocabulary.
//
// Block order (omitting blocks a family lacks):
//   item | skill | per window w: skill_attempts[w], skill_wins[w] |
//   item_attempts | all_attempts | item_wins | all_wins
// PFA uses skill blocks only, IRT the item block only; Best-LR is Best-LR-TW
// restricted to the unbounded window.
class FeatureLayout {
 public:
  FeatureLayout() = default;
  FeatureLayout(FeatureConfig config, std::vector<std::string> items,
                std::vector<int> skills);
  static FeatureLayout build(const FeatureConfig& config, const Dataset& train);

  const FeatureConfig& config() const { return config_; }
  const std::vector<FeatureBlock>& blocks() const { return blocks_; }
  std::uint32_t width() const { return width_; }
  const std::vector<std::string>& items() const { return items_; }
  const std::vector<int>& skills() const { return skills_; }
  std::vector<std::int64_t> windows() const { return config_.effective_windows(); }

  // Slot within an item/skill block; unknown values map to the last slot.
  std::uint32_t item_slot(const std::string& question_id) const;
  std::uint32_t skill_slot(int kc) const;
  std::uint32_t n_item_slots() const { return static_cast<std::uint32_t>(items_.size() + 1); }
  std::uint32_t n_skill_slots() const {
    return static_cast<std::uint32_t>(skills_.size() + 1);
  }

  const FeatureBlock* find(std::string_view name) const;
  const FeatureBlock& block_of(std::uint32_t feature_index) const;

  bool has_items() const { return item_block_ >= 0; }
  bool has_skills() const { return skill_block_ >= 0; }
  bool has_totals() const { return totals_block_ >= 0; }
  // Offsets; meaningful only when the corresponding has_*() is true.
  std::uint32_t item_offset() const;
  std::uint32_t skill_offset() const;
  // attempts/wins block offsets for window index k.
  std::uint32_t window_attempts_offset(std::size_t k) const;
  std::uint32_t window_wins_offset(std::size_t k) const;
  // Offset of the four scalar total blocks (item_attempts first).
  std::uint32_t totals_offset() const;

 private:
  FeatureConfig config_;
  std::vector<std::string> items_;
  std::vector<int> skills_;
  std::unordered_map<std::string, std::uint32_t> item_index_;
  std::unordered_map<int, std::uint32_t> skill_index_;
  std::vector<FeatureBlock> blocks_;
  std::uint32_t width_ = 0;
  int item_block_ = -1;
  int skill_block_ = -1;
  int totals_block_ = -1;
  std::vector<int> window_blocks_;  // attempts block index per window
};

std::string window_block_name(std::string_view base, std::int64_t window_ms);

struct SparseFeatureRow {
  bool label = false;
  // Strictly increasing indices. Count entries stay present when zero so a
  // row's structural features are visible to the explainer.
  std::vector<std::pair<std::uint32_t, double>> entries;
  std::string learner_id;
  std::int64_t timestamp_ms = 0;

  bool operator==(const SparseFeatureRow&) const = default;
};

// Streaming per-learner extraction. Each call emits the row for an
// interaction from strictly earlier history, then folds the interaction
// into the counters.
class FeatureEncoder {
 public:
  explicit FeatureEncoder(const FeatureLayout& layout);

  SparseFeatureRow next(const LabeledInteraction& interaction);
  // Forgets all history; call between learners.
  void reset();

 private:
  struct SkillHistory {
    std::vector<std::int64_t> times;
    std::vector<std::uint32_t> cum_wins;  // wins among times[0..i]
    std::vector<std::size_t> window_start;  // per finite window
  };

  const FeatureLayout* layout_;
  std::vector<std::int64_t> windows_;
  std::vector<std::int64_t> finite_windows_;
  std::int64_t last_time_ = std::numeric_limits<std::int64_t>::min();
  std::uint64_t all_attempts_ = 0;
  std::uint64_t all_wins_ = 0;
  std::vector<std::uint32_t> item_attempts_, item_wins_;
  std::vector<std::uint32_t> touched_items_;
  std::vector<SkillHistory> skills_;
  std::vector<std::uint32_t> touched_skills_;
  std::vector<std::uint32_t> slot_scratch_;
};

// Rows for one learner's time-ordered history. Throws DataError if the
// timestamps decrease.
std::vector<SparseFeatureRow> encode_learner(std::span<const LabeledInteraction> history,
                                             const FeatureLayout& layout);

// Rows for every learner, in learner-id then time order. `jobs` > 1 splits
// learners across threads; the output does not depend on it.
std::vector<SparseFeatureRow> encode(const Dataset& history, const FeatureLayout& layout,
                                     unsigned jobs = 1);

std::vector<SparseFeatureRow> encode_irt(const Dataset& history,
                                         const std::set<std::string>& item_vocab);
std::vector<SparseFeatureRow> encode_pfa(const Dataset& history,
                                         const std::set<int>& skill_vocab);
std::vector<SparseFeatureRow> encode_das3h(const Dataset& history,
                                           const std::set<std::string>& item_vocab,
                                           const std::set<int>& skill_vocab,
                                           std::vector<std::int64_t> windows);
std::vector<SparseFeatureRow> encode_best_lr(const Dataset& history,
                                             const std::set<std::string>& item_vocab,
                                             const std::set<int>& skill_vocab);
std::vector<SparseFeatureRow> encode_best_lr_tw(const Dataset& history,
                                                const std::set<std::string>& item_vocab,
                                                const std::set<int>& skill_vocab,
                                                std::vector<std::int64_t> windows);

// Text rows: "label index:value index:value ..." with 17 significant digits.
void write_row(std::string& out, const SparseFeatureRow& row);
void write_rows(std::ostream& out, std::span<const SparseFeatureRow> rows);
// Companion "learner_id<TAB>timestamp" lines, one per row.
void write_row_index(std::ostream& out, std::span<const SparseFeatureRow> rows);
std::vector<SparseFeatureRow> read_rows(std::istream& in);
void read_row_index(std::istream& in, std::vector<SparseFeatureRow>& rows);

// Compressed sparse rows for training.
struct FeatureMatrix {
  std::uint32_t n_cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  std::vector<std::uint8_t> labels;

  std::size_t n_rows() const { return labels.size(); }
};

// Throws UsageError if any index is >= n_cols.
FeatureMatrix to_matrix(std::span<const SparseFeatureRow> rows, std::uint32_t n_cols);

}  // namespace ktrace
