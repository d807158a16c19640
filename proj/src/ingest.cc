#include "ktrace/ingest.h"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "ktrace/error.h"
#include "text_util.h"

namespace ktrace {
namespace {

using detail::parse_int;
using detail::split;
using detail::strip_cr;
using detail::trim;

// Column positions discovered from a header row; -1 when absent.
struct Kt1Columns {
  int learner = -1;
  int timestamp = -1;
  int question = -1;
  int bundle = -1;
  int answer = -1;
  int elapsed = -1;
};

int find_column(const std::vector<std::string_view>& header,
                std::initializer_list<std::string_view> names) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto field = trim(header[i]);
    for (auto name : names) {
      if (field == name) return static_cast<int>(i);
    }
  }
  return -1;
}

Kt1Columns map_kt1_header(const std::vector<std::string_view>& header,
                          const std::string& source) {
  Kt1Columns c;
  c.learner = find_column(header, {"learner_id", "user_id"});
  c.timestamp = find_column(header, {"timestamp", "timestamp_ms"});
  c.question = find_column(header, {"question_id"});
  c.bundle = find_column(header, {"bundle_id"});
  c.answer = find_column(header, {"user_answer"});
  c.elapsed = find_column(header, {"elapsed_time", "elapsed_time_ms"});
  const std::array<std::pair<int, const char*>, 4> required = {{
      {c.timestamp, "timestamp"},
      {c.question, "question_id"},
      {c.answer, "user_answer"},
      {c.elapsed, "elapsed_time"},
  }};
  for (const auto& [index, name] : required) {
    if (index < 0) {
      throw DataError(source + ": missing required column '" + name + "'");
    }
  }
  return c;
}

std::optional<char> normalize_answer(std::string_view s, bool& ok) {
  s = trim(s);
  ok = true;
  if (s.empty()) return std::nullopt;
  if (s.size() == 1) {
    char ch = s.front();
    if (ch >= 'A' && ch <= 'D') ch = static_cast<char>(ch - 'A' + 'a');
    if (ch >= 'a' && ch <= 'd') return ch;
  }
  ok = false;
  return std::nullopt;
}

std::vector<int> parse_tags(std::string_view s, bool& ok) {
  ok = true;
  std::vector<int> tags;
  s = trim(s);
  if (s.empty() || s == "-1") return tags;
  std::vector<std::string_view> parts;
  split(s, ';', parts);
  for (auto part : parts) {
    if (trim(part).empty()) continue;
    const auto v = parse_int(part);
    if (!v || *v < 0) {
      ok = false;
      return {};
    }
    tags.push_back(static_cast<int>(*v));
  }
  std::sort(tags.begin(), tags.end());
  tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
  return tags;
}

void append_tags(std::string& out, const std::vector<int>& tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (i) out.push_back(';');
    out += std::to_string(tags[i]);
  }
}

std::string_view field_at(const std::vector<std::string_view>& fields, int i) {
  return i >= 0 && static_cast<std::size_t>(i) < fields.size()
             ? fields[static_cast<std::size_t>(i)]
             : std::string_view{};
}

}  // namespace

std::string learner_id_from_path(const std::filesystem::path& path) {
  std::string stem = path.stem().string();
  if (stem.size() > 1 && stem.front() == 'u') return stem.substr(1);
  return stem;
}

ParseResult parse_kt1(std::istream& in, const std::string& learner_id,
                      const std::string& source_name) {
  ParseResult result;
  std::string line;
  std::vector<std::string_view> fields;
  if (!std::getline(in, line)) {
    throw DataError(source_name + ": missing header row");
  }
  split(strip_cr(line), ',', fields);
  const Kt1Columns cols = map_kt1_header(fields, source_name);
  const int max_col = std::max({cols.learner, cols.timestamp, cols.question,
                                cols.bundle, cols.answer, cols.elapsed});

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = strip_cr(line);
    if (trim(view).empty()) continue;
    split(view, ',', fields);
    auto fail = [&](std::string message) {
      result.errors.push_back({source_name, line_no, std::move(message)});
    };
    if (static_cast<int>(fields.size()) <= max_col) {
      fail("expected at least " + std::to_string(max_col + 1) + " fields, got " +
           std::to_string(fields.size()));
      continue;
    }
    InteractionRecord r;
    r.learner_id = cols.learner >= 0 ? std::string(trim(field_at(fields, cols.learner)))
                                     : learner_id;
    const auto ts = parse_int(field_at(fields, cols.timestamp));
    if (!ts || *ts < 0) {
      fail("bad timestamp '" + std::string(field_at(fields, cols.timestamp)) + "'");
      continue;
    }
    const auto elapsed = parse_int(field_at(fields, cols.elapsed));
    if (!elapsed || *elapsed < 0) {
      fail("bad elapsed_time '" + std::string(field_at(fields, cols.elapsed)) + "'");
      continue;
    }
    r.timestamp_ms = *ts;
    r.elapsed_time_ms = *elapsed;
    r.question_id = std::string(trim(field_at(fields, cols.question)));
    if (r.question_id.empty()) {
      fail("empty question_id");
      continue;
    }
    if (r.learner_id.empty()) {
      fail("empty learner_id");
      continue;
    }
    bool answer_ok = true;
    r.user_answer = normalize_answer(field_at(fields, cols.answer), answer_ok);
    if (!answer_ok) {
      fail("bad user_answer '" + std::string(field_at(fields, cols.answer)) + "'");
      continue;
    }
    if (cols.bundle >= 0) {
      const auto bundle = trim(field_at(fields, cols.bundle));
      if (!bundle.empty()) r.bundle_id = std::string(bundle);
    }
    result.records.push_back(std::move(r));
  }
  return result;
}

ParseResult parse_kt1(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_kt1(in, learner_id_from_path(path), path.string());
}

void write_kt1(std::ostream& out, const std::vector<InteractionRecord>& records,
               bool with_learner_column) {
  std::string buf;
  if (with_learner_column) buf += "learner_id,";
  buf += "timestamp,question_id,bundle_id,user_answer,elapsed_time\n";
  for (const auto& r : records) {
    if (with_learner_column) {
      buf += r.learner_id;
      buf.push_back(',');
    }
    buf += std::to_string(r.timestamp_ms);
    buf.push_back(',');
    buf += r.question_id;
    buf.push_back(',');
    if (r.bundle_id) buf += *r.bundle_id;
    buf.push_back(',');
    if (r.user_answer) buf.push_back(*r.user_answer);
    buf.push_back(',');
    buf += std::to_string(r.elapsed_time_ms);
    buf.push_back('\n');
  }
  out << buf;
}

QuestionBank load_question_bank(std::istream& in) {
  QuestionBank bank;
  std::string line;
  std::vector<std::string_view> fields;
  if (!std::getline(in, line)) throw DataError("question bank: missing header row");
  split(strip_cr(line), ',', fields);
  const int qcol = find_column(fields, {"question_id"});
  const int acol = find_column(fields, {"correct_answer"});
  const int tcol = find_column(fields, {"tags", "kc_tags"});
  if (qcol < 0) throw DataError("question bank: missing required column 'question_id'");
  if (acol < 0)
    throw DataError("question bank: missing required column 'correct_answer'");
  if (tcol < 0) throw DataError("question bank: missing required column 'tags'");
  const int max_col = std::max({qcol, acol, tcol});

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = strip_cr(line);
    if (trim(view).empty()) continue;
    split(view, ',', fields);
    const std::string where = "question bank line " + std::to_string(line_no);
    if (static_cast<int>(fields.size()) <= max_col) {
      throw DataError(where + ": too few fields");
    }
    const std::string qid(trim(field_at(fields, qcol)));
    if (qid.empty()) throw DataError(where + ": empty question_id");
    bool ok = true;
    const auto answer = normalize_answer(field_at(fields, acol), ok);
    if (!ok || !answer) throw DataError(where + ": bad correct_answer");
    auto tags = parse_tags(field_at(fields, tcol), ok);
    if (!ok) throw DataError(where + ": bad tags");

    auto [it, inserted] = bank.try_emplace(qid, QuestionInfo{*answer, tags});
    if (!inserted) {
      if (it->second.correct_answer != *answer) {
        throw DataError(where + ": question " + qid +
                        " listed with conflicting correct answers");
      }
      auto& merged = it->second.kc_tags;
      merged.insert(merged.end(), tags.begin(), tags.end());
      std::sort(merged.begin(), merged.end());
      merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
    }
  }
  return bank;
}

QuestionBank load_question_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return load_question_bank(in);
}

void write_question_bank(std::ostream& out, const QuestionBank& bank) {
  std::string buf = "question_id,correct_answer,tags\n";
  for (const auto& [qid, info] : bank) {
    buf += qid;
    buf.push_back(',');
    buf.push_back(info.correct_answer);
    buf.push_back(',');
    if (info.kc_tags.empty()) {
      buf += "-1";
    } else {
      append_tags(buf, info.kc_tags);
    }
    buf.push_back('\n');
  }
  out << buf;
}

LabelResult label_correctness(const std::vector<InteractionRecord>& records,
                              const QuestionBank& bank) {
  LabelResult result;
  result.labeled.reserve(records.size());
  for (const auto& r : records) {
    const auto it = bank.find(r.question_id);
    if (it == bank.end()) {
      ++result.excluded;
      ++result.unknown_questions[r.question_id];
      continue;
    }
    LabeledInteraction li;
    li.learner_id = r.learner_id;
    li.timestamp_ms = r.timestamp_ms;
    li.question_id = r.question_id;
    li.bundle_id = r.bundle_id;
    li.user_answer = r.user_answer;
    li.elapsed_time_ms = r.elapsed_time_ms;
    li.correct = r.user_answer.has_value() && *r.user_answer == it->second.correct_answer;
    li.kc_tags = it->second.kc_tags;
    result.labeled.push_back(std::move(li));
  }
  return result;
}

void write_labeled(std::ostream& out,
                   const std::vector<LabeledInteraction>& interactions) {
  std::string buf =
      "learner_id,timestamp,question_id,bundle_id,user_answer,elapsed_time,correct,"
      "tags\n";
  for (const auto& r : interactions) {
    buf += r.learner_id;
    buf.push_back(',');
    buf += std::to_string(r.timestamp_ms);
    buf.push_back(',');
    buf += r.question_id;
    buf.push_back(',');
    if (r.bundle_id) buf += *r.bundle_id;
    buf.push_back(',');
    if (r.user_answer) buf.push_back(*r.user_answer);
    buf.push_back(',');
    buf += std::to_string(r.elapsed_time_ms);
    buf.push_back(',');
    buf.push_back(r.correct ? '1' : '0');
    buf.push_back(',');
    append_tags(buf, r.kc_tags);
    buf.push_back('\n');
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
}

std::vector<LabeledInteraction> read_labeled(std::istream& in) {
  std::vector<LabeledInteraction> result;
  std::string line;
  std::vector<std::string_view> fields;
  if (!std::getline(in, line)) throw DataError("labeled store: missing header row");
  split(strip_cr(line), ',', fields);
  const Kt1Columns cols = map_kt1_header(fields, "labeled store");
  const int ccol = find_column(fields, {"correct"});
  const int tcol = find_column(fields, {"tags", "kc_tags"});
  if (cols.learner < 0 || ccol < 0 || tcol < 0) {
    throw DataError("labeled store: header must contain learner_id, correct and tags");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = strip_cr(line);
    if (trim(view).empty()) continue;
    split(view, ',', fields);
    const std::string where = "labeled store line " + std::to_string(line_no);
    if (fields.size() < 8) throw DataError(where + ": too few fields");
    LabeledInteraction li;
    li.learner_id = std::string(field_at(fields, cols.learner));
    const auto ts = parse_int(field_at(fields, cols.timestamp));
    const auto el = parse_int(field_at(fields, cols.elapsed));
    if (!ts || !el || *ts < 0 || *el < 0) throw DataError(where + ": bad integer field");
    li.timestamp_ms = *ts;
    li.elapsed_time_ms = *el;
    li.question_id = std::string(field_at(fields, cols.question));
    const auto bundle = field_at(fields, cols.bundle);
    if (!bundle.empty()) li.bundle_id = std::string(bundle);
    bool ok = true;
    li.user_answer = normalize_answer(field_at(fields, cols.answer), ok);
    if (!ok) throw DataError(where + ": bad user_answer");
    const auto c = field_at(fields, ccol);
    if (c != "0" && c != "1") throw DataError(where + ": bad correct flag");
    li.correct = c == "1";
    li.kc_tags = parse_tags(field_at(fields, tcol), ok);
    if (!ok) throw DataError(where + ": bad tags");
    result.push_back(std::move(li));
  }
  return result;
}

}  // namespace ktrace
