#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ktrace {

// One raw KT1 question-solving event.
struct InteractionRecord {
  std::string learner_id;
  std::int64_t timestamp_ms = 0;
  std::string question_id;
  std::optional<std::string> bundle_id;
  std::optional<char> user_answer;  // 'a'..'d'; empty when unanswered
  std::int64_t elapsed_time_ms = 0;

  bool operator==(const InteractionRecord&) const = default;
};

struct QuestionInfo {
  char correct_answer = 'a';
  std::vector<int> kc_tags;  // sorted, unique; empty means untagged
};

using QuestionBank = std::map<std::string, QuestionInfo>;

struct LabeledInteraction {
  std::string learner_id;
  std::int64_t timestamp_ms = 0;
  std::string question_id;
  std::optional<std::string> bundle_id;
  std::optional<char> user_answer;
  std::int64_t elapsed_time_ms = 0;
  bool correct = false;
  std::vector<int> kc_tags;  // sorted, unique

  bool operator==(const LabeledInteraction&) const = default;
};

// A row that could not be turned into a record. `line` is 1-based and counts
// the header.
struct RowError {
  std::string source;
  std::size_t line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<InteractionRecord> records;
  std::vector<RowError> errors;
};

// Parses delimited KT1 text with a header row. Columns are located by name;
// EdNet's public layout (timestamp, solving_id, question_id, user_answer,
// elapsed_time) loads as well as layouts that carry bundle_id. When the file
// has a learner_id (or user_id) column it overrides `learner_id`.
//
// Throws DataError if a required column is missing. Rows with unparsable or
// out-of-range fields land in ParseResult::errors and are excluded.
ParseResult parse_kt1(std::istream& in, const std::string& learner_id,
                      const std::string& source_name = "<stream>");
ParseResult parse_kt1(const std::filesystem::path& path);

// "u123.csv" -> "123"; other stems are returned unchanged.
std::string learner_id_from_path(const std::filesystem::path& path);

// Writes records in a layout parse_kt1 reads back exactly. With
// `with_learner_column` the output is a consolidated multi-learner file.
void write_kt1(std::ostream& out, const std::vector<InteractionRecord>& records,
               bool with_learner_column);

// Question bank with columns question_id, correct_answer and tags (KC ids
// separated by ';', "-1" or empty meaning untagged). Extra columns are ignored.
QuestionBank load_question_bank(std::istream& in);
QuestionBank load_question_bank(const std::filesystem::path& path);
void write_question_bank(std::ostream& out, const QuestionBank& bank);

struct LabelResult {
  std::vector<LabeledInteraction> labeled;
  std::size_t excluded = 0;
  std::map<std::string, std::size_t> unknown_questions;  // id -> count
};

// Joins records with the bank. Blank answers are labeled incorrect; records
// whose question is missing from the bank are excluded and counted.
LabelResult label_correctness(const std::vector<InteractionRecord>& records,
                              const QuestionBank& bank);

// Consolidated store of labeled interactions, one CSV with a header:
// learner_id,timestamp,question_id,bundle_id,user_answer,elapsed_time,correct,tags
void write_labeled(std::ostream& out,
                   const std::vector<LabeledInteraction>& interactions);
std::vector<LabeledInteraction> read_labeled(std::istream& in);

}  // namespace ktrace
