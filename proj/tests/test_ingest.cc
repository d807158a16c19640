#include <sstream>

#include "doctest.h"
#include "ktrace/error.h"
#include "ktrace/ingest.h"
#include "test_util.h"

using namespace ktrace;

TEST_CASE("kt1 row maps fields directly") {
  std::istringstream in(
      "timestamp,question_id,bundle_id,user_answer,elapsed_time\n"
      "1565332027449,q4862,b3224,c,45000\n");
  const auto r = parse_kt1(in, "7");
  REQUIRE(r.errors.empty());
  REQUIRE(r.records.size() == 1);
  const auto& x = r.records[0];
  CHECK(x.learner_id == "7");
  CHECK(x.timestamp_ms == 1565332027449);
  CHECK(x.question_id == "q4862");
  CHECK(x.bundle_id == "b3224");
  CHECK(x.user_answer == 'c');
  CHECK(x.elapsed_time_ms == 45000);
}

TEST_CASE("public EdNet layout with solving_id loads") {
  std::istringstream in(
      "timestamp,solving_id,question_id,user_answer,elapsed_time\r\n"
      "1565096190868,1,q5012,B,38000\r\n"
      "1565096221062,2,q4706,,24000\r\n");
  const auto r = parse_kt1(in, "1");
  REQUIRE(r.errors.empty());
  REQUIRE(r.records.size() == 2);
  CHECK_FALSE(r.records[0].bundle_id.has_value());
  CHECK(r.records[0].user_answer == 'b');
  CHECK_FALSE(r.records[1].user_answer.has_value());
}

TEST_CASE("header-only input yields nothing") {
  std::istringstream in("timestamp,question_id,bundle_id,user_answer,elapsed_time\n");
  const auto r = parse_kt1(in, "1");
  CHECK(r.records.empty());
  CHECK(r.errors.empty());
}

TEST_CASE("malformed rows are reported and excluded") {
  std::istringstream in(
      "timestamp,question_id,bundle_id,user_answer,elapsed_time\n"
      "100,q1,b1,a,-5\n"
      "abc,q1,b1,a,10\n"
      "200,q2,b2,e,10\n"
      "300,,b2,a,10\n"
      "400,q3\n"
      "500,q4,b4,d,0\n");
  const auto r = parse_kt1(in, "u", "file.csv");
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].question_id == "q4");
  REQUIRE(r.errors.size() == 5);
  CHECK(r.errors[0].line == 2);
  CHECK(r.errors[0].source == "file.csv");
  CHECK(r.errors[0].message.find("elapsed") != std::string::npos);
  CHECK(r.errors[4].line == 6);
}

TEST_CASE("missing required column names the column") {
  std::istringstream in("timestamp,question_id,bundle_id,elapsed_time\n1,q1,b1,5\n");
  try {
    parse_kt1(in, "1");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("user_answer") != std::string::npos);
  }
}

TEST_CASE("consolidated file carries learner ids") {
  std::istringstream in(
      "learner_id,timestamp,question_id,bundle_id,user_answer,elapsed_time\n"
      "5,10,q1,b1,a,1\n"
      "6,11,q2,b2,b,2\n");
  const auto r = parse_kt1(in, "ignored");
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].learner_id == "5");
  CHECK(r.records[1].learner_id == "6");
}

TEST_CASE("learner id from file name") {
  CHECK(learner_id_from_path("data/u123.csv") == "123");
  CHECK(learner_id_from_path("abc.csv") == "abc");
}

TEST_CASE("write/parse round trip is exact") {
  Rng rng(11);
  std::vector<InteractionRecord> records;
  for (int i = 0; i < 200; ++i) {
    InteractionRecord r;
    r.learner_id = std::to_string(rng.below(5));
    r.timestamp_ms = static_cast<std::int64_t>(rng.below(1ULL << 42));
    r.question_id = "q" + std::to_string(rng.below(10000));
    if (rng.bernoulli(0.8)) r.bundle_id = "b" + std::to_string(rng.below(3000));
    if (rng.bernoulli(0.9)) r.user_answer = static_cast<char>('a' + rng.below(4));
    r.elapsed_time_ms = static_cast<std::int64_t>(rng.below(300000));
    records.push_back(r);
  }
  std::stringstream buf;
  write_kt1(buf, records, true);
  const auto back = parse_kt1(buf, "none");
  CHECK(back.errors.empty());
  CHECK(back.records == records);

  std::vector<InteractionRecord> single(records.begin(), records.begin() + 20);
  for (auto& r : single) r.learner_id = "9";
  std::stringstream buf2;
  write_kt1(buf2, single, false);
  CHECK(parse_kt1(buf2, "9").records == single);
}

TEST_CASE("question bank parsing") {
  std::istringstream in(
      "question_id,bundle_id,explanation_id,correct_answer,part,tags,deployed_at\n"
      "q1,b1,e1,a,1,15;42,0\n"
      "q2,b2,e2,b,1,-1,0\n"
      "q3,b3,e3,c,1,,0\n");
  const auto bank = load_question_bank(in);
  REQUIRE(bank.size() == 3);
  CHECK(bank.at("q1").correct_answer == 'a');
  CHECK(bank.at("q1").kc_tags == std::vector<int>{15, 42});
  CHECK(bank.at("q2").kc_tags.empty());
  CHECK(bank.at("q3").kc_tags.empty());
}

TEST_CASE("conflicting duplicate answers are rejected") {
  std::istringstream in("question_id,correct_answer,tags\nq1,a,1\nq1,b,2\n");
  CHECK_THROWS_AS(load_question_bank(in), DataError);
}

TEST_CASE("question bank round trip") {
  QuestionBank bank;
  bank["q1"] = {'a', {1, 5}};
  bank["q2"] = {'d', {}};
  std::stringstream buf;
  write_question_bank(buf, bank);
  const auto back = load_question_bank(buf);
  REQUIRE(back.size() == 2);
  CHECK(back.at("q1").kc_tags == std::vector<int>{1, 5});
  CHECK(back.at("q2").correct_answer == 'd');
  CHECK(back.at("q2").kc_tags.empty());
}

TEST_CASE("labeling correctness and conservation") {
  QuestionBank bank;
  bank["q1"] = {'c', {3}};
  bank["q2"] = {'a', {}};
  std::vector<InteractionRecord> records(4);
  records[0] = {"1", 1, "q1", std::nullopt, 'c', 0};
  records[1] = {"1", 2, "q1", std::nullopt, 'a', 0};
  records[2] = {"1", 3, "q1", std::nullopt, std::nullopt, 0};
  records[3] = {"1", 4, "q9", std::nullopt, 'a', 0};
  const auto r = label_correctness(records, bank);
  REQUIRE(r.labeled.size() == 3);
  CHECK(r.labeled[0].correct);
  CHECK_FALSE(r.labeled[1].correct);
  CHECK_FALSE(r.labeled[2].correct);
  CHECK(r.labeled[0].kc_tags == std::vector<int>{3});
  CHECK(r.excluded == 1);
  CHECK(r.unknown_questions.at("q9") == 1);
  CHECK(r.labeled.size() + r.excluded == records.size());
}

TEST_CASE("labeled store round trip") {
  auto ds = testing::random_dataset(5, 6, 3, 10);
  auto flat = ds.flatten();
  flat[0].bundle_id = "b7";
  flat[1].user_answer.reset();
  std::stringstream buf;
  write_labeled(buf, flat);
  CHECK(read_labeled(buf) == flat);
}
