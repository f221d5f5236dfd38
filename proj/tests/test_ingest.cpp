#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "kvqa/error.hpp"
#include "kvqa/ingest.hpp"
#include "support.hpp"

using namespace kvqa;
using kvqa::testing::fixture_dir;
using kvqa::testing::spit;
using kvqa::testing::TempDir;

namespace {

std::vector<Example> numbered(std::size_t n) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    Example e;
    e.question.question_id = static_cast<std::int64_t>(100 + i);
    e.question.image_id = 1;
    e.question.question = "q" + std::to_string(i);
    e.annotation.question_id = e.question.question_id;
    e.annotation.answers = {{"a", 1}};
    out.push_back(e);
  }
  return out;
}

AnnotationRecord ann(std::int64_t qid, std::vector<std::string> answers) {
  AnnotationRecord a;
  a.question_id = qid;
  a.image_id = 1;
  std::int64_t id = 1;
  for (auto& s : answers) a.answers.push_back({s, id++});
  return a;
}

void expect_kind(ErrorKind kind, const std::function<void()>& fn) {
  try {
    fn();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
  }
}

}  // namespace

TEST_CASE("questions load with the capitalised Question key") {
  TempDir dir;
  spit(dir / "q.json",
       R"([{"image_id":81721,"Question":"How old do you have to be in Canada to do this?","question_id":817215}])");
  const auto qs = load_questions(dir / "q.json");
  REQUIRE(qs.size() == 1);
  CHECK(qs[0].image_id == 81721);
  CHECK(qs[0].question == "How old do you have to be in Canada to do this?");
  CHECK(qs[0].question_id == 817215);
}

TEST_CASE("empty question array loads as empty") {
  TempDir dir;
  spit(dir / "q.json", "[]");
  CHECK(load_questions(dir / "q.json").empty());
}

TEST_CASE("question schema violations") {
  TempDir dir;
  spit(dir / "missing.json", R"([{"image_id":1,"Question":"x"}])");
  expect_kind(ErrorKind::MalformedRecord, [&] { load_questions(dir / "missing.json"); });
  spit(dir / "dup.json",
       R"([{"image_id":1,"Question":"x","question_id":5},{"image_id":2,"Question":"y","question_id":5}])");
  expect_kind(ErrorKind::MalformedRecord, [&] { load_questions(dir / "dup.json"); });
  spit(dir / "blank.json", R"([{"image_id":1,"Question":"   ","question_id":5}])");
  expect_kind(ErrorKind::MalformedRecord, [&] { load_questions(dir / "blank.json"); });
  spit(dir / "broken.json", R"([{"image_id":1,)");
  expect_kind(ErrorKind::MalformedRecord, [&] { load_questions(dir / "broken.json"); });
  expect_kind(ErrorKind::IoFailure, [&] { load_questions(dir / "absent.json"); });
}

TEST_CASE("annotations are lowercased and trimmed") {
  TempDir dir;
  spit(dir / "a.json",
       R"([{"question_id":1000021,"answers":[{"answer":" Sweet ","answer_id":1}],"image_id":100002}])");
  const auto as = load_annotations(dir / "a.json");
  REQUIRE(as.size() == 1);
  REQUIRE(as[0].answers.size() == 1);
  CHECK(as[0].answers[0].answer == "sweet");
  CHECK(as[0].answers[0].answer_id == 1);
}

TEST_CASE("annotation with no answers is rejected") {
  TempDir dir;
  spit(dir / "a.json", R"([{"question_id":1,"answers":[],"image_id":1}])");
  expect_kind(ErrorKind::MalformedRecord, [&] { load_annotations(dir / "a.json"); });
}

TEST_CASE("annotations sharing an image are both kept") {
  TempDir dir;
  spit(dir / "a.json", R"([{"question_id":1,"answers":[{"answer":"x","answer_id":1}],"image_id":7},
                            {"question_id":2,"answers":[{"answer":"y","answer_id":1}],"image_id":7}])");
  CHECK(load_annotations(dir / "a.json").size() == 2);
}

TEST_CASE("question and annotation files round-trip") {
  TempDir dir;
  const auto qs = load_questions(fixture_dir() / "questions.json");
  const auto as = load_annotations(fixture_dir() / "annotations.json");
  save_questions(qs, dir / "q.json");
  save_annotations(as, dir / "a.json");
  CHECK(load_questions(dir / "q.json") == qs);
  CHECK(load_annotations(dir / "a.json") == as);
  // Saved questions keep the on-disk key spelling.
  CHECK(kvqa::testing::slurp(dir / "q.json").find("\"Question\"") != std::string::npos);
}

TEST_CASE("answer vocabulary ranking") {
  SUBCASE("ties broken lexicographically") {
    const auto v = build_answer_vocab({ann(1, {"b", "a"}), ann(2, {"a", "b", "c"})}, 2);
    CHECK(v.entries() == std::vector<std::string>{"a", "b"});
  }
  SUBCASE("vocabulary smaller than top_n") {
    const auto v = build_answer_vocab({ann(1, {"x", "x", "x"}), ann(2, {"x", "x"})}, 3);
    CHECK(v.entries() == std::vector<std::string>{"x"});
  }
  SUBCASE("counts are non-increasing and ties are ordered") {
    const auto as = load_annotations(fixture_dir() / "annotations.json");
    std::map<std::string, int> counts;
    for (const auto& a : as) {
      for (const auto& x : a.answers) ++counts[x.answer];
    }
    const auto v = build_answer_vocab(as, 1000);
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      const int c0 = counts.at(v.at(i));
      const int c1 = counts.at(v.at(i + 1));
      CHECK(c0 >= c1);
      if (c0 == c1) CHECK(v.at(i) < v.at(i + 1));
    }
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.index_of(v.at(i)) == i);
  }
  SUBCASE("mini fixture top 15") {
    CHECK(build_answer_vocab(load_annotations(fixture_dir() / "annotations.json"), 15).size() == 15);
  }
  SUBCASE("errors") {
    expect_kind(ErrorKind::EmptyDataset, [] { build_answer_vocab({}, 5); });
    expect_kind(ErrorKind::InvalidArgument, [] { build_answer_vocab({ann(1, {"a"})}, 0); });
  }
}

TEST_CASE("vocab file is one answer per line") {
  TempDir dir;
  const AnswerVocab v({"sweet", "cutting", "4"});
  save_vocab(v, dir / "vocab.txt");
  CHECK(kvqa::testing::slurp(dir / "vocab.txt") == "sweet\ncutting\n4\n");
  CHECK(load_vocab(dir / "vocab.txt") == v);
}

TEST_CASE("split sizes and determinism") {
  const auto records = numbered(10);
  const auto a = split_dataset(records, 0.8, 7);
  const auto b = split_dataset(records, 0.8, 7);
  CHECK(a.train.size() == 8);
  CHECK(a.validation.size() == 2);
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].question.question_id == b.train[i].question.question_id);
  }

  const auto one = split_dataset(numbered(1), 0.5, 7);
  CHECK(one.train.size() == 1);
  CHECK(one.validation.empty());
}

TEST_CASE("splits partition the records for any seed") {
  const auto records = numbered(23);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = split_dataset(records, 0.6, seed);
    std::set<std::int64_t> seen;
    for (const auto* side : {&s.train, &s.validation}) {
      for (const auto& e : *side) CHECK(seen.insert(e.question.question_id).second);
    }
    CHECK(seen.size() == records.size());
  }
}

TEST_CASE("split argument checks") {
  expect_kind(ErrorKind::EmptyDataset, [] { split_dataset({}, 0.5, 1); });
  expect_kind(ErrorKind::InvalidArgument, [] { split_dataset(numbered(3), 0.0, 1); });
  expect_kind(ErrorKind::InvalidArgument, [] { split_dataset(numbered(3), 1.0, 1); });
}

TEST_CASE("join pairs questions with annotations") {
  const auto qs = load_questions(fixture_dir() / "questions.json");
  const auto as = load_annotations(fixture_dir() / "annotations.json");
  const auto joined = join_records(qs, as);
  REQUIRE(joined.size() == qs.size());
  for (const auto& e : joined) CHECK(e.question.question_id == e.annotation.question_id);
  expect_kind(ErrorKind::MalformedRecord, [&] { join_records(qs, {}); });
}

TEST_CASE("training target is the most given in-vocab answer") {
  const AnswerVocab v({"shading", "shade", "sunny"});
  CHECK(target_class(ann(1, {"shade", "shading", "shading"}), v) == 0u);
  CHECK(target_class(ann(1, {"shade", "shade", "shading"}), v) == 1u);
  CHECK(target_class(ann(1, {"sunny", "shade"}), v) == 1u);  // tie: lower index
  CHECK_FALSE(target_class(ann(1, {"rain"}), v).has_value());
}
