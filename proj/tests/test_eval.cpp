#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kvqa/error.hpp"
#include "kvqa/eval.hpp"
#include "support.hpp"

using namespace kvqa;
using kvqa::testing::fixture_dir;
using kvqa::testing::slurp;
using kvqa::testing::spit;
using kvqa::testing::TempDir;

namespace {

// root -> animal -> {dog, cat};  root -> food -> cake -> cheesecake
Taxonomy toy() {
  return Taxonomy::from_edges({{"animal", "root"},
                               {"dog", "animal"},
                               {"cat", "animal"},
                               {"food", "root"},
                               {"cake", "food"},
                               {"cheesecake", "cake"}});
}

AnnotationRecord truth(std::int64_t qid, std::vector<std::string> answers) {
  AnnotationRecord a;
  a.question_id = qid;
  for (auto& s : answers) a.answers.push_back({s, 0});
  return a;
}

}  // namespace

TEST_CASE("taxonomy depths and ancestors") {
  const auto t = toy();
  CHECK(t.root() == "root");
  CHECK(t.depth("root") == 1);
  CHECK(t.depth("dog") == 3);
  CHECK(t.depth("cheesecake") == 4);
  CHECK(t.lca("dog", "cat") == "animal");
  CHECK(t.lca("dog", "cheesecake") == "root");
  CHECK(t.lca("cake", "cheesecake") == "cake");
}

TEST_CASE("wup hand values") {
  const auto t = toy();
  CHECK(wup_similarity("dog", "dog", t) == 1.0);
  CHECK(wup_similarity("dog", "cat", t) == 2.0 / 3.0);
  CHECK(wup_similarity("dog", "zzxqy", t) == 0.0);
  CHECK(wup_similarity("zzxqy", "zzxqy", t) == 1.0);
  CHECK(wup_similarity("dog", "cheesecake", t) == doctest::Approx(2.0 / 7.0));
  CHECK(wup_similarity("cake", "cheesecake", t) == doctest::Approx(6.0 / 7.0));
}

TEST_CASE("wup is symmetric and monotone in ancestor depth") {
  const auto t = toy();
  const std::vector<std::string> nodes = {"root", "animal", "dog", "cat", "food", "cake", "cheesecake"};
  for (const auto& a : nodes) {
    for (const auto& b : nodes) {
      CHECK(wup_similarity(a, b, t) == wup_similarity(b, a, t));
      CHECK(wup_similarity(a, b, t) >= 0.0);
      CHECK(wup_similarity(a, b, t) <= 1.0);
    }
  }
  // Same node depths (3 and 3): deeper common ancestor scores higher.
  const auto t2 = Taxonomy::from_edges({{"a", "r"}, {"b", "r"}, {"x", "a"}, {"y", "a"}, {"z", "b"}});
  CHECK(wup_similarity("x", "y", t2) > wup_similarity("x", "z", t2));
}

TEST_CASE("wups thresholding") {
  const auto t = toy();
  CHECK(wups_score("dog", {"dog"}, t, 0.9) == 1.0);
  CHECK(wups_score("dog", {"cat"}, t, 0.9) == doctest::Approx(0.0667).epsilon(1e-3));
  CHECK(std::abs(wups_score("dog", {"cat"}, t, 0.9) - 0.0667) <= 1e-4);
  CHECK(wups_score("dog", {"cat"}, t, 0.0) == 2.0 / 3.0);
  CHECK(wups_score("dog", {}, t, 0.9) == 0.0);
  CHECK(wups_score("dog", {"cat", "cheesecake", "dog"}, t, 0.9) == 1.0);
  CHECK_THROWS_AS(wups_score("dog", {"cat"}, t, 1.5), Error);
}

TEST_CASE("evaluate aggregates per-question scores") {
  const auto t = toy();
  SUBCASE("perfect") {
    const auto r = evaluate({{1, "dog"}, {2, "cake"}}, {truth(1, {"dog"}), truth(2, {"cake", "food"})}, t, {0.9, 0.0});
    CHECK(r.exact_accuracy == 1.0);
    CHECK(r.wups_at_threshold == std::vector<double>{1.0, 1.0});
  }
  SUBCASE("disjoint") {
    const auto r = evaluate({{1, "qqq"}, {2, "www"}}, {truth(1, {"dog"}), truth(2, {"cake"})}, t, {0.9, 0.0});
    CHECK(r.exact_accuracy == 0.0);
    CHECK(r.wups_at_threshold == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("two of four") {
    const auto r = evaluate({{1, "dog"}, {2, "qqq"}, {3, "cake"}, {4, "www"}},
                            {truth(1, {"dog"}), truth(2, {"cat"}), truth(3, {"cake"}), truth(4, {"food"})}, t,
                            {0.0});
    CHECK(r.exact_accuracy == 0.5);
    CHECK(r.wups_at_threshold[0] == 0.5);
  }
  SUBCASE("mean of rows, unweighted") {
    const auto r = evaluate({{1, "dog"}, {2, "cat"}, {3, "cheesecake"}},
                            {truth(1, {"dog"}), truth(2, {"dog"}), truth(3, {"cake"})}, t, {0.9});
    double sum = 0.0;
    for (const auto& row : r.rows) sum += row.wups[0];
    CHECK(r.wups_at_threshold[0] == doctest::Approx(sum / 3.0).epsilon(1e-15));
  }
  SUBCASE("missing prediction") {
    try {
      evaluate({{1, "dog"}}, {truth(1, {"dog"}), truth(2, {"cat"})}, t, {0.9});
      FAIL("expected MissingPrediction");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::MissingPrediction);
    }
  }
}

TEST_CASE("malformed taxonomies") {
  CHECK_THROWS_AS(Taxonomy::from_edges({{"a", "r"}, {"a", "s"}}), Error);
  CHECK_THROWS_AS(Taxonomy::from_edges({{"a", "b"}, {"b", "a"}}), Error);
  CHECK_THROWS_AS(Taxonomy::from_edges({{"a", "a"}}), Error);
  CHECK_THROWS_AS(Taxonomy::from_edges({{"a", "r"}, {"b", "s"}}), Error);
  TempDir dir;
  spit(dir / "t.tsv", "dog animal\n");
  CHECK_THROWS_AS(Taxonomy::load(dir / "t.tsv"), Error);
}

TEST_CASE("fixture taxonomy covers the fixture answers") {
  const auto t = Taxonomy::load(fixture_dir() / "taxonomy.tsv");
  CHECK(t.root() == "entity");
  for (const auto& a : load_annotations(fixture_dir() / "annotations.json")) {
    for (const auto& x : a.answers) {
      CAPTURE(x.answer);
      CHECK(t.contains(x.answer));
    }
  }
  CHECK(wup_similarity("sweet", "sour", t) == doctest::Approx(2.0 * 4 / (5 + 5)));
}

TEST_CASE("report CSV") {
  TempDir dir;
  const auto r = evaluate({{7, "dog"}}, {truth(7, {"cat", "dog"})}, toy(), {0.9, 0.0}, "co_attention/train");
  write_report_csv(r, dir / "r.csv");
  CHECK(slurp(dir / "r.csv") == "question_id,prediction,ground_truths,exact,wups@0.9,wups@0\n7,dog,cat|dog,1,1,1\n");
}
