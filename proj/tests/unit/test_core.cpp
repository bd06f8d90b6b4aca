#include "doctest.h"

#include "cjscore/core.hpp"
#include "cjscore/error.hpp"

using namespace cjscore;

TEST_CASE("score parse and print") {
  CHECK(Score::parse("3").centi() == 300);
  CHECK(Score::parse("2.5").centi() == 250);
  CHECK(Score::parse("2.33").centi() == 233);
  CHECK(Score::parse("-1").centi() == -100);
  CHECK(Score::parse("2.335").centi() == 234);
  CHECK(Score::parse(" 1.0 ").centi() == 100);
  CHECK_THROWS_AS(Score::parse("two"), InvalidArgument);
  CHECK_THROWS_AS(Score::parse(""), InvalidArgument);
  CHECK(Score::from_int(2).str() == "2");
  CHECK(Score::from_centi(250).str() == "2.5");
  CHECK(Score::from_centi(233).str() == "2.33");
  CHECK(Score::from_centi(-50).str() == "-0.5");
  CHECK(Score::from_double(2.345).centi() == 235);
  CHECK(Score::from_double(0.1 + 0.2).centi() == 30);
}

TEST_CASE("rater mean rounds half away from zero") {
  CHECK(mean_of(Score::from_int(1), Score::from_int(2)).str() == "1.5");
  CHECK(mean_of(Score::from_centi(233), Score::from_centi(234)).centi() == 234);
  CHECK(mean_of(Score::from_centi(-233), Score::from_centi(-234)).centi() == -234);
}

TEST_CASE("scale construction") {
  CHECK(ScoreScale::coarse_for_set(7).bracketed() == "[0, 1, 2, 3]");
  CHECK(ScoreScale::coarse_for_set(8).bracketed() == "[1, 2, 3, 4, 5, 6]");
  CHECK_THROWS_AS(ScoreScale::coarse_for_set(3), InvalidArgument);
  CHECK_THROWS_AS(ScoreScale({Score::from_int(1), Score::from_int(1)}, ScaleKind::coarse), InvalidArgument);
  CHECK_THROWS_AS(ScoreScale({}, ScaleKind::coarse), InvalidArgument);
  const auto s = ScoreScale::parse("0, 0.5,1", ScaleKind::fine);
  CHECK(s.size() == 3);
  CHECK(s.index_of(Score::from_centi(50)) == 1u);
  CHECK_FALSE(s.index_of(Score::from_centi(75)).has_value());
  CHECK(ScoreScale({Score::from_int(2)}, ScaleKind::fine).size() == 1);
}

TEST_CASE("nearest scale value ties go low") {
  const auto coarse = ScoreScale::integer_range(0, 3);
  CHECK(nearest_scale_value(Score::from_centi(141), coarse) == Score::from_int(1));
  CHECK(nearest_scale_value(Score::from_centi(150), coarse) == Score::from_int(1));
  CHECK(nearest_scale_value(Score::from_centi(151), coarse) == Score::from_int(2));
  CHECK(nearest_scale_value(Score::from_centi(-40), coarse) == Score::from_int(0));
  CHECK(nearest_scale_value(9.0, coarse) == Score::from_int(3));
  CHECK(nearest_scale_value(0.5 * 3, coarse) == Score::from_int(1));
  // 0.1 * 15 is 1.5000000000000002 in binary; still a tie
  CHECK(nearest_scale_value(0.1 * 15, coarse) == Score::from_int(1));
  const auto fine = ScoreScale::parse("2,2.3,2.5", ScaleKind::fine);
  CHECK(nearest_scale_value(2.4, fine) == Score::from_centi(230));
  CHECK(nearest_scale_value(2.41, fine) == Score::from_centi(250));
}

TEST_CASE("fine scale from rater means") {
  std::vector<Essay> essays(4);
  essays[0].rater_scores["t"] = {Score::from_int(0), Score::from_int(1)};
  essays[1].rater_scores["t"] = {Score::from_int(2), Score::from_int(2)};
  essays[2].rater_scores["t"] = {Score::from_int(1), Score::from_int(0)};
  essays[3].rater_scores["u"] = {Score::from_int(3), Score::from_int(3)};
  const auto fine = build_fine_scale(essays, "t");
  CHECK(fine.bracketed() == "[0.5, 2]");
  CHECK(fine.kind() == ScaleKind::fine);
  std::vector<Essay> one(1);
  one[0].rater_scores["t"] = {Score::from_int(2), Score::from_int(2)};
  CHECK(build_fine_scale(one, "t").bracketed() == "[2]");
}

TEST_CASE("essay ids sort naturally") {
  CHECK(essay_id_less("9", "10"));
  CHECK_FALSE(essay_id_less("10", "9"));
  CHECK(essay_id_less("10", "a"));
  CHECK(essay_id_less("a2", "a10") == false);
  CHECK(essay_id_less("007", "8"));
}

TEST_CASE("rubric text") {
  RubricTrait r;
  r.trait_id = "trait1";
  r.criteria_name = "Ideas";
  r.scale = ScoreScale::integer_range(0, 1);
  r.descriptors[Score::from_int(0)] = "weak";
  CHECK_THROWS_AS(r.validate(), InvalidArgument);
  r.descriptors[Score::from_int(1)] = "strong";
  r.validate();
  CHECK(r.descriptor_text() == "Score 1: strong\nScore 0: weak");
  CHECK(r.criteria_text() == r.descriptor_text());
  r.elaborated = "custom";
  CHECK(r.criteria_text() == "custom");
  CHECK(to_string(parse_rubric_type("ESE")) == "ESE");
  CHECK_THROWS_AS(parse_rubric_type("X"), InvalidArgument);
}

TEST_CASE("trait label is the rater mean") {
  Essay e;
  e.essay_id = "5";
  e.rater_scores["trait1"] = {Score::from_int(2), Score::from_int(3)};
  auto l = trait_label(e, "trait1");
  REQUIRE(l);
  CHECK(l->label.str() == "2.5");
  CHECK_FALSE(trait_label(e, "trait2").has_value());
}
