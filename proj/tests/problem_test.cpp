#include <gtest/gtest.h>

#include "pairgen/error.hpp"
#include "pairgen/problem.hpp"
#include "test_support.hpp"

using namespace pairgen;
using pairgen::testing::ScratchDir;
using pairgen::testing::spit;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::io_error;
}

}  // namespace

TEST(Problem, LoadsToyBenchmark) {
  Benchmark b = load_benchmark(pairgen::testing::fixture_path("toy.jsonl"));
  ASSERT_EQ(b.problems.size(), 3u);
  EXPECT_EQ(b.problems[0].id, "max-gap");
  EXPECT_EQ(b.problems[0].mode(), TestMode::stdio);
  EXPECT_EQ(b.problems[2].mode(), TestMode::assertion);
  EXPECT_EQ(b.problems[2].entry_point, "is_even");
  EXPECT_EQ(b.problems[2].private_tests.size(), 4u);
  EXPECT_EQ(b.problems[1].time_limit, kDefaultTimeLimit);
  EXPECT_EQ(b.problems[1].language_profile_id, "python3");
}

TEST(Problem, PolicyParsing) {
  EXPECT_EQ(PublicTestPolicy::parse("explicit").kind, PublicTestPolicy::Kind::explicit_tests);
  EXPECT_EQ(PublicTestPolicy::parse("first_private").kind, PublicTestPolicy::Kind::first_private);
  auto p = PublicTestPolicy::parse("first_n:3");
  EXPECT_EQ(p.kind, PublicTestPolicy::Kind::first_n_private);
  EXPECT_EQ(p.n, 3u);
  EXPECT_EQ(p.to_string(), "first_n:3");
  EXPECT_EQ(code_of([] { PublicTestPolicy::parse("first_n:"); }), Errc::config_error);
  EXPECT_EQ(code_of([] { PublicTestPolicy::parse("first_n:0"); }), Errc::config_error);
  EXPECT_EQ(code_of([] { PublicTestPolicy::parse("some"); }), Errc::config_error);
}

TEST(Problem, DerivesPublicTestsFromPrivate) {
  Problem p;
  p.id = "p";
  p.description = "d";
  for (int i = 0; i < 3; ++i) p.private_tests.push_back({std::to_string(i), std::to_string(i), TestMode::stdio});
  Problem one = derive_public_tests(p, PublicTestPolicy::parse("first_private"));
  ASSERT_EQ(one.public_tests.size(), 1u);
  EXPECT_EQ(one.public_tests[0].input, "0");
  Problem two = derive_public_tests(p, PublicTestPolicy::parse("first_n:2"));
  EXPECT_EQ(two.public_tests.size(), 2u);
  EXPECT_EQ(code_of([&] { derive_public_tests(p, PublicTestPolicy::parse("first_n:4")); }),
            Errc::insufficient_tests);
  Problem none = p;
  none.private_tests.clear();
  EXPECT_EQ(code_of([&] { derive_public_tests(none, PublicTestPolicy::parse("first_private")); }),
            Errc::insufficient_tests);
}

TEST(Problem, ExplicitPolicyNeedsPublicTests) {
  ScratchDir dir;
  spit(dir / "b.jsonl", R"({"id":"a","description":"x","private_tests":[{"input":"1","output":"1"}]})" "\n");
  EXPECT_EQ(code_of([&] { load_benchmark(dir / "b.jsonl"); }), Errc::invalid_problem);
  LoadOptions opts;
  opts.policy = PublicTestPolicy::parse("first_private");
  EXPECT_EQ(load_benchmark(dir / "b.jsonl", opts).problems[0].public_tests.size(), 1u);
}

TEST(Problem, LoadErrors) {
  ScratchDir dir;
  spit(dir / "empty.jsonl", "\n  \n");
  EXPECT_EQ(code_of([&] { load_benchmark(dir / "empty.jsonl"); }), Errc::non_empty_required);

  const std::string rec = R"({"id":"a","description":"x","public_tests":[{"input":"1","output":"1"}]})";
  spit(dir / "dup.jsonl", rec + "\n" + rec + "\n");
  EXPECT_EQ(code_of([&] { load_benchmark(dir / "dup.jsonl"); }), Errc::duplicate_id);

  spit(dir / "bad.jsonl", rec + "\n{not json\n");
  try {
    load_benchmark(dir / "bad.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::parse_error);
    EXPECT_NE(std::string(e.what()).find("bad.jsonl:2"), std::string::npos) << e.what();
  }

  EXPECT_EQ(code_of([&] { load_benchmark(dir / "missing.jsonl"); }), Errc::io_error);
}

TEST(Problem, ValidateRejectsBrokenProblems) {
  Problem p = pairgen::testing::stdio_problem("a", "desc", "1", "1");
  EXPECT_NO_THROW(validate(p));
  Problem no_desc = p;
  no_desc.description.clear();
  EXPECT_EQ(code_of([&] { validate(no_desc); }), Errc::invalid_problem);
  Problem no_expected = p;
  no_expected.public_tests[0].expected_output.reset();
  EXPECT_EQ(code_of([&] { validate(no_expected); }), Errc::invalid_problem);
  Problem bad_limit = p;
  bad_limit.time_limit = Seconds(0);
  EXPECT_EQ(code_of([&] { validate(bad_limit); }), Errc::invalid_problem);
}

TEST(Problem, RecordRoundTrip) {
  ScratchDir dir;
  Benchmark b = load_benchmark(pairgen::testing::fixture_path("toy.jsonl"));
  b.problems[1].time_limit = Seconds(1.5);
  save_benchmark(b, dir / "copy.jsonl");
  Benchmark again = load_benchmark(dir / "copy.jsonl");
  ASSERT_EQ(again.problems.size(), b.problems.size());
  for (std::size_t i = 0; i < b.problems.size(); ++i) EXPECT_EQ(again.problems[i], b.problems[i]);
  EXPECT_EQ(problem_record(parse_problem_record(problem_record(b.problems[2]))), problem_record(b.problems[2]));
}

TEST(Problem, DefaultTimeLimitAppliesOnlyWithoutRecordValue) {
  Problem p = parse_problem_record(R"({"id":"a","description":"x","time_limit_s":2})", Seconds(7));
  EXPECT_EQ(p.time_limit, Seconds(2));
  Problem q = parse_problem_record(R"({"id":"a","description":"x"})", Seconds(7));
  EXPECT_EQ(q.time_limit, Seconds(7));
}
