#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "pairgen/error.hpp"
#include "pairgen/gateway.hpp"
#include "pairgen/scripted_backend.hpp"
#include "test_support.hpp"

using namespace pairgen;
using pairgen::testing::LambdaBackend;

namespace {

ChatRequest request(Step tag, std::string user) {
  ChatRequest r;
  r.tag = tag;
  r.messages = {{Role::system, "sys"}, {Role::user, std::move(user)}};
  return r;
}

std::unique_ptr<Gateway> quiet_gateway(std::shared_ptr<ChatBackend> backend, int attempts = 3,
                                       std::vector<std::chrono::milliseconds>* sleeps = nullptr) {
  auto g = std::make_unique<Gateway>(std::move(backend), RetryPolicy{attempts, std::chrono::milliseconds(10)});
  g->set_sleeper([sleeps](std::chrono::milliseconds d) {
    if (sleeps) sleeps->push_back(d);
  });
  return g;
}

}  // namespace

TEST(Gateway, WhitespaceTokenCount) {
  EXPECT_EQ(whitespace_token_count(""), 0);
  EXPECT_EQ(whitespace_token_count("  a  bb\tc\n"), 3);
}

TEST(Gateway, StepNamesRoundTrip) {
  for (Step s : {Step::reflect, Step::plan, Step::select, Step::analyze, Step::code, Step::repair, Step::embed}) {
    EXPECT_EQ(step_from_string(to_string(s)), s);
  }
  EXPECT_THROW(step_from_string("nope"), Error);
}

TEST(Gateway, ChargesCallsAndTokensPerTag) {
  auto backend = std::make_shared<LambdaBackend>();
  backend->on_chat = [](const ChatRequest&) { return ChatResponse{"ok", 7, 2}; };
  auto parent = std::make_shared<CostLedger>();
  Gateway g(backend, {}, parent);
  g.complete(request(Step::reflect, "a"));
  g.complete(request(Step::code, "b"));
  g.complete(request(Step::code, "c"));
  LedgerSnapshot s = g.ledger().snapshot();
  EXPECT_EQ(s.api_calls, 3);
  EXPECT_EQ(s.input_tokens, 21);
  EXPECT_EQ(s.output_tokens, 6);
  EXPECT_EQ(s.calls_for(Step::code), 2);
  EXPECT_EQ(s.calls_for(Step::reflect), 1);
  EXPECT_EQ(s.calls_for(Step::repair), 0);
  EXPECT_EQ(parent->snapshot(), s);
}

TEST(Gateway, SnapshotDifferenceDropsUntouchedTags) {
  CostLedger ledger;
  ledger.record(Step::plan, 1, 5, 5);
  LedgerSnapshot before = ledger.snapshot();
  ledger.record(Step::code, 1, 3, 4);
  LedgerSnapshot d = ledger.snapshot() - before;
  EXPECT_EQ(d.api_calls, 1);
  EXPECT_EQ(d.input_tokens, 3);
  EXPECT_EQ(d.per_tag.size(), 1u);
  EXPECT_EQ(d.per_tag.count("code"), 1u);
}

TEST(Gateway, RetriesTransientFailuresWithDoublingBackoff) {
  auto backend = std::make_shared<LambdaBackend>();
  int calls = 0;
  backend->on_chat = [&](const ChatRequest&) {
    if (++calls < 3) throw TransientBackendError("503");
    return ChatResponse{"fine", 1, 1};
  };
  std::vector<std::chrono::milliseconds> sleeps;
  auto g = quiet_gateway(backend, 3, &sleeps);
  EXPECT_EQ(g->complete(request(Step::plan, "x")).text, "fine");
  EXPECT_EQ(calls, 3);
  ASSERT_EQ(sleeps.size(), 2u);
  EXPECT_EQ(sleeps[0].count(), 10);
  EXPECT_EQ(sleeps[1].count(), 20);
  EXPECT_EQ(g->ledger().snapshot().api_calls, 3);
  EXPECT_EQ(g->ledger().snapshot().input_tokens, 1);
}

TEST(Gateway, GivesUpAfterMaxAttempts) {
  auto backend = std::make_shared<LambdaBackend>();
  backend->on_chat = [](const ChatRequest&) -> ChatResponse { throw TransientBackendError("timeout"); };
  auto g = quiet_gateway(backend, 2);
  try {
    g->complete(request(Step::analyze, "x"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::backend_unavailable);
  }
  EXPECT_EQ(g->ledger().snapshot().api_calls, 2);
}

TEST(Gateway, NonTransientErrorsAreNotRetried) {
  auto backend = std::make_shared<LambdaBackend>();
  int calls = 0;
  backend->on_chat = [&](const ChatRequest&) -> ChatResponse {
    ++calls;
    throw Error(Errc::backend_unavailable, "401");
  };
  auto g = quiet_gateway(backend);
  EXPECT_THROW(g->complete(request(Step::code, "x")), Error);
  EXPECT_EQ(calls, 1);
}

TEST(Gateway, RejectsEmptyRequests) {
  auto g = quiet_gateway(std::make_shared<LambdaBackend>());
  ChatRequest empty;
  EXPECT_THROW(g->complete(empty), Error);
  std::vector<std::string> none;
  EXPECT_THROW(g->embed(none), Error);
}

TEST(Gateway, EmbedValidatesShape) {
  auto backend = std::make_shared<LambdaBackend>();
  std::vector<EmbeddingVector> reply;
  backend->on_embed = [&](std::span<const std::string>) { return EmbedResponse{reply, 4}; };
  auto g = quiet_gateway(backend);
  std::vector<std::string> texts{"a", "b"};

  reply = {{1, 2}, {3, 4}};
  EXPECT_EQ(g->embed(texts).size(), 2u);
  EXPECT_EQ(g->ledger().snapshot().calls_for(Step::embed), 1);

  reply = {{1, 2}};
  EXPECT_THROW(g->embed(texts), Error);
  reply = {{1, 2}, {3}};
  try {
    g->embed(texts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dimension_mismatch);
  }
  reply = {{1, std::numeric_limits<double>::quiet_NaN()}, {3, 4}};
  EXPECT_THROW(g->embed(texts), Error);
}

TEST(ScriptedBackend, ParsesArrayObjectAndJsonl) {
  const char* entry = R"({"tag":"code","text":"x"})";
  EXPECT_EQ(Fixture::parse(std::string("[") + entry + "," + entry + "]").entries.size(), 2u);
  EXPECT_EQ(Fixture::parse(std::string(R"({"entries":[)") + entry + "]}").entries.size(), 1u);
  EXPECT_EQ(Fixture::parse(std::string(entry) + "\n\n" + entry + "\n").entries.size(), 2u);
  EXPECT_THROW(Fixture::parse(R"([{"tag":"bogus","text":"x"}])"), Error);
  EXPECT_THROW(Fixture::parse(R"([{"tag":"embed","match":"a"}])"), Error);
  EXPECT_THROW(Fixture::parse("{oops\n"), Error);
}

TEST(ScriptedBackend, KeyedEntriesWinAndAreConsumed) {
  auto fx = std::make_shared<const Fixture>(Fixture::parse(R"([
    {"tag":"code","text":"generic-1"},
    {"tag":"code","match":"alpha","text":"alpha-reply"},
    {"tag":"code","text":"generic-2"},
    {"tag":"plan","text":"plan-reply","repeat":true}
  ])"));
  ScriptedBackend b(fx);
  EXPECT_EQ(b.chat(request(Step::code, "alpha problem")).text, "alpha-reply");
  EXPECT_EQ(b.chat(request(Step::code, "alpha problem")).text, "generic-1");
  EXPECT_EQ(b.chat(request(Step::code, "beta")).text, "generic-2");
  try {
    b.chat(request(Step::code, "beta"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::fixture_miss);
  }
  for (int i = 0; i < 5; ++i) EXPECT_EQ(b.chat(request(Step::plan, "p")).text, "plan-reply");

  ScriptedBackend fresh(fx);
  EXPECT_EQ(fresh.chat(request(Step::code, "alpha")).text, "alpha-reply");
}

TEST(ScriptedBackend, TokenCounts) {
  auto fx = std::make_shared<const Fixture>(Fixture::parse(R"([
    {"tag":"reflect","text":"one two three"},
    {"tag":"reflect","text":"x","input_tokens":100,"output_tokens":50}
  ])"));
  ScriptedBackend b(fx);
  ChatRequest r = request(Step::reflect, "four five six seven");
  ChatResponse first = b.chat(r);
  EXPECT_EQ(first.input_tokens, whitespace_token_count(r.rendered()));
  EXPECT_EQ(first.output_tokens, 3);
  ChatResponse second = b.chat(r);
  EXPECT_EQ(second.input_tokens, 100);
  EXPECT_EQ(second.output_tokens, 50);
}

TEST(ScriptedBackend, KeyedEmbeddingsAreReusable) {
  auto fx = std::make_shared<const Fixture>(Fixture::parse(R"([
    {"tag":"embed","match":"fast","embedding":[1,0]},
    {"tag":"embed","match":"slow","embedding":[0,1]}
  ])"));
  ScriptedBackend b(fx);
  std::vector<std::string> texts{"slow scan", "fast path", "fast again"};
  EmbedResponse r = b.embed(texts);
  ASSERT_EQ(r.vectors.size(), 3u);
  EXPECT_EQ(r.vectors[0], (EmbeddingVector{0, 1}));
  EXPECT_EQ(r.vectors[2], (EmbeddingVector{1, 0}));
  std::vector<std::string> unknown{"other"};
  EXPECT_THROW(b.embed(unknown), Error);
}
