#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "lcot/consensus/consensus.hpp"
#include "lcot/consensus/expression.hpp"
#include "support.hpp"

using namespace lcot;
using namespace lcot::consensus;
using lcot::testing::add_mock;
using lcot::testing::script;

namespace {

socrates::PromptSpec numeric_prompt(const std::string& id = "p1") {
    socrates::PromptSpec p;
    p.prompt_id = id;
    p.thumbnail_id = "t";
    p.topic_id = "topic";
    p.text = "What is g near the surface of the Earth in m/s^2?";
    p.answer_type = AnswerKind::numeric;
    return p;
}

LCoTTrace trace(const std::string& backend, FinalAnswer answer, const std::string& prompt_id = "p1") {
    LCoTTrace t;
    t.trace_id = prompt_id + "#" + backend;
    t.prompt_id = prompt_id;
    t.backend_id = backend;
    t.chain_text = "work";
    t.answer = std::move(answer);
    return t;
}

// Splits on a separator at parenthesis depth zero.
std::vector<std::string> split_top(const std::string& s, char sep) {
    std::vector<std::string> out(1);
    int depth = 0;
    for (char c : s) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == sep && depth == 0) out.emplace_back();
        else out.back() += c;
    }
    return out;
}

// Test-side canonicalizer for flat products: strip blanks, sort the top-level
// factors. Deliberately unrelated to the library's AST.
std::string oracle_product_form(std::string s) {
    std::erase_if(s, [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
    auto factors = split_top(s, '*');
    std::sort(factors.begin(), factors.end());
    std::string out;
    for (const auto& f : factors) out += (out.empty() ? "" : "*") + f;
    return out;
}

} // namespace

TEST(Extract, NumericMarker) {
    auto e = extract_answer("Energy is conserved, so...\nTherefore FINAL_ANSWER: 42", AnswerKind::numeric);
    EXPECT_EQ(std::get<NumericAnswer>(e.answer.value).value, 42.0);
    EXPECT_EQ(e.raw_span, "42");
}

TEST(Extract, NumericForms) {
    auto v = [](const char* s) {
        return std::get<NumericAnswer>(extract_answer(s, AnswerKind::numeric).answer.value);
    };
    EXPECT_DOUBLE_EQ(v("FINAL_ANSWER: -1.5e-3").value, -1.5e-3);
    EXPECT_DOUBLE_EQ(v("FINAL_ANSWER: +6.02E23").value, 6.02e23);
    EXPECT_DOUBLE_EQ(v("FINAL_ANSWER: $9.81$.").value, 9.81);
    auto withunit = v("FINAL_ANSWER: 9.8 M / s^2");
    EXPECT_EQ(withunit.unit, "m/s^2");
    EXPECT_THROW(extract_answer("FINAL_ANSWER: about nine", AnswerKind::numeric), Error);
}

TEST(Extract, LastMarkerWins) {
    auto e = extract_answer("FINAL_ANSWER: 1\nwait, recheck\nFINAL_ANSWER: 2\n", AnswerKind::numeric);
    EXPECT_EQ(std::get<NumericAnswer>(e.answer.value).value, 2.0);
}

TEST(Extract, MissingMarker) {
    try {
        extract_answer("The answer is 42.", AnswerKind::numeric);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::parse);
    }
}

TEST(Extract, MultipleChoice) {
    EXPECT_EQ(std::get<ChoiceAnswer>(extract_answer("FINAL_ANSWER: (C)", AnswerKind::multiple_choice).answer.value).choice,
              'C');
    EXPECT_EQ(std::get<ChoiceAnswer>(extract_answer("FINAL_ANSWER: option b", AnswerKind::multiple_choice).answer.value)
                  .choice,
              'B');
}

TEST(Extract, SymbolicNormalization) {
    auto e = extract_answer("so T = ...\nFINAL_ANSWER: 2 * pi * sqrt(L / g)", AnswerKind::symbolic);
    const auto& expr = std::get<SymbolicAnswer>(e.answer.value).expression;
    EXPECT_EQ(expr, "2*pi*sqrt(L/g)");
    // Round trip: the normalized text re-extracts to itself, and commutative
    // reorderings agree under both the oracle and the library.
    auto again = extract_answer("FINAL_ANSWER: " + expr, AnswerKind::symbolic);
    EXPECT_EQ(std::get<SymbolicAnswer>(again.answer.value).expression, expr);
    std::string reordered = "sqrt(L/g) * 2 * pi";
    EXPECT_EQ(oracle_product_form(expr), oracle_product_form(reordered));
    EXPECT_EQ(canonical_form(*parse_expression(expr)), canonical_form(*parse_expression(reordered)));
    EXPECT_TRUE(answers_equivalent(e.answer, FinalAnswer::symbolic(strip_whitespace(reordered)), AnswerKind::symbolic));
}

TEST(Extract, CodeBlock) {
    auto e = extract_answer("reasoning\nFINAL_ANSWER:\n```python\nprint(1)\n```\n", AnswerKind::code);
    const auto& c = std::get<CodeAnswer>(e.answer.value);
    EXPECT_EQ(c.language, "python");
    EXPECT_EQ(c.source, "print(1)\n");
}

TEST(Equivalent, NumericTolerance) {
    EXPECT_TRUE(answers_equivalent(FinalAnswer::numeric(42), FinalAnswer::numeric(42.000001), AnswerKind::numeric));
    EXPECT_FALSE(answers_equivalent(FinalAnswer::numeric(3.14), FinalAnswer::numeric(2.71), AnswerKind::numeric));
    EXPECT_TRUE(answers_equivalent(FinalAnswer::numeric(0), FinalAnswer::numeric(5e-10), AnswerKind::numeric));
    EXPECT_FALSE(answers_equivalent(FinalAnswer::numeric(1), FinalAnswer::numeric(1.00001), AnswerKind::numeric));
    EXPECT_FALSE(answers_equivalent(FinalAnswer::numeric(9.8, "m/s^2"), FinalAnswer::numeric(9.8, "km/s^2"),
                                    AnswerKind::numeric));
}

TEST(Equivalent, KindMismatchThrows) {
    EXPECT_THROW(answers_equivalent(FinalAnswer::numeric(1), FinalAnswer::choice('A'), AnswerKind::numeric), Error);
    EXPECT_THROW(answers_equivalent(FinalAnswer::numeric(1), FinalAnswer::numeric(1), AnswerKind::symbolic), Error);
}

TEST(Equivalent, ChoiceCaseInsensitive) {
    EXPECT_TRUE(answers_equivalent(FinalAnswer::choice('c'), FinalAnswer::choice('C'), AnswerKind::multiple_choice));
    EXPECT_FALSE(answers_equivalent(FinalAnswer::choice('A'), FinalAnswer::choice('B'), AnswerKind::multiple_choice));
}

TEST(Equivalent, SymbolicBySampling) {
    auto a = FinalAnswer::symbolic("x*(x+1)");
    auto b = FinalAnswer::symbolic("x^2+x");
    // Oracle: evaluate both closed forms directly at 8 seeded points in [-2,2].
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int i = 0; i < 8; ++i) {
        double x = u(rng);
        double l = x * (x + 1), r = x * x + x;
        EXPECT_LE(std::fabs(l - r), std::max(1e-9, 1e-6 * std::max(std::fabs(l), std::fabs(r))));
    }
    EXPECT_TRUE(answers_equivalent(a, b, AnswerKind::symbolic));
    EXPECT_FALSE(answers_equivalent(a, FinalAnswer::symbolic("x^2-x"), AnswerKind::symbolic));
    EXPECT_TRUE(answers_equivalent(FinalAnswer::symbolic("sin(x)^2+cos(x)^2"), FinalAnswer::symbolic("1"),
                                   AnswerKind::symbolic));
    EXPECT_TRUE(answers_equivalent(FinalAnswer::symbolic("2 pi sqrt(L/g)"), FinalAnswer::symbolic("2*pi*(L/g)^0.5"),
                                   AnswerKind::symbolic));
    EXPECT_FALSE(answers_equivalent(FinalAnswer::symbolic("x"), FinalAnswer::symbolic("y"), AnswerKind::symbolic));
}

TEST(Equivalent, CodeUsesJudge) {
    struct PrintsOne : CodeJudge {
        bool passes(const CodeAnswer& c) const override { return c.source.find("1") != std::string::npos; }
    } judge;
    auto a = FinalAnswer::code("print(1)", "python");
    auto b = FinalAnswer::code("print(2-1)", "python");
    auto bad = FinalAnswer::code("print(0)", "python");
    EXPECT_TRUE(answers_equivalent(a, b, AnswerKind::code, &judge));
    EXPECT_FALSE(answers_equivalent(a, bad, AnswerKind::code, &judge));
    EXPECT_FALSE(answers_equivalent(a, b, AnswerKind::code));
    EXPECT_TRUE(answers_equivalent(a, a, AnswerKind::code));
}

TEST(Equivalent, ReflexiveAndSymmetric) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> mag(-30, 30);
    std::uniform_int_distribution<int> pick(0, 25);
    const char* exprs[] = {"x", "x^2+1", "sin(x)*y", "exp(-x)/2", "sqrt(x^2+y^2)", "log(x)", "1/(x-1)", "3"};
    const char* units[] = {"", "m", "j/mol"};
    for (int i = 0; i < 300; ++i) {
        FinalAnswer a, b;
        AnswerKind k;
        switch (i % 3) {
        case 0:
            k = AnswerKind::numeric;
            a = FinalAnswer::numeric(std::pow(10.0, mag(rng) / 3) * (pick(rng) % 2 ? 1 : -1), units[pick(rng) % 3]);
            b = FinalAnswer::numeric(std::get<NumericAnswer>(a.value).value * (1 + (pick(rng) - 12) * 1e-7),
                                     units[pick(rng) % 3]);
            break;
        case 1:
            k = AnswerKind::symbolic;
            a = FinalAnswer::symbolic(exprs[pick(rng) % 8]);
            b = FinalAnswer::symbolic(exprs[pick(rng) % 8]);
            break;
        default:
            k = AnswerKind::multiple_choice;
            a = FinalAnswer::choice(static_cast<char>('A' + pick(rng) % 5));
            b = FinalAnswer::choice(static_cast<char>('a' + pick(rng) % 5));
        }
        EXPECT_TRUE(answers_equivalent(a, a, k)) << a.text();
        EXPECT_EQ(answers_equivalent(a, b, k), answers_equivalent(b, a, k)) << a.text() << " vs " << b.text();
    }
}

TEST(Solve, TwoScriptedMocks) {
    gateway::Gateway gw;
    add_mock(gw, "alpha", script({{"Role: solver", "g is about...\nFINAL_ANSWER: 9.8"}}));
    add_mock(gw, "beta", script({{"Role: solver", "Using GM/R^2\nFINAL_ANSWER: 9.8"}}));
    SolveOptions opt;
    opt.clock = [] { return std::string("2026-01-01T00:00:00Z"); };
    auto res = solve(numeric_prompt(), {"alpha", "beta"}, gw, opt);
    ASSERT_EQ(res.traces.size(), 2u);
    EXPECT_EQ(res.traces[0].backend_id, "alpha");
    EXPECT_EQ(res.traces[1].created_at, "2026-01-01T00:00:00Z");
    EXPECT_NE(res.traces[0].trace_id, res.traces[1].trace_id);
    auto v = judge_consensus(numeric_prompt(), res.traces);
    EXPECT_EQ(v.status, VerdictStatus::verified);
}

TEST(Solve, TimeoutLeavesOneTrace) {
    gateway::Gateway gw;
    gw.set_sleeper([](auto) {});
    add_mock(gw, "alpha", script({}, "FINAL_ANSWER: 9.8"));
    add_mock(gw, "slow", script({{"", "", gateway::MockFailure::timeout}}));
    auto res = solve(numeric_prompt(), {"alpha", "slow"}, gw);
    ASSERT_EQ(res.traces.size(), 1u);
    EXPECT_FALSE(res.failures.empty());
    auto v = judge_consensus(numeric_prompt(), res.traces);
    EXPECT_EQ(v.status, VerdictStatus::unverifiable);
    EXPECT_FALSE(v.agreed_answer);
}

TEST(Solve, DistinctProvidersRequired) {
    gateway::Gateway gw;
    add_mock(gw, "a", script({}, "FINAL_ANSWER: 1"), "acme");
    add_mock(gw, "b", script({}, "FINAL_ANSWER: 1"), "acme");
    add_mock(gw, "c", script({}, "FINAL_ANSWER: 1"), "other");
    EXPECT_THROW(solve(numeric_prompt(), {"a", "b", "c"}, gw), Error);
    EXPECT_THROW(solve(numeric_prompt(), {"a"}, gw), Error);
}

TEST(Solve, UnparseableChainRetriedThenDropped) {
    gateway::Gateway gw;
    add_mock(gw, "a", script({}, "FINAL_ANSWER: 1"));
    add_mock(gw, "chatty", script({}, "I believe it is one."));
    SolveOptions opt;
    opt.per_backend_attempts = 2;
    auto res = solve(numeric_prompt(), {"a", "chatty"}, gw, opt);
    EXPECT_EQ(res.traces.size(), 1u);
    EXPECT_EQ(res.failures.size(), 2u);
}

TEST(Solve, AlternateProviderWhenEnabled) {
    gateway::Gateway gw;
    gw.set_sleeper([](auto) {});
    add_mock(gw, "a", script({}, "FINAL_ANSWER: 1"));
    add_mock(gw, "down", script({{"", "", gateway::MockFailure::transport}}));
    add_mock(gw, "spare", script({}, "FINAL_ANSWER: 1.0000000001"));
    SolveOptions opt;
    opt.alternates = {"spare"};
    EXPECT_EQ(solve(numeric_prompt(), {"a", "down"}, gw, opt).traces.size(), 1u);
    opt.retry_with_alternate = true;
    auto res = solve(numeric_prompt(), {"a", "down"}, gw, opt);
    ASSERT_EQ(res.traces.size(), 2u);
    EXPECT_EQ(judge_consensus(numeric_prompt(), res.traces).status, VerdictStatus::verified);
}

TEST(Judge, VerifiedTakesSmallestBackendId) {
    auto v = judge_consensus(numeric_prompt(), {trace("zeta", FinalAnswer::numeric(9.8000001)),
                                                trace("alpha", FinalAnswer::numeric(9.8))});
    ASSERT_EQ(v.status, VerdictStatus::verified);
    EXPECT_EQ(std::get<NumericAnswer>(v.agreed_answer->value).value, 9.8);
    EXPECT_EQ(v.traces.size(), 2u);
}

TEST(Judge, Divergent) {
    auto v = judge_consensus(numeric_prompt(),
                             {trace("a", FinalAnswer::numeric(9.8)), trace("b", FinalAnswer::numeric(3.7))});
    EXPECT_EQ(v.status, VerdictStatus::divergent);
    EXPECT_FALSE(v.agreed_answer);
}

TEST(Judge, UnanimityNotMajority) {
    auto v = judge_consensus(numeric_prompt(), {trace("a", FinalAnswer::numeric(1)), trace("b", FinalAnswer::numeric(1)),
                                                trace("c", FinalAnswer::numeric(2))});
    EXPECT_EQ(v.status, VerdictStatus::divergent);
}

TEST(Judge, RejectsForeignTraces) {
    EXPECT_THROW(judge_consensus(numeric_prompt(), {trace("a", FinalAnswer::numeric(1), "other")}), Error);
}

TEST(Judge, AgreedAnswerMatchesEveryTrace) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> val(0, 2);
    for (int i = 0; i < 200; ++i) {
        std::vector<LCoTTrace> ts;
        int n = 2 + i % 3;
        for (int s = 0; s < n; ++s)
            ts.push_back(trace("b" + std::to_string(s), FinalAnswer::numeric(val(rng) * (1 + 1e-8 * s))));
        auto v = judge_consensus(numeric_prompt(), ts);
        if (v.status != VerdictStatus::verified) continue;
        for (const auto& t : ts) EXPECT_TRUE(answers_equivalent(*v.agreed_answer, t.answer, AnswerKind::numeric));
    }
}

TEST(Judge, VerdictJsonRoundTrip) {
    auto v = judge_consensus(numeric_prompt(), {trace("a", FinalAnswer::numeric(2, "m")), trace("b", FinalAnswer::numeric(2, "m"))});
    auto back = nlohmann::json(v).get<ConsensusVerdict>();
    EXPECT_EQ(back.status, VerdictStatus::verified);
    EXPECT_EQ(back.agreed_answer->text(), "2 m");
    auto j = nlohmann::json(v);
    j["agreed_answer"] = nullptr;
    EXPECT_THROW(j.get<ConsensusVerdict>(), Error);
}

// Brute force over the joint outcome space of two solvers: each is correct with
// probability p, otherwise picks one of k-1 decoys uniformly.
static double enumerate_filter_accuracy(double p, int k) {
    double agree_right = 0, agree_wrong = 0;
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            double pa = a == 0 ? p : (1 - p) / (k - 1);
            double pb = b == 0 ? p : (1 - p) / (k - 1);
            if (a != b) continue;
            (a == 0 ? agree_right : agree_wrong) += pa * pb;
        }
    return agree_right / (agree_right + agree_wrong);
}

TEST(Filter, ClosedFormMatchesEnumeration) {
    EXPECT_NEAR(consensus_filter_accuracy(0.7, 10), 0.98, 1e-12);
    for (double p : {0.2, 0.5, 0.7, 0.95})
        for (int k : {2, 4, 10})
            EXPECT_NEAR(consensus_filter_accuracy(p, k), enumerate_filter_accuracy(p, k), 1e-12);
}

TEST(Filter, MonteCarloMatchesClosedForm) {
    auto sim = simulate_consensus_filter(0.7, 10, 100000, 2024);
    EXPECT_NEAR(sim.verified_accuracy(), 0.98, 0.01);
    // Expected retention: p^2 + (1-p)^2/(k-1).
    EXPECT_NEAR(double(sim.verified) / 1e5, 0.49 + 0.01, 0.01);
}

TEST(Filter, Monotone) {
    for (double p : {0.3, 0.5, 0.7, 0.9})
        for (int k : {4, 10}) {
            if (p <= 1.0 / k) continue;
            auto sim = simulate_consensus_filter(p, k, 20000, 7);
            EXPECT_GE(sim.verified_accuracy(), p) << p << " " << k;
        }
}
