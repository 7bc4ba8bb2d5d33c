#include <gtest/gtest.h>

#include "lcot/common/json_io.hpp"
#include "lcot/eval/eval.hpp"
#include "lcot/gateway/replay_backend.hpp"
#include "support.hpp"

using namespace lcot;
using namespace lcot::eval;
using lcot::testing::add_mock;
using lcot::testing::script;
using lcot::testing::TempDir;

namespace {

const std::filesystem::path kFixtures = std::filesystem::path(LCOT_FIXTURE_DIR) / "eval";

plato::Article article(const std::string& keyword, const std::string& body, const std::string& discipline = "") {
    plato::Article a;
    a.keyword = keyword;
    a.language = "en";
    a.discipline = discipline;
    for (auto h : plato::kStandardSections) a.sections.push_back({std::string(h), ""});
    a.sections[1].body = body;
    return a;
}

gateway::Gateway judge(const std::string& kp_reply, const std::string& fact_reply) {
    gateway::Gateway gw;
    add_mock(gw, "judge", script({{"Role: knowledge-point-judge", kp_reply}, {"Role: fact-judge", fact_reply}}));
    return gw;
}

std::string claims(int n, int flagged) {
    std::string out;
    for (int i = 0; i < n; ++i)
        out += "CLAIM: Sentence " + std::to_string(i) + ". VERDICT: " + (i < flagged ? "incorrect" : "correct") + "\n";
    return out;
}

std::string sentences(int n) {
    std::string out;
    for (int i = 0; i < n; ++i) out += "Sentence " + std::to_string(i) + ". ";
    return out;
}

struct FrozenJudge {
    gateway::Gateway gw;
    std::vector<gateway::TranscriptEntry> transcript;

    explicit FrozenJudge(std::vector<gateway::TranscriptEntry> entries) : transcript(std::move(entries)) {
        gateway::BackendSpec spec{"judge", "replay", "replay://judge", "frozen-judge", 4, 60.0};
        gw.register_backend(std::make_unique<gateway::ReplayBackend>(spec, transcript));
    }
    FrozenJudge() : FrozenJudge(gateway::load_transcript(kFixtures / "judge_transcript.jsonl")) {}
};

} // namespace

TEST(KnowledgePoints, DuplicateCollapsed) {
    auto gw = judge("1. Newton's second law\n2. Momentum\n3) Energy\n4. Work\n5. Power\n6. Impulse\n7. momentum\n", "");
    EXPECT_EQ(count_knowledge_points(article("mechanics", "text"), gw, "judge"), 6u);
}

TEST(KnowledgePoints, EmptyArticleIsZero) {
    auto gw = judge("garbage", "garbage");
    EXPECT_EQ(count_knowledge_points(article("mechanics", ""), gw, "judge"), 0u);
    auto fc = count_factual_errors(article("mechanics", " \n "), gw, "judge");
    EXPECT_EQ(fc.claims, 0u);
    EXPECT_EQ(fc.errors, 0u);
}

TEST(KnowledgePoints, NoneIsZero) {
    auto gw = judge("NONE", "");
    EXPECT_EQ(count_knowledge_points(article("k", "text"), gw, "judge"), 0u);
}

TEST(KnowledgePoints, UnparseableCarriesRawText) {
    auto gw = judge("I cannot say.", "");
    try {
        count_knowledge_points(article("k", "text"), gw, "judge");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::parse);
        EXPECT_EQ(e.detail(), "I cannot say.");
    }
}

TEST(FactualErrors, TenClaimsTwoFlagged) {
    auto gw = judge("", claims(10, 2));
    auto fc = count_factual_errors(article("k", sentences(10)), gw, "judge");
    EXPECT_EQ(fc.claims, 10u);
    EXPECT_EQ(fc.errors, 2u);
}

TEST(FactualErrors, AllCorrect) {
    auto gw = judge("", claims(7, 0));
    auto fc = count_factual_errors(article("k", sentences(7)), gw, "judge");
    EXPECT_EQ(fc.claims, 7u);
    EXPECT_EQ(fc.errors, 0u);
}

TEST(FactualErrors, FlagOnAbsentClaimDiscarded) {
    auto gw = judge("", claims(4, 1) + "CLAIM: The sky is green. VERDICT: incorrect\n");
    AuditLog log;
    auto fc = count_factual_errors(article("k", sentences(4)), gw, "judge", &log);
    EXPECT_EQ(fc.claims, 4u);
    EXPECT_EQ(fc.errors, 1u);
    ASSERT_EQ(log.size(), 1u);
    EXPECT_NE(log[0].message.find("sky is green"), std::string::npos);
}

TEST(FactualErrors, MissingVerdictRejected) {
    auto gw = judge("", "CLAIM: Sentence 0.\n");
    EXPECT_THROW(count_factual_errors(article("k", sentences(1)), gw, "judge"), Error);
    auto gw2 = judge("", "Looks fine to me.");
    EXPECT_THROW(count_factual_errors(article("k", sentences(1)), gw2, "judge"), Error);
}

TEST(FactualErrors, ExtraFlagAddsExactlyOne) {
    auto a = article("k", sentences(10));
    auto base = judge("1. a\n2. b\n", claims(10, 2));
    auto more = judge("1. a\n2. b\n", claims(10, 2) + "CLAIM: Sentence 9. VERDICT: incorrect\n");
    auto r0 = evaluate_article(a, Variant::plato, base, "judge");
    auto r1 = evaluate_article(a, Variant::plato, more, "judge");
    EXPECT_EQ(r1.errors, r0.errors + 1);
    EXPECT_GE(r1.knowledge_points, r0.knowledge_points);
}

TEST(Compare, IdenticalSetsGiveZeroReduction) {
    std::vector<plato::Article> set{article("a", sentences(10), "physics"), article("b", sentences(10), "biology")};
    auto gw = judge("1. x\n", claims(10, 3));
    auto r = compare(set, set, gw, "judge");
    ASSERT_EQ(r.rows.size(), 2u);
    for (const auto& row : r.rows) EXPECT_DOUBLE_EQ(*row.reduction_ratio(), 0.0);
}

TEST(Compare, ZeroBaselineRateIsNull) {
    std::vector<plato::Article> set{article("a", sentences(5), "physics")};
    auto gw = judge("1. x\n", claims(5, 0));
    auto r = compare(set, set, gw, "judge");
    EXPECT_FALSE(r.overall.reduction_ratio().has_value());
    EXPECT_TRUE(nlohmann::json(r)["overall"]["reduction_ratio"].is_null());
    EXPECT_NE(r.to_csv().find("physics,1,1.0000,1.0000,0.0000,0.0000,,"), std::string::npos);
}

TEST(Compare, UnpairedExcludedWithAudit) {
    std::vector<plato::Article> p{article("a", sentences(5), "physics"), article("only grounded", sentences(5))};
    std::vector<plato::Article> b{article("A", sentences(5)), article("only baseline", sentences(5))};
    auto gw = judge("1. x\n", claims(5, 1));
    AuditLog log;
    auto r = compare(p, b, gw, "judge", &log);
    EXPECT_EQ(r.overall.pairs, 1u);
    ASSERT_EQ(r.reports.size(), 2u);
    EXPECT_EQ(r.reports[0].variant, Variant::plato);
    EXPECT_EQ(r.reports[1].variant, Variant::baseline);
    EXPECT_EQ(r.reports[0].discipline, r.reports[1].discipline);
    EXPECT_EQ(log.size(), 2u);
}

TEST(Compare, NoPairsRejected) {
    auto gw = judge("1. x\n", claims(1, 0));
    EXPECT_THROW(compare({article("a", "x")}, {article("b", "x")}, gw, "judge"), Error);
    EXPECT_THROW(compare({}, {article("b", "x")}, gw, "judge"), Error);
}

TEST(Fixture, ReductionRatioHalf) {
    FrozenJudge j;
    AuditLog log;
    auto r = compare(load_articles(kFixtures / "plato"), load_articles(kFixtures / "baseline"), j.gw, "judge", &log);
    // Fixture calibrated to a baseline error rate of 0.20 against 0.10 grounded.
    const double expected = (0.20 - 0.10) / 0.20;
    ASSERT_TRUE(r.overall.reduction_ratio());
    EXPECT_NEAR(*r.overall.reduction_ratio(), expected, 0.001);
    EXPECT_NEAR(r.overall.baseline_error_rate, 0.20, 1e-12);
    EXPECT_NEAR(r.overall.plato_error_rate, 0.10, 1e-12);
    EXPECT_EQ(r.rows.size(), 6u);
    for (const auto& row : r.rows) {
        EXPECT_GT(row.plato_knowledge_points, row.baseline_knowledge_points) << row.discipline;
        EXPECT_NEAR(*row.reduction_ratio(), expected, 0.001) << row.discipline;
    }
    EXPECT_EQ(log.size(), 2u);  // unpaired keyword, stray flag
}

TEST(Fixture, CsvMatchesFrozenOutput) {
    FrozenJudge j;
    auto r = compare(load_articles(kFixtures / "plato"), load_articles(kFixtures / "baseline"), j.gw, "judge");
    EXPECT_EQ(r.to_csv(), read_file(kFixtures / "expected.csv"));
    EXPECT_EQ(r.judge_model, "frozen-judge");
}

TEST(Fixture, ReplayMatchesLiveJudge) {
    // Serve the same transcript through a live scripted backend keyed on the
    // full prompt; results must not depend on which judge answers.
    FrozenJudge frozen;
    gateway::Gateway live;
    std::vector<gateway::MockRule> rules;
    for (const auto& e : frozen.transcript) rules.push_back({e.user_prompt, e.response});
    add_mock(live, "judge", script(rules, "unexpected"));
    auto p = load_articles(kFixtures / "plato");
    auto b = load_articles(kFixtures / "baseline");
    auto a = compare(p, b, frozen.gw, "judge");
    auto c = compare(p, b, live, "judge");
    EXPECT_EQ(a.to_csv(), c.to_csv());
    for (std::size_t i = 0; i < a.reports.size(); ++i) {
        EXPECT_EQ(a.reports[i].knowledge_points, c.reports[i].knowledge_points);
        EXPECT_EQ(a.reports[i].errors, c.reports[i].errors);
    }
}

TEST(Fixture, EmptyDirectoryRejected) {
    TempDir dir;
    EXPECT_THROW(load_articles(dir.path()), Error);
    EXPECT_THROW(load_articles(dir / "missing"), Error);
}

TEST(EvalReport, JsonRoundTrip) {
    EvalReport r{"k", Variant::baseline, "physics", 5, 10, 2, 300, "j"};
    nlohmann::json j = r;
    EXPECT_DOUBLE_EQ(j["error_rate"].get<double>(), 0.2);
    auto back = j.get<EvalReport>();
    EXPECT_EQ(nlohmann::json(back), j);
    j["errors"] = 11;
    EXPECT_THROW(j.get<EvalReport>(), Error);
}
