// Regenerates tests/fixtures/eval: paired articles, the frozen judge
// transcript, and the expected comparison table.
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "lcot/common/json_io.hpp"
#include "lcot/eval/eval.hpp"
#include "lcot/gateway/replay_backend.hpp"

using namespace lcot;

namespace {

struct Plan {
    std::size_t claims, errors, points;
    bool stray_flag = false;  // judge flags a sentence the article never states
};

std::string fact(const std::string& keyword, std::size_t i) {
    return "Fact " + std::to_string(i + 1) + " about " + keyword + " holds under the stated assumptions.";
}

plato::Article make_article(const std::string& keyword, const std::string& discipline, std::size_t claims,
                            bool grounded) {
    plato::Article a;
    a.keyword = keyword;
    a.language = "en";
    a.grounded = grounded;
    a.discipline = grounded ? discipline : "";
    a.model_name = "fixture-author";
    std::vector<std::string> bodies(4);
    for (std::size_t i = 0; i < claims; ++i) bodies[i % 4] += (bodies[i % 4].empty() ? "" : " ") + fact(keyword, i);
    for (std::size_t s = 0; s < 4; ++s) a.sections.push_back({std::string(plato::kStandardSections[s]), bodies[s]});
    return a;
}

std::string knowledge_reply(const std::string& keyword, std::size_t points) {
    std::string out;
    for (std::size_t i = 0; i < points; ++i) out += std::to_string(i + 1) + ". Concept " + std::to_string(i + 1) + " of " + keyword + "\n";
    // A repeated item in different case must not count twice.
    out += std::to_string(points + 1) + ". CONCEPT 1 OF " + keyword + "\n";
    return out;
}

std::string fact_reply(const std::string& keyword, const Plan& plan) {
    std::string out;
    for (std::size_t i = 0; i < plan.claims; ++i)
        out += "CLAIM: " + fact(keyword, i) + " VERDICT: " + (i < plan.errors ? "incorrect" : "correct") + "\n";
    if (plan.stray_flag) out += "CLAIM: " + keyword + " was first observed on the Moon. VERDICT: incorrect\n";
    return out;
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: gen_eval_fixtures OUT_DIR\n");
        return 2;
    }
    std::filesystem::path out = argv[1];
    std::filesystem::remove_all(out);
    std::filesystem::create_directories(out / "plato");
    std::filesystem::create_directories(out / "baseline");

    struct Topic {
        const char* discipline;
        const char* keyword;
    };
    const std::vector<Topic> topics = {
        {"mathematics", "fourier series"}, {"mathematics", "group theory"}, {"physics", "instanton"},
        {"physics", "transmon"},           {"chemistry", "catalysis"},      {"chemistry", "chirality"},
        {"biology", "osmosis"},            {"biology", "gene regulation"},  {"engineering", "feedback control"},
        {"engineering", "metal fatigue"},  {"computation", "hash table"},   {"computation", "dynamic programming"}};

    std::vector<gateway::TranscriptEntry> transcript;
    auto record = [&](const plato::Article& a, const Plan& plan) {
        transcript.push_back({eval::kJudgeSystem, eval::build_knowledge_prompt(a), knowledge_reply(a.keyword, plan.points)});
        transcript.push_back({eval::kJudgeSystem, eval::build_fact_prompt(a), fact_reply(a.keyword, plan)});
    };
    auto slug = [](std::string s) {
        for (auto& c : s)
            if (c == ' ') c = '_';
        return s + ".json";
    };

    // Every baseline article is wrong on 1 in 5 claims, every grounded one on 1 in 10.
    for (std::size_t i = 0; i < topics.size(); ++i) {
        bool even = i % 2 == 0;
        Plan grounded{even ? 20u : 10u, even ? 2u : 1u, 12 + i % 3, i == 0};
        Plan baseline{even ? 10u : 15u, even ? 2u : 3u, 6 + i % 2};
        auto p = make_article(topics[i].keyword, topics[i].discipline, grounded.claims, true);
        auto b = make_article(topics[i].keyword, topics[i].discipline, baseline.claims, false);
        record(p, grounded);
        record(b, baseline);
        write_file_atomic(out / "plato" / slug(p.keyword), nlohmann::json(p).dump(2) + "\n");
        write_file_atomic(out / "baseline" / slug(b.keyword), nlohmann::json(b).dump(2) + "\n");
    }
    // A grounded article without a baseline partner.
    auto lonely = make_article("entropy", "physics", 10, true);
    record(lonely, {10, 1, 8});
    write_file_atomic(out / "plato" / slug(lonely.keyword), nlohmann::json(lonely).dump(2) + "\n");

    gateway::save_transcript(out / "judge_transcript.jsonl", transcript);

    gateway::Gateway gw;
    gateway::BackendSpec spec{"judge", "replay", "replay://judge", "frozen-judge", 4, 60.0};
    gw.register_backend(std::make_unique<gateway::ReplayBackend>(spec, transcript));
    AuditLog log;
    auto report = eval::compare(eval::load_articles(out / "plato"), eval::load_articles(out / "baseline"), gw, "judge", &log);
    write_file_atomic(out / "expected.csv", report.to_csv());
    std::printf("%s", report.to_csv().c_str());
    for (const auto& e : log) std::printf("audit: %s %s %s\n", e.stage.c_str(), e.subject.c_str(), e.message.c_str());
    return 0;
}
