#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "lcot/brainstorm/search.hpp"
#include "lcot/common/json_io.hpp"
#include "support.hpp"

using namespace lcot;
using namespace lcot::brainstorm;
using lcot::testing::add_mock;
using lcot::testing::script;
using lcot::testing::TempDir;

namespace {

store::VerifiedQA doc(const std::string& id, const std::string& question, const std::string& chain,
                      const std::string& course = "c1", Category cat = Category::reductionist) {
    store::VerifiedQA q;
    q.qa_id = id;
    q.question = question;
    q.chain_text = chain;
    q.course_id = course;
    q.category = cat;
    q.answer = consensus::FinalAnswer::numeric(1);
    return q;
}

// Test-side tokenizer for ASCII corpora: lower-cased runs of letters.
std::vector<std::string> ascii_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isalpha(static_cast<unsigned char>(c))) cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        else if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

struct OracleHit {
    std::string qa_id;
    double relevance, score;
};

// Exhaustive scorer: scans every document, counts terms directly, and applies
// weighted BM25 (k1 = 1.2, b = 0.75) in query-term order.
std::vector<OracleHit> brute_force(std::vector<store::VerifiedQA> docs, const ExpandedQuery& q, std::size_t k) {
    std::sort(docs.begin(), docs.end(), [](auto& a, auto& b) { return a.qa_id < b.qa_id; });
    const double k1 = 1.2, b = 0.75;
    std::vector<std::map<std::string, int>> tf(docs.size());
    std::vector<double> len(docs.size());
    double total = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        auto toks = ascii_tokens(docs[i].question);
        auto more = ascii_tokens(docs[i].chain_text);
        toks.insert(toks.end(), more.begin(), more.end());
        for (auto& t : toks) ++tf[i][t];
        len[i] = double(toks.size());
        total += len[i];
    }
    double n = double(docs.size()), avgdl = total / n;
    std::map<std::string, double> df;
    for (const auto& term : q.terms)
        for (const auto& m : tf) df[term.term] += m.count(term.term) ? 1 : 0;
    std::vector<OracleHit> hits;
    double max_rel = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double s = 0;
        bool any = false;
        for (const auto& term : q.terms) {
            auto it = tf[i].find(term.term);
            if (it == tf[i].end()) continue;
            double idf = std::log(1.0 + (n - df[term.term] + 0.5) / (df[term.term] + 0.5));
            double f = it->second;
            s += term.weight * (idf * (f * (k1 + 1.0)) / (f + k1 * (1.0 - b + b * len[i] / avgdl)));
            any = true;
        }
        if (!any) continue;
        hits.push_back({docs[i].qa_id, s, 0});
        max_rel = std::max(max_rel, s);
    }
    for (auto& h : hits) h.score = 0.7 * (h.relevance / max_rel);
    std::stable_sort(hits.begin(), hits.end(), [](auto& a, auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.qa_id < b.qa_id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

std::vector<store::VerifiedQA> random_corpus(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::string> vocab;
    std::uniform_int_distribution<int> letter(0, 25), wlen(3, 9);
    for (int i = 0; i < 400; ++i) {
        std::string w;
        for (int l = wlen(rng); l > 0; --l) w += static_cast<char>('a' + letter(rng));
        vocab.push_back(w);
    }
    // Zipf-ish: low indices much more frequent.
    std::uniform_real_distribution<double> u(0, 1);
    auto word = [&] { return vocab[std::min<std::size_t>(vocab.size() - 1, std::size_t(std::pow(u(rng), 2.5) * vocab.size()))]; };
    std::uniform_int_distribution<int> qlen(5, 15), clen(15, 60), course(0, 9);
    std::vector<store::VerifiedQA> docs;
    for (std::size_t i = 0; i < n; ++i) {
        std::string question, chain;
        for (int j = qlen(rng); j > 0; --j) question += word() + (j % 7 == 0 ? ". " : " ");
        for (int j = clen(rng); j > 0; --j) chain += word() + (j % 5 == 0 ? ", " : " ");
        char id[17];
        std::snprintf(id, sizeof id, "%016llx", static_cast<unsigned long long>(rng()));
        docs.push_back(doc(id, question, chain, "course" + std::to_string(course(rng))));
    }
    return docs;
}

} // namespace

TEST(Index, PostingsForRareTerm) {
    std::vector<store::VerifiedQA> docs = {doc("a", "What is an instanton?", "Consider the tunneling amplitude."),
                                           doc("b", "Pendulum period", "Small angles."),
                                           doc("c", "Gauge fields", "The vacuum structure.")};
    auto idx = build_index(docs);
    ASSERT_TRUE(idx.postings.contains("instanton"));
    ASSERT_EQ(idx.postings.at("instanton").size(), 1u);
    EXPECT_EQ(idx.docs[idx.postings.at("instanton")[0].doc].qa_id, "a");
    EXPECT_EQ(idx.doc_count(), 3u);
}

TEST(Index, DocCountMatchesStore) {
    TempDir dir;
    auto cur = socrates::Curriculum::from_json(nlohmann::json::parse(
        R"({"courses": [{"course_id": "m", "title": "M", "discipline": "physics", "level": "graduate",
            "topics": [{"topic_id": "m.t", "title": "Quantum Tunneling"}]}]})"));
    auto kb = store::KnowledgeStore::create(dir / "kb", cur);
    std::vector<consensus::ConsensusVerdict> verdicts;
    std::vector<socrates::PromptSpec> prompts;
    std::vector<consensus::LCoTTrace> traces;
    for (int i = 0; i < 5; ++i) {
        socrates::PromptSpec p;
        p.prompt_id = "p" + std::to_string(i);
        p.topic_id = "m.t";
        p.text = "Estimate quantum tunneling rate number " + std::to_string(i);
        prompts.push_back(p);
        consensus::LCoTTrace t;
        t.trace_id = p.prompt_id + "#a";
        t.prompt_id = p.prompt_id;
        t.backend_id = "a";
        t.chain_text = "WKB gives the quantum tunneling exponent.";
        t.answer = consensus::FinalAnswer::numeric(i);
        traces.push_back(t);
        verdicts.push_back({p.prompt_id, consensus::VerdictStatus::verified, {t.trace_id}, t.answer});
    }
    kb.ingest(verdicts, prompts, traces);
    auto idx = build_index(kb);
    EXPECT_EQ(idx.doc_count(), kb.stats().total);
    // The topic title is a multiword keyword, so it is also indexed as a phrase.
    ASSERT_TRUE(idx.postings.contains("quantum tunneling"));
    EXPECT_EQ(idx.postings.at("quantum tunneling").size(), 5u);
    EXPECT_EQ(idx.postings.at("quantum tunneling")[0].tf, 2u);
}

TEST(Index, EmptyStoreRejected) {
    EXPECT_THROW(build_index(std::vector<store::VerifiedQA>{}), Error);
}

TEST(Index, RebuildIsDeterministic) {
    auto docs = random_corpus(300, 3);
    auto a = build_index(docs);
    std::reverse(docs.begin(), docs.end());
    IndexOptions opt;
    opt.workers = 1;
    auto b = build_index(docs, opt);
    EXPECT_EQ(serialize_postings(a), serialize_postings(b));
}

TEST(Index, SaveLoadRoundTrip) {
    TempDir dir;
    auto docs = random_corpus(200, 4);
    auto idx = build_index(docs);
    save_index(idx, dir / "idx");
    auto back = load_index(dir / "idx");
    EXPECT_EQ(serialize_postings(back), serialize_postings(idx));
    EXPECT_EQ(back.avg_doc_length, idx.avg_doc_length);
    EXPECT_EQ(back.docs[7].course_id, idx.docs[7].course_id);
    auto bin = read_file(dir / "idx" / "index.bin");
    bin[bin.size() / 2] ^= 1;
    write_file_atomic(dir / "idx" / "index.bin", bin);
    EXPECT_THROW(load_index(dir / "idx"), Error);
}

TEST(Search, TermFrequencyMonotone) {
    std::vector<store::VerifiedQA> docs = {
        doc("a", "soliton soliton soliton soliton soliton", "x x x x x"),
        doc("b", "soliton x x x x", "x x x x x"),
        doc("c", "unrelated words here now ok", "y y y y y")};
    auto hits = search(build_index(docs), expand_query("soliton"), 10);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].qa_id, "a");
    EXPECT_GT(hits[0].relevance, hits[1].relevance);
    EXPECT_DOUBLE_EQ(hits[0].norm, 1.0);
}

TEST(Search, KLargerThanMatches) {
    auto docs = random_corpus(50, 9);
    auto idx = build_index(docs);
    auto term = idx.postings.begin()->first;
    auto hits = search(idx, expand_query(term), 1000);
    EXPECT_EQ(hits.size(), idx.df(term));
}

TEST(Search, AbsentTermIsEmpty) {
    auto idx = build_index(random_corpus(20, 1));
    EXPECT_TRUE(search(idx, expand_query("zzzzqqqq"), 5).empty());
    EXPECT_THROW(search(idx, expand_query("x"), 0), Error);
}

TEST(Search, MatchesBruteForceOracle) {
    auto docs = random_corpus(10000, 2024);
    auto idx = build_index(docs);
    std::mt19937_64 rng(77);
    std::vector<std::string> vocab;
    for (const auto& [t, p] : idx.postings) vocab.push_back(t);
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    for (int trial = 0; trial < 12; ++trial) {
        ExpandedQuery q;
        q.target = vocab[pick(rng)];
        q.terms.push_back({q.target, 1.0});
        for (int extra = trial % 3; extra > 0; --extra) q.terms.push_back({vocab[pick(rng)], 0.5});
        std::size_t k = trial % 2 ? 10 : 50;
        auto got = search(idx, q, k);
        auto want = brute_force(docs, q, k);
        ASSERT_EQ(got.size(), want.size()) << q.target;
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].qa_id, want[i].qa_id) << "rank " << i;
            EXPECT_EQ(got[i].relevance, want[i].relevance);
            EXPECT_EQ(got[i].score, want[i].score);
        }
    }
}

TEST(Search, DeterministicBytes) {
    auto docs = random_corpus(500, 5);
    auto q = expand_query(build_index(docs).postings.rbegin()->first);
    auto a = nlohmann::json(search(build_index(docs), q, 20)).dump();
    auto b = nlohmann::json(search(build_index(docs), q, 20)).dump();
    EXPECT_EQ(a, b);
}

TEST(Search, SnippetsAreSubstrings) {
    auto docs = random_corpus(400, 6);
    auto idx = build_index(docs);
    std::map<std::string, const store::VerifiedQA*> by_id;
    for (const auto& d : docs) by_id[d.qa_id] = &d;
    int checked = 0;
    for (auto it = idx.postings.begin(); it != idx.postings.end() && checked < 40; ++it, ++checked) {
        for (const auto& h : search(idx, expand_query(it->first), 5)) {
            const auto& d = *by_id.at(h.qa_id);
            EXPECT_FALSE(h.snippet.empty());
            bool inside = d.question.find(h.snippet) != std::string::npos ||
                          d.chain_text.find(h.snippet) != std::string::npos;
            EXPECT_TRUE(inside) << h.snippet;
            EXPECT_NE(ascii_tokens(h.snippet).size(), 0u);
        }
    }
}

TEST(Expand, IdentityWithoutBackend) {
    auto q = expand_query("Instanton");
    ASSERT_EQ(q.terms.size(), 1u);
    EXPECT_EQ(q.terms[0].term, "instanton");
    EXPECT_EQ(q.terms[0].weight, 1.0);
    EXPECT_EQ(q.source, ExpansionSource::deterministic);
    EXPECT_THROW(expand_query("   "), Error);
}

TEST(Expand, MultiwordTargetAddsPhrase) {
    auto q = expand_query("Harmonic  Oscillator");
    ASSERT_EQ(q.terms.size(), 3u);
    EXPECT_EQ(q.terms[2].term, "harmonic oscillator");
}

TEST(Expand, BackendTerms) {
    gateway::Gateway gw;
    add_mock(gw, "x", script({{"Role: expander", "- tunneling\n- QCD vacuum\n"}}));
    auto q = expand_query("Instanton", &gw, "x");
    EXPECT_EQ(q.source, ExpansionSource::llm);
    ASSERT_GE(q.terms.size(), 3u);
    EXPECT_EQ(q.terms[0].term, "instanton");
    EXPECT_EQ(q.terms[0].weight, 1.0);
    for (std::size_t i = 1; i < q.terms.size(); ++i) EXPECT_EQ(q.terms[i].weight, 0.5);
    auto has = [&](const std::string& t) {
        return std::any_of(q.terms.begin(), q.terms.end(), [&](auto& x) { return x.term == t; });
    };
    EXPECT_TRUE(has("tunneling"));
    EXPECT_TRUE(has("qcd vacuum"));
}

TEST(Expand, DuplicatesKeepMaxWeight) {
    gateway::Gateway gw;
    add_mock(gw, "x", script({{"", "instanton\ntunneling\nTunneling\n1. tunneling"}}));
    auto q = expand_query("Instanton", &gw, "x");
    ASSERT_EQ(q.terms.size(), 2u);
    EXPECT_EQ(q.terms[0].weight, 1.0);
    EXPECT_EQ(q.terms[1].term, "tunneling");
}

TEST(Expand, AtMostEightSuggestions) {
    gateway::Gateway gw;
    std::string many;
    for (int i = 0; i < 20; ++i) many += "term" + std::string(1, char('a' + i)) + "\n";
    add_mock(gw, "x", script({{"", many}}));
    EXPECT_EQ(expand_query("core", &gw, "x").terms.size(), 9u);
}

TEST(Expand, BackendFailureFallsBack) {
    gateway::Gateway gw;
    gw.set_sleeper([](auto) {});
    add_mock(gw, "x", script({{"", "", gateway::MockFailure::timeout}}));
    AuditLog log;
    auto q = expand_query("Instanton", &gw, "x", &log);
    EXPECT_EQ(q.terms.size(), 1u);
    EXPECT_EQ(q.source, ExpansionSource::deterministic);
    EXPECT_EQ(log.size(), 1u);
}

namespace {

Index course_index(const std::vector<std::pair<std::string, std::string>>& id_course) {
    std::vector<store::VerifiedQA> docs;
    for (const auto& [id, c] : id_course) docs.push_back(doc(id, "q", "c", c));
    return build_index(docs);
}

std::vector<SearchHit> flat_hits(const std::vector<std::string>& ids, const std::vector<double>& norms) {
    std::vector<SearchHit> hits;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        SearchHit h;
        h.qa_id = ids[i];
        h.norm = norms[i];
        h.relevance = norms[i];
        hits.push_back(h);
    }
    return hits;
}

std::vector<std::string> ids_of(const std::vector<SearchHit>& hits) {
    std::vector<std::string> out;
    for (const auto& h : hits) out.push_back(h.qa_id);
    return out;
}

} // namespace

TEST(CrossDomain, AllHomePreservesOrder) {
    auto idx = course_index({{"a", "home"}, {"b", "home"}, {"c", "home"}});
    auto hits = flat_hits({"c", "a", "b"}, {1.0, 0.8, 0.8});
    auto out = rank_cross_domain(hits, idx, "home");
    EXPECT_EQ(ids_of(out), (std::vector<std::string>{"c", "a", "b"}));
    for (const auto& h : out) EXPECT_EQ(h.xdisc, 0.0);
}

TEST(CrossDomain, EqualRelevanceRoundRobin) {
    auto idx = course_index({{"a1", "A"}, {"a2", "A"}, {"a3", "A"}, {"b1", "B"}, {"b2", "B"}, {"c1", "C"}, {"c2", "C"}});
    auto hits = flat_hits({"a1", "a2", "a3", "b1", "b2", "c1", "c2"}, std::vector<double>(7, 1.0));
    auto out = rank_cross_domain(hits, idx, "home");
    EXPECT_EQ(ids_of(out), (std::vector<std::string>{"a1", "b1", "c1", "a2", "b2", "c2", "a3"}));
    // Oracle for the decay: second hit of a course gets 1/(1+ln 2).
    EXPECT_DOUBLE_EQ(out[3].xdisc, 1.0 / (1.0 + std::log(2.0)));
    for (const auto& h : out) EXPECT_DOUBLE_EQ(h.score, 0.7 * h.norm + 0.3 * h.xdisc);
}

TEST(CrossDomain, AlphaOneIsPureRelevance) {
    auto idx = course_index({{"a", "home"}, {"b", "X"}, {"c", "Y"}, {"d", "X"}});
    auto hits = flat_hits({"a", "b", "d", "c"}, {1.0, 0.9, 0.5, 0.2});
    EXPECT_EQ(ids_of(rank_cross_domain(hits, idx, "home", 1.0)), (std::vector<std::string>{"a", "b", "d", "c"}));
    // With the default weight a foreign course can overtake the home hit.
    EXPECT_EQ(rank_cross_domain(hits, idx, "home").front().qa_id, "b");
}

TEST(CrossDomain, UnknownCourseGetsZero) {
    auto idx = course_index({{"a", "A"}});
    AuditLog log;
    auto out = rank_cross_domain(flat_hits({"ghost", "a"}, {1.0, 1.0}), idx, "home", 0.7, &log);
    EXPECT_EQ(out[0].qa_id, "a");
    EXPECT_EQ(out[1].xdisc, 0.0);
    EXPECT_EQ(log.size(), 1u);
}

namespace {

struct CategorizedStore {
    TempDir dir;
    std::optional<store::KnowledgeStore> kb;
    std::vector<std::string> reductionist, application;

    CategorizedStore() {
        auto cur = socrates::Curriculum::from_json(nlohmann::json::parse(
            R"({"courses": [{"course_id": "m", "title": "M", "discipline": "physics", "level": "graduate",
                "topics": [{"topic_id": "m.t", "title": "Waves"}]}]})"));
        kb.emplace(store::KnowledgeStore::create(dir / "kb", cur));
        std::vector<consensus::ConsensusVerdict> verdicts;
        std::vector<socrates::PromptSpec> prompts;
        std::vector<consensus::LCoTTrace> traces;
        for (int i = 0; i < 5; ++i) {
            socrates::PromptSpec p;
            p.prompt_id = "p" + std::to_string(i);
            p.topic_id = "m.t";
            p.text = "Wave question " + std::to_string(i);
            p.category = i < 2 ? Category::reductionist : Category::application;
            prompts.push_back(p);
            consensus::LCoTTrace t;
            t.trace_id = p.prompt_id + "#a";
            t.prompt_id = p.prompt_id;
            t.backend_id = "a";
            t.chain_text = "wave chain";
            t.answer = consensus::FinalAnswer::numeric(i);
            traces.push_back(t);
            verdicts.push_back({p.prompt_id, consensus::VerdictStatus::verified, {t.trace_id}, t.answer});
            (i < 2 ? reductionist : application).push_back(store::make_qa_id(p.text, t.answer));
        }
        kb->ingest(verdicts, prompts, traces);
    }

    std::vector<SearchHit> hits() const {
        std::vector<std::string> ids = reductionist;
        ids.insert(ids.end(), application.begin(), application.end());
        return flat_hits(ids, std::vector<double>(ids.size(), 1.0));
    }
};

} // namespace

TEST(Categorize, RoutesByStoredCategory) {
    CategorizedStore s;
    auto sc = categorize("wave", s.hits(), *s.kb);
    EXPECT_EQ(sc.what_why.size(), 2u);
    EXPECT_EQ(sc.application.size(), 3u);
}

TEST(Categorize, EmptyHits) {
    CategorizedStore s;
    auto sc = categorize("wave", {}, *s.kb);
    EXPECT_TRUE(sc.what_why.empty());
    EXPECT_TRUE(sc.application.empty());
}

TEST(Categorize, BackendOverride) {
    CategorizedStore s;
    gateway::Gateway gw;
    add_mock(gw, "cat", script({{"Role: categorizer", s.reductionist[0] + ": application\nnot-an-id: what_why\n"}}));
    auto sc = categorize("wave", s.hits(), *s.kb, &gw, "cat");
    EXPECT_EQ(sc.what_why.size(), 1u);
    EXPECT_EQ(sc.application.size(), 4u);
    for (const auto& a : sc.what_why)
        for (const auto& b : sc.application) EXPECT_NE(a.qa_id, b.qa_id);
}

TEST(Categorize, UnknownHitDropped) {
    CategorizedStore s;
    auto hits = s.hits();
    hits.push_back(flat_hits({"ffffffffffffffff"}, {0.5})[0]);
    AuditLog log;
    auto sc = categorize("wave", hits, *s.kb, nullptr, {}, &log);
    EXPECT_EQ(sc.what_why.size() + sc.application.size(), 5u);
    EXPECT_EQ(log.size(), 1u);
}
