#include "lcot/app/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <map>
#include <optional>
#include <set>

#include "lcot/brainstorm/index.hpp"
#include "lcot/common/error.hpp"
#include "lcot/common/json_io.hpp"
#include "lcot/common/parallel.hpp"
#include "lcot/common/text.hpp"
#include "lcot/consensus/consensus.hpp"
#include "lcot/graph/graph.hpp"
#include "lcot/graph/hierarchy.hpp"
#include "lcot/plato/article.hpp"
#include "lcot/socrates/curriculum.hpp"
#include "lcot/socrates/prompts.hpp"
#include "lcot/store/knowledge_store.hpp"

namespace lcot::app {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class RunLock {
public:
    explicit RunLock(const fs::path& dir) {
        fd_ = ::open((dir / ".lock").c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
        if (fd_ < 0) throw Error(ErrorCode::runtime, "cannot open lock file in " + dir.string());
        if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            throw Error(ErrorCode::runtime, "another pipeline run holds " + (dir / ".lock").string());
        }
    }
    ~RunLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    int fd_ = -1;
};

struct Run {
    const AppConfig& config;
    const gateway::Gateway& gw;
    fs::path out;
    fs::path stages;
    StageRecord* record = nullptr;
    AuditLog audit;

    fs::path stage_file(const std::string& name) const { return stages / name; }

    template <typename T>
    void write_rows(const std::string& name, const std::vector<T>& rows) {
        write_file_atomic(stage_file(name), to_jsonl_of(rows));
        record->outputs.push_back("stages/" + name);
    }

    socrates::Curriculum curriculum() const { return socrates::load_curriculum(config.pipeline.curriculum); }
};

void require_backend(const gateway::Gateway& gw, const std::string& id, const char* role) {
    if (id.empty()) throw validation_error(std::string("config names no ") + role + " backend");
    if (!gw.contains(id)) throw validation_error(std::string(role) + " backend " + id + " is not registered");
}

void stage_prompts(Run& run) {
    require_backend(run.gw, run.config.roles.planner, "planner");
    require_backend(run.gw, run.config.roles.generator, "generator");
    auto curriculum = run.curriculum();
    const auto& topics = curriculum.topics();
    socrates::PlannerOptions planner;
    planner.reductionist_fraction = run.config.pipeline.reductionist_fraction;

    struct TopicOutput {
        std::vector<socrates::PromptThumbnail> thumbnails;
        std::vector<socrates::PromptSpec> prompts;
        std::vector<socrates::SkipRecord> skipped;
        AuditLog audit;
    };
    std::vector<TopicOutput> per_topic(topics.size());
    parallel_for(topics.size(), run.config.pipeline.workers, [&](std::size_t i) {
        auto& out = per_topic[i];
        try {
            out.thumbnails = socrates::plan_thumbnails(curriculum, topics[i], run.config.pipeline.thumbnails_per_topic,
                                                       run.gw, run.config.roles.planner, planner);
        } catch (const Error& e) {
            audit(&out.audit, "prompts", topics[i].topic_id, std::string("planning failed: ") + e.what());
            return;
        }
        for (const auto& t : out.thumbnails) {
            try {
                auto g = socrates::generate_prompts(curriculum, t, run.gw, run.config.roles.generator);
                for (auto& p : g.prompts) out.prompts.push_back(std::move(p));
                for (auto& s : g.skipped) out.skipped.push_back(std::move(s));
            } catch (const Error& e) {
                audit(&out.audit, "prompts", t.thumbnail_id, std::string("generation failed: ") + e.what());
            }
        }
    });
    std::vector<socrates::PromptThumbnail> thumbnails;
    std::vector<socrates::PromptSpec> prompts;
    std::vector<socrates::SkipRecord> skipped;
    for (auto& t : per_topic) {
        thumbnails.insert(thumbnails.end(), t.thumbnails.begin(), t.thumbnails.end());
        prompts.insert(prompts.end(), t.prompts.begin(), t.prompts.end());
        skipped.insert(skipped.end(), t.skipped.begin(), t.skipped.end());
        run.audit.insert(run.audit.end(), t.audit.begin(), t.audit.end());
    }
    socrates::verify_provenance(prompts, thumbnails, curriculum);
    run.write_rows("thumbnails.jsonl", thumbnails);
    run.write_rows("prompts.jsonl", prompts);
    run.write_rows("skipped.jsonl", skipped);
    run.record->counts = {{"topics", topics.size()}, {"thumbnails", thumbnails.size()}, {"prompts", prompts.size()},
                          {"skipped", skipped.size()}};
}

void stage_sanitize(Run& run) {
    require_backend(run.gw, run.config.roles.checker, "checker");
    auto prompts = read_jsonl_of<socrates::PromptSpec>(run.stage_file("prompts.jsonl"));
    auto result = socrates::sanitize_prompts(prompts, run.gw, run.config.roles.checker, run.config.roles.generator,
                                             run.config.pipeline.workers);
    for (const auto& r : result.rejected) audit(&run.audit, "sanitize", r.prompt_id, r.reason);
    run.write_rows("sanitized.jsonl", result.kept);
    run.write_rows("rejected.jsonl", result.rejected);
    run.record->counts = {{"input", prompts.size()}, {"kept", result.kept.size()}, {"rejected", result.rejected.size()},
                          {"recheck", result.recheck.size()}};
}

void stage_solve(Run& run) {
    const auto& solvers = run.config.roles.solvers;
    for (const auto& s : solvers) require_backend(run.gw, s, "solver");
    auto prompts = read_jsonl_of<socrates::PromptSpec>(run.stage_file("sanitized.jsonl"));
    consensus::SolveOptions options;
    options.workers = 1;  // prompts already run in parallel
    if (!run.config.pipeline.fixed_timestamp.empty()) {
        auto stamp = run.config.pipeline.fixed_timestamp;
        options.clock = [stamp] { return stamp; };
    }
    // Fail fast on the solver precondition even when there is nothing to solve.
    if (solvers.size() < 2)
        throw validation_error("consensus needs at least two solver backends", std::to_string(solvers.size()));
    std::vector<consensus::SolveResult> results(prompts.size());
    parallel_for(prompts.size(), run.config.pipeline.workers,
                 [&](std::size_t i) { results[i] = consensus::solve(prompts[i], solvers, run.gw, options); });
    std::vector<consensus::LCoTTrace> traces;
    for (auto& r : results) {
        std::sort(r.traces.begin(), r.traces.end(),
                  [](const auto& a, const auto& b) { return a.backend_id < b.backend_id; });
        traces.insert(traces.end(), r.traces.begin(), r.traces.end());
        run.audit.insert(run.audit.end(), r.failures.begin(), r.failures.end());
    }
    run.write_rows("traces.jsonl", traces);
    run.record->counts = {{"prompts", prompts.size()}, {"traces", traces.size()}};
}

void stage_consensus(Run& run) {
    auto prompts = read_jsonl_of<socrates::PromptSpec>(run.stage_file("sanitized.jsonl"));
    auto traces = read_jsonl_of<consensus::LCoTTrace>(run.stage_file("traces.jsonl"));
    std::map<std::string, std::vector<consensus::LCoTTrace>> by_prompt;
    for (auto& t : traces) by_prompt[t.prompt_id].push_back(std::move(t));
    std::vector<consensus::ConsensusVerdict> verdicts;
    std::map<std::string, std::size_t> counts = {{"verified", 0}, {"divergent", 0}, {"unverifiable", 0}};
    for (const auto& p : prompts) {
        auto v = consensus::judge_consensus(p, by_prompt[p.prompt_id]);
        ++counts[std::string(consensus::to_string(v.status))];
        if (v.status != consensus::VerdictStatus::verified)
            audit(&run.audit, "consensus", p.prompt_id, std::string(consensus::to_string(v.status)));
        verdicts.push_back(std::move(v));
    }
    run.write_rows("verdicts.jsonl", verdicts);
    counts["prompts"] = prompts.size();
    run.record->counts = counts;
}

void stage_ingest(Run& run) {
    auto dir = kb_dir(run.config);
    fs::remove_all(dir);
    auto prompts = read_jsonl_of<socrates::PromptSpec>(run.stage_file("sanitized.jsonl"));
    auto traces = read_jsonl_of<consensus::LCoTTrace>(run.stage_file("traces.jsonl"));
    auto verdicts = read_jsonl_of<consensus::ConsensusVerdict>(run.stage_file("verdicts.jsonl"));
    auto kb = store::KnowledgeStore::create(dir, run.curriculum());
    auto report = kb.ingest(verdicts, prompts, traces);
    run.audit.insert(run.audit.end(), report.audit.begin(), report.audit.end());
    run.record->outputs.push_back("kb");
    run.record->counts = {{"ingested", report.ingested}, {"duplicates", report.duplicates},
                          {"rejected", report.rejected}, {"records", kb.size()}};
}

void stage_index(Run& run) {
    auto kb = store::KnowledgeStore::open(kb_dir(run.config));
    brainstorm::IndexOptions options;
    options.workers = run.config.pipeline.workers;
    auto index = brainstorm::build_index(kb, options);
    auto dir = index_dir(run.config);
    fs::remove_all(dir);
    brainstorm::save_index(index, dir);
    run.record->outputs.push_back("index");
    run.record->counts = {{"documents", index.doc_count()}, {"terms", index.postings.size()}};
}

std::vector<std::string> article_keywords(const AppConfig& config, const socrates::Curriculum& curriculum) {
    if (!config.pipeline.articles.empty()) return config.pipeline.articles;
    std::vector<std::string> out;
    for (const auto& t : curriculum.topics()) out.push_back(t.title);
    return out;
}

void stage_articles(Run& run) {
    require_backend(run.gw, run.config.roles.author, "author");
    auto kb = store::KnowledgeStore::open(kb_dir(run.config));
    auto index = brainstorm::load_index(index_dir(run.config));
    auto style = run.config.pipeline.style_guide.empty() ? plato::StyleGuide::pedagogical_default()
                                                         : plato::load_style_guide(run.config.pipeline.style_guide);
    auto keywords = article_keywords(run.config, kb.curriculum());
    // Identical normalized keywords would write the same file.
    std::vector<std::string> unique;
    std::set<std::string> seen;
    for (const auto& k : keywords)
        if (seen.insert(normalize_keyword(k)).second) unique.push_back(k);
        else audit(&run.audit, "articles", k, "duplicate keyword skipped");

    plato::PageBackends backends{run.config.roles.author, run.config.roles.expander, run.config.roles.categorizer};
    std::vector<std::optional<plato::Article>> articles(unique.size());
    std::vector<AuditLog> logs(unique.size());
    parallel_for(unique.size(), run.config.pipeline.workers, [&](std::size_t i) {
        try {
            articles[i] = plato::generate_page_workflow(unique[i], index, kb, style, run.config.pipeline.language,
                                                        run.gw, backends, {}, &logs[i]);
        } catch (const Error& e) {
            audit(&logs[i], "articles", unique[i], e.what());
        }
    });
    auto dir = articles_dir(run.config);
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::size_t written = 0;
    for (std::size_t i = 0; i < unique.size(); ++i) {
        run.audit.insert(run.audit.end(), logs[i].begin(), logs[i].end());
        if (!articles[i]) continue;
        auto slug = keyword_slug(unique[i]);
        write_file_atomic(dir / (slug + ".json"), json(*articles[i]).dump(2) + "\n");
        write_file_atomic(dir / (slug + ".md"), articles[i]->render());
        ++written;
    }
    run.record->outputs.push_back("articles");
    run.record->counts = {{"requested", unique.size()}, {"written", written}, {"skipped", unique.size() - written}};
}

std::vector<plato::Article> read_articles(const fs::path& dir) {
    std::vector<fs::path> files;
    if (fs::exists(dir))
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<plato::Article> out;
    for (const auto& f : files) out.push_back(read_json_file(f).get<plato::Article>());
    return out;
}

void stage_keywords(Run& run) {
    auto articles = read_articles(articles_dir(run.config));
    auto index = brainstorm::load_index(index_dir(run.config));
    const auto& extractor = run.config.roles.keyword_extractor;
    std::vector<plato::KeywordSet> sets(articles.size());
    std::vector<AuditLog> logs(articles.size());
    parallel_for(articles.size(), run.config.pipeline.workers, [&](std::size_t i) {
        sets[i] = plato::extract_keywords(articles[i], run.config.pipeline.keywords_per_article,
                                          extractor.empty() ? nullptr : &run.gw, extractor, &index, &logs[i]);
    });
    for (auto& l : logs) run.audit.insert(run.audit.end(), l.begin(), l.end());
    auto g = graph::build_graph(sets, &run.audit);
    auto dir = run.out / "graph";
    fs::remove_all(dir);
    graph::write_keyword_graph(g, dir);
    run.write_rows("keywords.jsonl", sets);
    run.record->outputs.push_back("graph");
    run.record->counts = {{"pages", sets.size()}, {"nodes", g.nodes.size()}, {"edges", g.edges.size()},
                          {"skipped_references", g.skipped_references}};
}

void stage_cluster(Run& run) {
    auto g = graph::read_keyword_graph(run.out / "graph");
    auto tree = graph::build_hierarchy(g.symmetrized(), g.nodes, run.config.pipeline.hierarchy);
    if (!run.config.roles.titler.empty())
        graph::summarize_communities(tree, run.gw, run.config.roles.titler, run.config.pipeline.hierarchy.min_size,
                                     &run.audit);
    write_file_atomic(tree_path(run.config), json(tree).dump(2) + "\n");
    run.record->outputs.push_back("tree.json");
    run.record->counts = {{"nodes", g.nodes.size()}, {"levels", std::size_t(tree.depth() + 1)},
                          {"leaves", tree.leaf_count()}};
}

using StageFn = void (*)(Run&);

StageFn stage_fn(std::string_view name) {
    if (name == "prompts") return stage_prompts;
    if (name == "sanitize") return stage_sanitize;
    if (name == "solve") return stage_solve;
    if (name == "consensus") return stage_consensus;
    if (name == "ingest") return stage_ingest;
    if (name == "index") return stage_index;
    if (name == "articles") return stage_articles;
    if (name == "keywords") return stage_keywords;
    return stage_cluster;
}

void clear_outputs(const fs::path& out) {
    for (const char* name : {"manifest.json", "stages", "kb", "index", "articles", "graph", "tree.json"})
        fs::remove_all(out / name);
}

} // namespace

const StageRecord* RunManifest::find(std::string_view stage) const {
    for (const auto& s : stages)
        if (s.stage == stage) return &s;
    return nullptr;
}

void to_json(json& j, const StageRecord& s) {
    j = {{"stage", s.stage},     {"status", s.status},   {"counts", s.counts},
         {"outputs", s.outputs}, {"started", s.started}, {"finished", s.finished}};
}

void from_json(const json& j, StageRecord& s) {
    s.stage = j.at("stage").get<std::string>();
    s.status = j.at("status").get<std::string>();
    s.counts = j.at("counts").get<std::map<std::string, std::size_t>>();
    s.outputs = j.at("outputs").get<std::vector<std::string>>();
    s.started = j.value("started", "");
    s.finished = j.value("finished", "");
}

void to_json(json& j, const RunManifest& m) {
    j = {{"format", "lcot-run-manifest"},
         {"run_id", m.run_id},
         {"config_hash", m.config_hash},
         {"stages", m.stages}};
}

void from_json(const json& j, RunManifest& m) {
    if (j.value("format", "") != "lcot-run-manifest") throw validation_error("not a run manifest");
    m.run_id = j.at("run_id").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.stages = j.at("stages").get<std::vector<StageRecord>>();
}

fs::path kb_dir(const AppConfig& config) { return config.pipeline.out_dir / "kb"; }
fs::path index_dir(const AppConfig& config) { return config.pipeline.out_dir / "index"; }
fs::path articles_dir(const AppConfig& config) { return config.pipeline.out_dir / "articles"; }
fs::path tree_path(const AppConfig& config) { return config.pipeline.out_dir / "tree.json"; }

std::string keyword_slug(const std::string& keyword) {
    std::string out;
    for (unsigned char c : normalize_keyword(keyword)) {
        if (std::isalnum(c) || c >= 0x80) out += char(c);
        else if (!out.empty() && out.back() != '-') out += '-';
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    if (out.empty()) throw validation_error("keyword has no usable characters: " + keyword);
    return out;
}

PipelineResult run_pipeline(const AppConfig& config, const gateway::Gateway& gw, const PipelineOptions& options) {
    if (!options.stop_after.empty() &&
        std::find(kStages.begin(), kStages.end(), options.stop_after) == kStages.end())
        throw validation_error("unknown stage " + options.stop_after);
    if (config.pipeline.curriculum.empty()) throw validation_error("config names no curriculum");
    const auto& out = config.pipeline.out_dir;
    fs::create_directories(out);
    RunLock lock(out);
    std::function<std::string()> now = consensus::utc_timestamp;
    if (options.clock) now = options.clock;
    else if (!config.pipeline.fixed_timestamp.empty())
        now = [stamp = config.pipeline.fixed_timestamp] { return stamp; };

    auto manifest_path = out / "manifest.json";
    RunManifest manifest;
    if (options.force) clear_outputs(out);
    if (fs::exists(manifest_path)) {
        manifest = read_json_file(manifest_path).get<RunManifest>();
        if (manifest.config_hash != config.config_hash)
            throw validation_error("output directory belongs to a different config; rerun with --force",
                                   manifest.config_hash + " vs " + config.config_hash);
    } else {
        manifest.run_id = "run-" + config.config_hash;
        manifest.config_hash = config.config_hash;
    }

    Run run{config, gw, out, out / "stages", nullptr, {}};
    fs::create_directories(run.stages);
    PipelineResult result;
    for (auto name : kStages) {
        std::string stage(name);
        if (manifest.done(stage)) {
            result.resumed.push_back(stage);
        } else {
            StageRecord record;
            record.stage = stage;
            record.started = now();
            run.record = &record;
            run.audit.clear();
            try {
                stage_fn(stage)(run);
            } catch (const Error& e) {
                throw Error(e.code(), stage + ": " + e.what(), e.detail());
            }
            write_file_atomic(run.stage_file(stage + ".audit.jsonl"), to_jsonl_of(run.audit));
            record.outputs.push_back("stages/" + stage + ".audit.jsonl");
            record.status = "done";
            record.finished = now();
            manifest.stages.push_back(std::move(record));
            write_file_atomic(manifest_path, json(manifest).dump(2) + "\n");
            result.ran.push_back(stage);
        }
        if (stage == options.stop_after) break;
    }
    result.complete = manifest.done(kStages.back());
    result.manifest = std::move(manifest);
    return result;
}

} // namespace lcot::app
