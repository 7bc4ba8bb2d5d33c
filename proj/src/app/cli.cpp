#include "lcot/app/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "lcot/app/config.hpp"
#include "lcot/app/pipeline.hpp"
#include "lcot/app/service.hpp"
#include "lcot/brainstorm/search.hpp"
#include "lcot/common/json_io.hpp"
#include "lcot/common/text.hpp"
#include "lcot/eval/eval.hpp"
#include "lcot/gateway/replay_backend.hpp"
#include "lcot/graph/graph.hpp"
#include "lcot/graph/hierarchy.hpp"

namespace lcot::app {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct PipelineArgs {
    std::string config;
    std::string stop_after;
    bool force = false;
    bool json_out = false;
};

struct SearchArgs {
    std::string index;
    std::string config;
    std::string keyword;
    std::size_t k = 10;
    bool json_out = false;
};

struct ArticleArgs {
    std::string config;
    std::string keyword;
    std::string language;
    std::string style;
    std::string out;
    bool baseline = false;
    bool json_out = false;
};

struct EvalArgs {
    std::string plato_dir;
    std::string baseline_dir;
    std::string transcript;
    std::string config;
    std::string out_dir;
    std::size_t workers = 4;
};

struct ClusterArgs {
    std::string corpus;
    std::string graph_dir;
    std::string demo;
    std::string out;
    std::uint64_t seed = 1;
    int q_max = 5;
    int restarts = 5;
    int n_null = graph::kDefaultNullSamples;
    int min_size = graph::kDefaultMinSize;
    int max_depth = graph::kDefaultMaxDepth;
    std::string config;  // optional, for community titles
};

struct ServeArgs {
    std::string config;
    std::string host;
    int port = 0;
};

struct McpArgs {
    std::string config;
    bool stdio = false;
    int http_port = 0;
    std::string host = "127.0.0.1";
};

int cmd_pipeline(const PipelineArgs& a, std::ostream& out) {
    auto config = load_config(a.config);
    auto gw = build_gateway(config);
    PipelineOptions options;
    options.stop_after = a.stop_after;
    options.force = a.force;
    auto result = run_pipeline(config, gw, options);
    if (a.json_out) {
        out << json(result.manifest).dump(2) << "\n";
    } else {
        out << "run " << result.manifest.run_id << " config " << result.manifest.config_hash << "\n";
        for (const auto& s : result.manifest.stages) {
            bool resumed = std::find(result.resumed.begin(), result.resumed.end(), s.stage) != result.resumed.end();
            out << "  " << s.stage << (resumed ? " (checkpoint)" : "") << ":";
            for (const auto& [k, v] : s.counts) out << " " << k << "=" << v;
            out << "\n";
        }
        out << (result.complete ? "complete" : "stopped after " + options.stop_after) << " -> "
            << config.pipeline.out_dir.string() << "\n";
    }
    if (const auto* ingest = result.manifest.find("ingest"); ingest && ingest->counts.at("records") == 0) return kExitEmpty;
    return kExitOk;
}

int cmd_search(const SearchArgs& a, std::ostream& out) {
    if (a.k == 0) throw validation_error("-k must be positive");
    fs::path index_path = a.index;
    std::optional<AppConfig> config;
    std::optional<gateway::Gateway> gw;
    if (!a.config.empty()) {
        config = load_config(a.config);
        if (index_path.empty()) index_path = index_dir(*config);
        if (!config->roles.expander.empty()) gw.emplace(build_gateway(*config));
    }
    if (index_path.empty()) throw validation_error("give --index or --config");
    auto index = brainstorm::load_index(index_path);
    auto query = brainstorm::expand_query(a.keyword, gw ? &*gw : nullptr, config ? config->roles.expander : "");
    auto hits = brainstorm::search(index, query, a.k);
    if (a.json_out) {
        out << json{{"query", a.keyword}, {"hits", hits}}.dump(2) << "\n";
    } else if (hits.empty()) {
        out << "no coverage for \"" << a.keyword << "\"\n";
    } else {
        char score[32];
        for (std::size_t i = 0; i < hits.size(); ++i) {
            std::snprintf(score, sizeof score, "%.4f", hits[i].score);
            out << i + 1 << ". " << score << "  " << hits[i].qa_id << "  [" << hits[i].course_id << "]  "
                << collapse_whitespace(hits[i].snippet) << "\n";
        }
    }
    return hits.empty() ? kExitEmpty : kExitOk;
}

int cmd_article(const ArticleArgs& a, std::ostream& out) {
    auto config = load_config(a.config);
    auto gw = build_gateway(config);
    auto style = !a.style.empty()                        ? plato::load_style_guide(a.style)
                 : !config.pipeline.style_guide.empty() ? plato::load_style_guide(config.pipeline.style_guide)
                                                         : plato::StyleGuide::pedagogical_default();
    auto language = a.language.empty() ? config.pipeline.language : a.language;
    if (config.roles.author.empty()) throw validation_error("config names no author backend");
    plato::Article article;
    AuditLog log;
    if (a.baseline) {
        article = plato::baseline_generate(a.keyword, style, language, gw, config.roles.author);
    } else {
        if (!store::KnowledgeStore::exists(kb_dir(config)))
            throw validation_error("no knowledge base under " + kb_dir(config).string() + "; run the pipeline first");
        auto kb = store::KnowledgeStore::open(kb_dir(config));
        auto index = brainstorm::load_index(index_dir(config));
        article = plato::generate_page_workflow(a.keyword, index, kb, style, language, gw,
                                                {config.roles.author, config.roles.expander, config.roles.categorizer},
                                                {}, &log);
    }
    std::string text = a.json_out ? json(article).dump(2) + "\n" : article.render();
    if (!a.out.empty()) {
        write_file_atomic(a.out, text);
        out << "wrote " << a.out << "\n";
    } else {
        out << text;
    }
    return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    gateway::Gateway gw;
    std::string judge;
    if (!a.transcript.empty()) {
        judge = "judge";
        gateway::BackendSpec spec{judge, "replay", "replay://" + a.transcript, "replay-judge", 4, 60.0};
        gw.register_backend(std::make_unique<gateway::ReplayBackend>(spec, gateway::load_transcript(a.transcript)));
    } else if (!a.config.empty()) {
        auto config = load_config(a.config);
        gw = build_gateway(config);
        judge = config.roles.judge;
        if (judge.empty()) throw validation_error("config names no judge backend");
    } else {
        throw validation_error("give --judge-transcript or --config");
    }
    auto plato_articles = eval::load_articles(a.plato_dir);
    auto baseline_articles = eval::load_articles(a.baseline_dir);
    if (plato_articles.empty() || baseline_articles.empty()) throw validation_error("no articles to compare");
    AuditLog log;
    auto report = eval::compare(plato_articles, baseline_articles, gw, judge, &log, a.workers);
    for (const auto& e : log) err << "audit " << e.stage << " " << e.subject << ": " << e.message << "\n";
    if (!a.out_dir.empty()) {
        fs::create_directories(a.out_dir);
        write_file_atomic(fs::path(a.out_dir) / "report.csv", report.to_csv());
        write_file_atomic(fs::path(a.out_dir) / "report.json", json(report).dump(2) + "\n");
        write_file_atomic(fs::path(a.out_dir) / "audit.jsonl", to_jsonl_of(log));
    }
    out << report.to_csv();
    return report.rows.empty() ? kExitEmpty : kExitOk;
}

int cmd_cluster(const ClusterArgs& a, std::ostream& out) {
    int sources = int(!a.corpus.empty()) + int(!a.graph_dir.empty()) + int(!a.demo.empty());
    if (sources != 1) throw validation_error("give exactly one of --corpus, --graph, --demo");
    graph::Graph g;
    std::vector<std::string> names;
    if (!a.demo.empty()) {
        if (a.demo == "two-cliques") g = graph::two_cliques(12, 1);
        else if (a.demo == "paired-cliques") g = graph::paired_cliques();
        else if (a.demo == "er") g = graph::erdos_renyi(300, 0.03, a.seed);
        else throw validation_error("unknown demo graph " + a.demo + " (two-cliques, paired-cliques, er)");
        for (int v = 0; v < g.size(); ++v) names.push_back("v" + std::to_string(v));
    } else {
        graph::KeywordGraph kg;
        if (!a.graph_dir.empty()) {
            kg = graph::read_keyword_graph(a.graph_dir);
        } else {
            auto articles = eval::load_articles(a.corpus);
            std::vector<plato::KeywordSet> sets;
            for (const auto& art : articles) sets.push_back(plato::extract_keywords(art));
            kg = graph::build_graph(sets);
        }
        g = kg.symmetrized();
        names = kg.nodes;
    }
    if (g.size() == 0) throw Error(ErrorCode::no_coverage, "graph has no nodes");
    graph::HierarchyOptions options{a.q_max, a.restarts, a.n_null, a.min_size, a.max_depth, a.seed};
    auto tree = graph::build_hierarchy(g, names, options);
    if (!a.config.empty()) {
        auto config = load_config(a.config);
        if (!config.roles.titler.empty()) {
            auto gw = build_gateway(config);
            graph::summarize_communities(tree, gw, config.roles.titler, a.min_size);
        }
    }
    write_file_atomic(a.out, json(tree).dump(2) + "\n");
    out << "nodes " << g.size() << ", levels " << tree.depth() + 1 << ", leaves " << tree.leaf_count();
    const auto top = tree.level(1);
    out << ", top-level communities " << top.size() << " -> " << a.out << "\n";
    return kExitOk;
}

int cmd_serve(const ServeArgs& a, std::ostream& err) {
    auto config = load_config(a.config);
    Service service(config);
    auto host = a.host.empty() ? config.server.host : a.host;
    int port = a.port ? a.port : config.server.port;
    err << "serving on http://" << host << ":" << port << "\n";
    service.listen(host, port);
    return kExitOk;
}

int cmd_mcp(const McpArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
    auto config = load_config(a.config);
    Service service(config);
    if (a.http_port > 0) {
        err << "MCP over HTTP at http://" << a.host << ":" << a.http_port << "/mcp\n";
        service.listen(a.host, a.http_port);
        return kExitOk;
    }
    service.mcp_server().serve_stdio(in, out);
    return kExitOk;
}

} // namespace

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::validation: return kExitValidation;
    case ErrorCode::not_found:
    case ErrorCode::no_coverage: return kExitEmpty;
    default: return kExitRuntime;
    }
}

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Knowledge base builder, search engine and article synthesizer", "lcot"};
    app.require_subcommand(1);

    PipelineArgs pa;
    auto* pipeline = app.add_subcommand("pipeline", "Run or resume the full generation pipeline");
    pipeline->add_option("--config", pa.config, "Config file")->required();
    pipeline->add_option("--stop-after", pa.stop_after, "Stop after this stage");
    pipeline->add_flag("--force", pa.force, "Discard previous outputs");
    pipeline->add_flag("--json", pa.json_out, "Print the run manifest as JSON");

    SearchArgs sa;
    auto* search = app.add_subcommand("search", "Find derivations that feature a keyword");
    search->add_option("--index", sa.index, "Index directory");
    search->add_option("--config", sa.config, "Config file (index from its output directory)");
    search->add_option("--keyword,-q", sa.keyword, "Keyword")->required();
    search->add_option("-k", sa.k, "Number of hits");
    search->add_flag("--json", sa.json_out, "Machine-readable output");

    ArticleArgs aa;
    auto* article = app.add_subcommand("article", "Write an article for a keyword");
    article->add_option("--config", aa.config, "Config file")->required();
    article->add_option("--keyword", aa.keyword, "Keyword")->required();
    article->add_option("--language", aa.language, "Language tag");
    article->add_option("--style", aa.style, "Style guide JSON");
    article->add_option("--out", aa.out, "Write to this file instead of stdout");
    article->add_flag("--baseline", aa.baseline, "Write without retrieval");
    article->add_flag("--json", aa.json_out, "Emit the article as JSON");

    EvalArgs ea;
    auto* evaluate = app.add_subcommand("eval", "Compare grounded and baseline articles with a judge");
    evaluate->add_option("--plato", ea.plato_dir, "Directory of grounded articles")->required();
    evaluate->add_option("--baseline", ea.baseline_dir, "Directory of baseline articles")->required();
    evaluate->add_option("--judge-transcript", ea.transcript, "Replay the judge from a transcript");
    evaluate->add_option("--config", ea.config, "Config with a judge role");
    evaluate->add_option("--out", ea.out_dir, "Directory for report.csv, report.json, audit.jsonl");
    evaluate->add_option("--workers", ea.workers, "Parallel judge calls");

    ClusterArgs ca;
    auto* cluster = app.add_subcommand("cluster", "Build the community hierarchy of a keyword graph");
    cluster->add_option("--corpus", ca.corpus, "Directory of article JSON files");
    cluster->add_option("--graph", ca.graph_dir, "Keyword graph directory (nodes.json, edges.txt)");
    cluster->add_option("--demo", ca.demo, "Synthetic graph: two-cliques, paired-cliques, er");
    cluster->add_option("--out", ca.out, "Tree JSON output")->required();
    cluster->add_option("--seed", ca.seed, "Random seed");
    cluster->add_option("--q-max", ca.q_max, "Largest number of groups tried");
    cluster->add_option("--restarts", ca.restarts, "Restarts per group count");
    cluster->add_option("--null-samples", ca.n_null, "Rewired graphs in the null ensemble");
    cluster->add_option("--min-size", ca.min_size, "Smallest community that is split further");
    cluster->add_option("--max-depth", ca.max_depth, "Deepest level");
    cluster->add_option("--config", ca.config, "Config with a titler role");

    ServeArgs sv;
    auto* serve = app.add_subcommand("serve", "Serve the HTTP API and the MCP endpoint");
    serve->add_option("--config", sv.config, "Config file")->required();
    serve->add_option("--host", sv.host, "Bind address");
    serve->add_option("--port", sv.port, "Port");

    McpArgs ma;
    auto* mcp = app.add_subcommand("mcp", "Run the MCP tool server");
    mcp->add_option("--config", ma.config, "Config file")->required();
    auto* stdio = mcp->add_flag("--stdio,--mcp-stdio", ma.stdio, "Newline-delimited JSON-RPC on stdin/stdout (default)");
    mcp->add_option("--http,--mcp-http", ma.http_port, "Serve POST /mcp on this port")->excludes(stdio);
    mcp->add_option("--host", ma.host, "Bind address for --http");

    std::vector<std::string> argv_storage = {"lcot"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_storage) argv.push_back(s.data());
    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e, out, err);
        return rc == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (pipeline->parsed()) return cmd_pipeline(pa, out);
        if (search->parsed()) return cmd_search(sa, out);
        if (article->parsed()) return cmd_article(aa, out);
        if (evaluate->parsed()) return cmd_eval(ea, out, err);
        if (cluster->parsed()) return cmd_cluster(ca, out);
        if (serve->parsed()) return cmd_serve(sv, err);
        if (mcp->parsed()) return cmd_mcp(ma, in, out, err);
    } catch (const Error& e) {
        err << "error (" << to_string(e.code()) << "): " << e.what();
        if (!e.detail().empty()) err << " [" << e.detail().substr(0, utf8_floor(e.detail(), 400)) << "]";
        err << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error (runtime): " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitValidation;
}

} // namespace lcot::app
