#include <gtest/gtest.h>

#include <httplib.h>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "lcot/app/cli.hpp"
#include "lcot/app/config.hpp"
#include "lcot/app/pipeline.hpp"
#include "lcot/app/service.hpp"
#include "lcot/common/json_io.hpp"
#include "lcot/common/text.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace lcot;
using namespace lcot::app;

namespace {

const fs::path kDemoDir = fs::path(LCOT_FIXTURE_DIR) / ".." / ".." / "demo";

json demo_json() { return read_json_file(kDemoDir / "config.json"); }

AppConfig demo_config(const fs::path& out_dir, json patch = json::object()) {
    auto j = demo_json();
    j["pipeline"]["out_dir"] = out_dir.string();
    j.merge_patch(patch);
    return AppConfig::from_json(j, kDemoDir);
}

fs::path write_config(const lcot::testing::TempDir& tmp, const fs::path& out_dir) {
    auto j = demo_json();
    j["pipeline"]["out_dir"] = out_dir.string();
    j["pipeline"]["curriculum"] = (kDemoDir / "curriculum.json").string();
    auto path = tmp / "config.json";
    write_file_atomic(path, j.dump(2));
    return path;
}

// Every regular file under dir, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().filename() == ".lock") continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        files[fs::relative(e.path(), dir).string()] = s.str();
    }
    return files;
}

struct Cli {
    int rc = -1;
    std::string out, err;
};

Cli cli(const std::vector<std::string>& args, const std::string& input = {}) {
    std::istringstream in(input);
    std::ostringstream out, err;
    Cli r;
    r.rc = run_cli(args, in, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

} // namespace

TEST(Config, LoadsDemo) {
    lcot::testing::TempDir tmp;
    auto c = demo_config(tmp / "out");
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.roles.solvers.size(), 2u);
    EXPECT_EQ(c.config_hash.size(), 16u);
    EXPECT_TRUE(c.pipeline.curriculum.is_absolute());
    auto gw = build_gateway(c);
    for (const auto& b : c.backends) EXPECT_TRUE(gw.contains(b.id)) << b.id;
}

TEST(Config, HashTracksContent) {
    lcot::testing::TempDir tmp;
    auto a = demo_config(tmp / "out");
    auto b = demo_config(tmp / "out");
    auto c = demo_config(tmp / "out", {{"seed", 8}});
    EXPECT_EQ(a.config_hash, b.config_hash);
    EXPECT_NE(a.config_hash, c.config_hash);
}

TEST(Config, RejectsUnknownRoleBackend) {
    lcot::testing::TempDir tmp;
    try {
        demo_config(tmp / "out", {{"roles", {{"author", "nobody"}}}});
        FAIL() << "expected validation error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::validation);
    }
}

TEST(Pipeline, DemoRunIsReproducible) {
    lcot::testing::TempDir a, b;
    auto ca = demo_config(a / "out");
    auto cb = demo_config(b / "out");
    auto ra = run_pipeline(ca, build_gateway(ca));
    auto rb = run_pipeline(cb, build_gateway(cb));
    ASSERT_TRUE(ra.complete);
    ASSERT_TRUE(rb.complete);
    EXPECT_GT(ra.manifest.find("ingest")->counts.at("records"), 0u);
    EXPECT_EQ(ra.manifest.stages.size(), kStages.size());
    auto sa = snapshot(a / "out");
    auto sb = snapshot(b / "out");
    ASSERT_EQ(sa.size(), sb.size());
    for (const auto& [name, bytes] : sa) EXPECT_EQ(bytes, sb.at(name)) << name;
    for (auto required : {"kb/manifest.json", "index/index.json", "tree.json", "articles/quantum-tunneling.json",
                          "articles/quantum-tunneling.md", "manifest.json"})
        EXPECT_TRUE(sa.count(required)) << required;
}

TEST(Pipeline, ResumesFromCheckpoint) {
    lcot::testing::TempDir tmp;
    auto c = demo_config(tmp / "out");
    auto gw = build_gateway(c);
    auto first = run_pipeline(c, gw, {"solve", false, {}});
    EXPECT_FALSE(first.complete);
    EXPECT_EQ(first.ran, (std::vector<std::string>{"prompts", "sanitize", "solve"}));
    EXPECT_FALSE(fs::exists(tmp / "out" / "kb"));
    auto second = run_pipeline(c, gw);
    EXPECT_TRUE(second.complete);
    EXPECT_EQ(second.resumed, (std::vector<std::string>{"prompts", "sanitize", "solve"}));
    EXPECT_EQ(second.ran.front(), "consensus");

    lcot::testing::TempDir fresh;
    auto cf = demo_config(fresh / "out");
    run_pipeline(cf, build_gateway(cf));
    auto resumed = snapshot(tmp / "out");
    auto straight = snapshot(fresh / "out");
    // Stage audits and the manifest differ only in run bookkeeping; data must match.
    for (auto name : {"kb/manifest.json", "index/index.json", "index/index.bin", "tree.json",
                      "articles/harmonic-oscillator.json"})
        EXPECT_EQ(resumed.at(name), straight.at(name)) << name;
}

TEST(Pipeline, ConfigChangeNeedsForce) {
    lcot::testing::TempDir tmp;
    auto c = demo_config(tmp / "out");
    run_pipeline(c, build_gateway(c), {"prompts", false, {}});
    auto changed = demo_config(tmp / "out", {{"seed", 9}});
    try {
        run_pipeline(changed, build_gateway(changed));
        FAIL() << "expected validation error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::validation);
    }
    auto r = run_pipeline(changed, build_gateway(changed), {"prompts", true, {}});
    EXPECT_EQ(r.manifest.config_hash, changed.config_hash);
}

TEST(Pipeline, SingleSolverIsRejected) {
    lcot::testing::TempDir tmp;
    auto c = demo_config(tmp / "out", {{"roles", {{"solvers", {"solver-a"}}}}});
    try {
        run_pipeline(c, build_gateway(c));
        FAIL() << "expected validation error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::validation);
        EXPECT_NE(std::string(e.what()).find("solve"), std::string::npos);
    }
}

TEST(Pipeline, UnknownStopStage) {
    lcot::testing::TempDir tmp;
    auto c = demo_config(tmp / "out");
    EXPECT_THROW(run_pipeline(c, build_gateway(c), {"nope", false, {}}), Error);
}

TEST(Pipeline, SecondRunnerIsLockedOut) {
    lcot::testing::TempDir tmp;
    auto c = demo_config(tmp / "out");
    auto gw = build_gateway(c);
    fs::create_directories(tmp / "out");
    // The lock is per open file description, so an in-process holder excludes a second run.
    int fd = ::open((tmp / "out" / ".lock").c_str(), O_RDWR | O_CREAT, 0644);
    ASSERT_GE(fd, 0);
    ASSERT_EQ(::flock(fd, LOCK_EX | LOCK_NB), 0);
    try {
        run_pipeline(c, gw);
        FAIL() << "expected lock conflict";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::runtime);
    }
    ::close(fd);
    EXPECT_TRUE(run_pipeline(c, gw).complete);
}

TEST(Pipeline, KeywordSlug) {
    EXPECT_EQ(keyword_slug("Quantum Tunneling"), "quantum-tunneling");
    EXPECT_EQ(keyword_slug("  a/b  c "), "a-b-c");
}

class ServiceTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        tmp_ = new lcot::testing::TempDir;
        config_ = new AppConfig(demo_config(*tmp_ / "out"));
        run_pipeline(*config_, build_gateway(*config_));
        service_ = new Service(*config_);
        server_ = new httplib::Server;
        service_->mount(*server_);
        port_ = server_->bind_to_any_port("127.0.0.1");
        thread_ = new std::thread([] { server_->listen_after_bind(); });
        server_->wait_until_ready();
    }
    static void TearDownTestSuite() {
        server_->stop();
        thread_->join();
        delete thread_;
        delete server_;
        delete service_;
        delete config_;
        delete tmp_;
    }
    static httplib::Client client() { return httplib::Client("127.0.0.1", port_); }

    static lcot::testing::TempDir* tmp_;
    static AppConfig* config_;
    static Service* service_;
    static httplib::Server* server_;
    static std::thread* thread_;
    static int port_;
};

lcot::testing::TempDir* ServiceTest::tmp_ = nullptr;
AppConfig* ServiceTest::config_ = nullptr;
Service* ServiceTest::service_ = nullptr;
httplib::Server* ServiceTest::server_ = nullptr;
std::thread* ServiceTest::thread_ = nullptr;
int ServiceTest::port_ = 0;

TEST_F(ServiceTest, SearchFindsInstanton) {
    auto res = client().Get("/search?q=instanton&k=5");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    auto body = json::parse(res->body);
    ASSERT_FALSE(body["hits"].empty());
    EXPECT_FALSE(body["no_coverage"].get<bool>());
    EXPECT_NE(body["hits"][0]["question"].get<std::string>().find("instanton"), std::string::npos);
    EXPECT_EQ(body["hits"][0]["course_id"], "qm101");
}

TEST_F(ServiceTest, SearchWithoutCoverage) {
    auto res = client().Get("/search?q=zebra");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_TRUE(json::parse(res->body)["no_coverage"].get<bool>());
}

TEST_F(ServiceTest, SearchValidation) {
    auto res = client().Get("/search?q=");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
    EXPECT_EQ(json::parse(res->body)["code"], "validation");
    res = client().Get("/search?q=spin&k=0");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
}

TEST_F(ServiceTest, ChainRoundTrip) {
    auto hits = json::parse(client().Get("/search?q=tunneling&k=1")->body)["hits"];
    ASSERT_EQ(hits.size(), 1u);
    auto id = hits[0]["qa_id"].get<std::string>();
    auto res = client().Get("/chain/" + id);
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    auto qa = json::parse(res->body);
    EXPECT_EQ(qa["qa_id"], id);
    EXPECT_FALSE(qa["chain_text"].get<std::string>().empty());
    res = client().Get("/chain/0000000000000000");
    EXPECT_EQ(res->status, 404);
    EXPECT_EQ(json::parse(res->body)["code"], "not_found");
}

TEST_F(ServiceTest, StoredArticleAndGeneration) {
    auto res = client().Get("/article/Quantum%20Tunneling");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body)["keyword"], "Quantum Tunneling");

    res = client().Get("/article/instanton");
    EXPECT_EQ(res->status, 404);
    res = client().Post("/article", R"({"keyword": "instanton"})", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 201);
    res = client().Get("/article/instanton");
    EXPECT_EQ(res->status, 200);

    res = client().Post("/article", R"({"keyword": "zebra"})", "application/json");
    EXPECT_EQ(res->status, 404);
    EXPECT_EQ(json::parse(res->body)["code"], "no_coverage");
    res = client().Post("/article", "not json", "application/json");
    EXPECT_EQ(res->status, 400);
}

TEST_F(ServiceTest, Hierarchy) {
    auto res = client().Get("/hierarchy");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    auto tree = json::parse(res->body);
    EXPECT_EQ(tree["root"]["size"], 6);
}

TEST_F(ServiceTest, UnknownRouteGivesEnvelope) {
    auto res = client().Get("/nowhere");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 404);
    auto body = json::parse(res->body);
    EXPECT_EQ(body["code"], "not_found");
    EXPECT_TRUE(body.contains("message"));
}

TEST_F(ServiceTest, McpOverHttp) {
    auto res = client().Post("/mcp", R"({"jsonrpc":"2.0","id":1,"method":"tools/list"})", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body)["result"]["tools"].size(), 7u);
    res = client().Post("/mcp", R"({"jsonrpc":"2.0","method":"notifications/initialized"})", "application/json");
    EXPECT_EQ(res->status, 202);
}

TEST(Service, StatusMapping) {
    EXPECT_EQ(http_status(ErrorCode::validation), 400);
    EXPECT_EQ(http_status(ErrorCode::not_found), 404);
    EXPECT_EQ(http_status(ErrorCode::no_coverage), 404);
    EXPECT_EQ(http_status(ErrorCode::backend), 502);
    EXPECT_EQ(http_status(ErrorCode::runtime), 500);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(exit_code_for(ErrorCode::validation), 2);
    EXPECT_EQ(exit_code_for(ErrorCode::no_coverage), 1);
    EXPECT_EQ(exit_code_for(ErrorCode::not_found), 1);
    EXPECT_EQ(exit_code_for(ErrorCode::backend), 3);
    EXPECT_EQ(cli({}).rc, 2);
    EXPECT_EQ(cli({"--help"}).rc, 0);
    EXPECT_EQ(cli({"frobnicate"}).rc, 2);
    EXPECT_EQ(cli({"search", "--keyword", "x"}).rc, 2);  // no index source
}

TEST(Cli, PipelineSearchArticle) {
    lcot::testing::TempDir tmp;
    auto config = write_config(tmp, tmp / "out").string();
    auto run = cli({"pipeline", "--config", config});
    ASSERT_EQ(run.rc, 0) << run.err;
    EXPECT_NE(run.out.find("complete"), std::string::npos);

    auto hit = cli({"search", "--config", config, "--keyword", "instanton", "-k", "2"});
    EXPECT_EQ(hit.rc, 0) << hit.err;
    EXPECT_NE(hit.out.find("instanton"), std::string::npos);
    auto miss = cli({"search", "--index", (tmp / "out" / "index").string(), "--keyword", "zebra"});
    EXPECT_EQ(miss.rc, 1);
    auto js = cli({"search", "--config", config, "--keyword", "spin", "--json"});
    EXPECT_EQ(js.rc, 0);
    EXPECT_FALSE(json::parse(js.out)["hits"].empty());

    auto art = cli({"article", "--config", config, "--keyword", "Josephson Junction"});
    EXPECT_EQ(art.rc, 0) << art.err;
    EXPECT_NE(art.out.find("# Josephson Junction"), std::string::npos);
    auto none = cli({"article", "--config", config, "--keyword", "zebra"});
    EXPECT_EQ(none.rc, 1);
    auto base = cli({"article", "--config", config, "--keyword", "zebra", "--baseline", "--json"});
    EXPECT_EQ(base.rc, 0) << base.err;
    EXPECT_EQ(json::parse(base.out)["keyword"], "zebra");

    auto bad = cli({"pipeline", "--config", (tmp / "missing.json").string()});
    EXPECT_NE(bad.rc, 0);
}

TEST(Cli, ClusterAndEval) {
    lcot::testing::TempDir tmp;
    auto out = (tmp / "tree.json").string();
    auto r = cli({"cluster", "--demo", "paired-cliques", "--out", out, "--seed", "3"});
    ASSERT_EQ(r.rc, 0) << r.err;
    auto tree = read_json_file(out);
    EXPECT_EQ(tree["root"]["children"].size(), 2u);
    EXPECT_EQ(cli({"cluster", "--out", out}).rc, 2);
    EXPECT_EQ(cli({"cluster", "--demo", "nope", "--out", out}).rc, 2);

    const fs::path fx = fs::path(LCOT_FIXTURE_DIR) / "eval";
    auto e = cli({"eval", "--plato", (fx / "plato").string(), "--baseline", (fx / "baseline").string(),
                  "--judge-transcript", (fx / "judge_transcript.jsonl").string(), "--out", (tmp / "eval").string()});
    ASSERT_EQ(e.rc, 0) << e.err;
    std::ifstream expected(fx / "expected.csv");
    std::ostringstream s;
    s << expected.rdbuf();
    EXPECT_EQ(e.out, s.str());
    EXPECT_TRUE(fs::exists(tmp / "eval" / "report.json"));
    EXPECT_EQ(cli({"eval", "--plato", (fx / "plato").string(), "--baseline", (fx / "baseline").string()}).rc, 2);
}

TEST(Cli, McpStdio) {
    lcot::testing::TempDir tmp;
    auto config = write_config(tmp, tmp / "out").string();
    auto r = cli({"mcp", "--config", config, "--stdio"},
                 "{\"jsonrpc\":\"2.0\",\"id\":1,\"method\":\"ping\"}\n"
                 "{\"jsonrpc\":\"2.0\",\"id\":2,\"method\":\"tools/call\",\"params\":{\"name\":\"list_supported_languages\",\"arguments\":{}}}\n");
    ASSERT_EQ(r.rc, 0) << r.err;
    auto lines = split_lines(r.out);
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(json::parse(lines[0])["id"], 1);
    EXPECT_EQ(json::parse(lines[1])["id"], 2);
}

TEST(Config, HashIgnoresOutputDirectory) {
    lcot::testing::TempDir tmp;
    EXPECT_EQ(demo_config(tmp / "a").config_hash, demo_config(tmp / "b").config_hash);
}
