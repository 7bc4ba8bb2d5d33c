#include <gtest/gtest.h>

#include <atomic>
#include <future>
#include <thread>

#include <httplib.h>

#include "lcot/gateway/http_backend.hpp"
#include "lcot/gateway/replay_backend.hpp"
#include "support.hpp"

using namespace lcot;
using namespace lcot::gateway;
using lcot::testing::add_mock;
using lcot::testing::script;
using lcot::testing::spec_of;

namespace {

ChatRequest ask(std::string user, std::optional<std::int64_t> seed = std::nullopt) {
    auto r = make_request("sys", std::move(user), kSolverTemperature);
    r.seed = seed;
    return r;
}

} // namespace

TEST(Gateway, RegisterAndComplete) {
    Gateway gw;
    EXPECT_EQ(gw.register_backend(make_mock("m1", script({}, "hello"))), "m1");
    EXPECT_EQ(gw.complete("m1", ask("anything")).text, "hello");
    EXPECT_EQ(gw.complete("m1", ask("anything")).backend_id, "m1");
}

TEST(Gateway, DuplicateIdRejected) {
    Gateway gw;
    gw.register_backend(make_mock("m1", script({})));
    EXPECT_THROW(gw.register_backend(make_mock("m1", script({}))), Error);
}

TEST(Gateway, ListCountsBackends) {
    Gateway gw;
    for (auto id : {"a", "b", "c"}) gw.register_backend(make_mock(id, script({})));
    EXPECT_EQ(gw.list().size(), 3u);
}

TEST(Gateway, InvalidSpecRejected) {
    Gateway gw;
    auto s = spec_of("x");
    s.max_concurrency = 0;
    EXPECT_THROW(gw.register_backend(std::make_unique<CallbackBackend>(s, [](const ChatRequest&) { return ""; })),
                 Error);
    s.max_concurrency = 1;
    s.timeout_s = 0;
    EXPECT_THROW(gw.register_backend(std::make_unique<CallbackBackend>(s, [](const ChatRequest&) { return ""; })),
                 Error);
}

TEST(Gateway, UnknownBackendIsNotRetriable) {
    Gateway gw;
    try {
        gw.complete("nope", ask("x"));
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.kind(), FailureKind::unknown_backend);
        EXPECT_FALSE(e.retriable());
    }
}

TEST(Gateway, RequestValidation) {
    Gateway gw;
    gw.register_backend(make_mock("m1", script({})));
    EXPECT_THROW(gw.complete("m1", ask("")), Error);
    auto r = ask("x");
    r.temperature = 2.5;
    EXPECT_THROW(gw.complete("m1", r), Error);
}

TEST(Mock, ScriptedRule) {
    Gateway gw;
    gw.register_backend(make_mock("m1", script({{"capital of France", "Paris"}})));
    EXPECT_EQ(gw.complete("m1", ask("What is the capital of France?")).text, "Paris");
    EXPECT_EQ(gw.complete("m1", ask("What is the capital of Peru?")).text, "OK");
}

TEST(Mock, FirstRuleWins) {
    Gateway gw;
    gw.register_backend(make_mock("m1", script({{"pendulum", "first"}, {"pendulum length", "second"}})));
    EXPECT_EQ(gw.complete("m1", ask("a pendulum length question")).text, "first");
}

TEST(Mock, DefaultForEveryPrompt) {
    Gateway gw;
    gw.register_backend(make_mock("m1", script({}, "OK")));
    for (auto p : {"a", "b", "something else entirely"}) EXPECT_EQ(gw.complete("m1", ask(p)).text, "OK");
}

TEST(Mock, EchoSlot) {
    Gateway gw;
    gw.register_backend(make_mock("m1", script({{"", "you said: {prompt}"}})));
    EXPECT_EQ(gw.complete("m1", ask("ping")).text, "you said: ping");
}

TEST(Mock, DeterministicForSeed) {
    Gateway gw;
    gw.register_backend(make_mock("m1", script({{"", "{rand:1000000} {rand:1000000} {seed}"}}, "", 7)));
    for (int i = 0; i < 20; ++i) {
        auto r = ask("request " + std::to_string(i), i % 3);
        EXPECT_EQ(gw.complete("m1", r).text, gw.complete("m1", r).text);
    }
    EXPECT_NE(gw.complete("m1", ask("same", 1)).text, gw.complete("m1", ask("same", 2)).text);
}

TEST(Mock, TemplateSlots) {
    auto r = ask("Role: x\nTopic: Simple pendulum\nQuestion: say \"hi\"\nQuestion: again");
    EXPECT_EQ(render_mock_template("{field:Topic}", r, 0), "Simple pendulum");
    EXPECT_EQ(render_mock_template("{json:Question}", r, 0), "say \\\"hi\\\"");
    EXPECT_EQ(render_mock_template("{lines:Question:}", r, 0), "Question: say \"hi\"\nQuestion: again");
    EXPECT_EQ(render_mock_template("{{literal}} {unknown}", r, 0), "{literal} {unknown}");
    EXPECT_EQ(render_mock_template("{hash:10}", r, 1), render_mock_template("{hash:10}", r, 99));
}

TEST(Mock, SlotsInsideJsonObjects) {
    auto r = ask("Topic: Spin\nSketch: a b");
    EXPECT_EQ(render_mock_template(R"([{"q": "{json:Sketch} x"},{"t": "{field:Topic}"}])", r, 0),
              R"([{"q": "a b x"},{"t": "Spin"}])");
}

TEST(Mock, ScriptedFailures) {
    Gateway gw;
    gw.set_sleeper([](auto) {});
    MockRule t{"slow", "", MockFailure::timeout};
    MockRule x{"bad", "", MockFailure::rejected};
    gw.register_backend(make_mock("m1", script({t, x})));
    try {
        gw.complete("m1", ask("slow one"));
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.kind(), FailureKind::timeout);
        EXPECT_EQ(e.backend_id(), "m1");
        EXPECT_TRUE(e.retriable());
    }
    try {
        gw.complete("m1", ask("bad one"));
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_FALSE(e.retriable());
    }
}

TEST(Mock, ScriptJsonRoundTrip) {
    auto j = nlohmann::json::parse(R"({"seed": 3, "rules": [{"pattern": "a", "response": "b"},
        {"pattern": "t", "response": "", "fail": "timeout"}], "default_response": "d"})");
    auto s = j.get<MockScript>();
    EXPECT_EQ(s.seed, 3);
    ASSERT_EQ(s.rules.size(), 2u);
    EXPECT_EQ(s.rules[1].fail, MockFailure::timeout);
    EXPECT_EQ(nlohmann::json(s).get<MockScript>().default_response, "d");
}

TEST(Gateway, ConcurrencyBound) {
    Gateway gw;
    std::atomic<int> in_flight{0}, peak{0};
    gw.register_backend(std::make_unique<CallbackBackend>(spec_of("slow", "p", 2), [&](const ChatRequest&) {
        int now = ++in_flight;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {}
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
        --in_flight;
        return std::string("done");
    }));
    std::vector<std::future<std::string>> futures;
    for (int i = 0; i < 12; ++i)
        futures.push_back(std::async(std::launch::async, [&] { return gw.complete("slow", ask("x")).text; }));
    for (auto& f : futures) EXPECT_EQ(f.get(), "done");
    EXPECT_LE(peak.load(), 2);
    EXPECT_GE(peak.load(), 1);
}

TEST(Gateway, RetriesTimeoutsWithBackoff) {
    Gateway gw;
    std::vector<long long> sleeps;
    gw.set_sleeper([&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
    std::atomic<int> calls{0};
    gw.register_backend(std::make_unique<CallbackBackend>(spec_of("flaky"), [&](const ChatRequest&) {
        if (++calls < 3) throw BackendError(FailureKind::timeout, "flaky", "timed out");
        return std::string("finally");
    }));
    auto r = gw.complete("flaky", ask("x"));
    EXPECT_EQ(r.text, "finally");
    EXPECT_EQ(calls.load(), 3);
    EXPECT_EQ(sleeps, (std::vector<long long>{1000, 2000}));
}

TEST(Gateway, GivesUpAfterThreeAttempts) {
    Gateway gw;
    gw.set_sleeper([](auto) {});
    int calls = 0;
    gw.register_backend(std::make_unique<CallbackBackend>(spec_of("down"), [&](const ChatRequest&) -> std::string {
        ++calls;
        throw BackendError(FailureKind::transport, "down", "connection refused");
    }));
    EXPECT_THROW(gw.complete("down", ask("x")), BackendError);
    EXPECT_EQ(calls, 3);
}

TEST(Gateway, RejectionNotRetried) {
    Gateway gw;
    gw.set_sleeper([](auto) {});
    int calls = 0;
    gw.register_backend(std::make_unique<CallbackBackend>(spec_of("strict"), [&](const ChatRequest&) -> std::string {
        ++calls;
        throw BackendError(FailureKind::rejected, "strict", "400");
    }));
    EXPECT_THROW(gw.complete("strict", ask("x")), BackendError);
    EXPECT_EQ(calls, 1);
}

TEST(Http, WireRequestShape) {
    auto spec = spec_of("h", "acme");
    spec.model_name = "model-x";
    WireFormat wire;
    wire.max_tokens_field = "max_output_tokens";
    auto body = build_wire_request(spec, wire, ask("hello", 5));
    EXPECT_EQ(body["model"], "model-x");
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_EQ(body["messages"][1]["content"], "hello");
    EXPECT_EQ(body["max_output_tokens"], 4096);
    EXPECT_EQ(body["seed"], 5);
    EXPECT_EQ(api_key_env_var("acme-ai"), "LCOT_API_KEY_ACME_AI");
}

TEST(Http, LocalServerRoundTrip) {
    httplib::Server server;
    server.Post("/v1/chat", [](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        std::string user = body["messages"].back()["content"];
        if (user == "reject") {
            res.status = 400;
            return;
        }
        if (user == "crash") {
            res.status = 503;
            return;
        }
        nlohmann::json out = {{"choices", {{{"message", {{"content", "echo " + user}}}}}},
                              {"usage", {{"total_tokens", 11}}}};
        res.set_content(out.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto spec = spec_of("h", "local");
    spec.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
    spec.timeout_s = 5;
    HttpBackend backend(spec);
    auto r = backend.complete(ask("hi"));
    EXPECT_EQ(r.text, "echo hi");
    EXPECT_EQ(r.token_count, 11);
    try {
        backend.complete(ask("reject"));
        ADD_FAILURE();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.kind(), FailureKind::rejected);
    }
    try {
        backend.complete(ask("crash"));
        ADD_FAILURE();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.kind(), FailureKind::transport);
    }
    server.stop();
    t.join();
}

TEST(Replay, RecordThenReplay) {
    lcot::testing::TempDir dir;
    auto recorder = std::make_unique<RecordingBackend>(make_mock("m1", script({{"", "answer to {prompt}"}})));
    auto* raw = recorder.get();
    {
        Gateway gw;
        gw.register_backend(std::move(recorder));
        gw.complete("m1", ask("q1"));
        gw.complete("m1", ask("q2"));
        save_transcript(dir / "t.jsonl", raw->transcript());
    }
    auto entries = load_transcript(dir / "t.jsonl");
    ASSERT_EQ(entries.size(), 2u);
    ReplayBackend replay(spec_of("r"), entries);
    EXPECT_EQ(replay.complete(ask("q2")).text, "answer to q2");
    try {
        replay.complete(ask("never asked"));
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.kind(), FailureKind::rejected);
    }
}
