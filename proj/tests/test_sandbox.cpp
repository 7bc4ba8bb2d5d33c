#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>

#include "lcot/common/error.hpp"
#include "lcot/sandbox/sandbox.hpp"
#include "support.hpp"

using namespace lcot;
using namespace lcot::sandbox;

namespace {

Sandbox make_sandbox(const lcot::testing::TempDir& dir) {
    auto c = SandboxConfig::defaults();
    c.root = dir.path();
    return Sandbox(c);
}

#define REQUIRE_PYTHON(sb) \
    if (!(sb).supports("python")) GTEST_SKIP() << "python3 not installed"

} // namespace

TEST(Sandbox, LanguagesSortedUnique) {
    SandboxConfig c;
    c.interpreters = {{"zeta", {"/bin/sh", "{file}"}, ".sh"}, {"alpha", {"/bin/sh", "{file}"}, ".sh"}};
    Sandbox sb(c);
    EXPECT_EQ(sb.languages(), (std::vector<std::string>{"alpha", "zeta"}));
    c.interpreters.push_back({"alpha", {"/bin/sh"}, ""});
    EXPECT_THROW(Sandbox{c}, Error);
}

TEST(Sandbox, RunsShellSnippet) {
    lcot::testing::TempDir dir;
    SandboxConfig c;
    c.root = dir.path();
    c.interpreters = {{"sh", {"/bin/sh", "{file}"}, ".sh"}};
    Sandbox sb(c);
    auto r = sb.execute("sh", "echo hello; echo oops >&2; exit 3", 5);
    EXPECT_EQ(r.stdout_text, "hello\n");
    EXPECT_EQ(r.stderr_text, "oops\n");
    EXPECT_EQ(r.exit_status, 3);
    EXPECT_FALSE(r.timed_out);
    // scratch dirs are removed
    EXPECT_TRUE(std::filesystem::is_empty(dir.path()));
}

TEST(Sandbox, RejectsUnknownLanguageAndBadTimeout) {
    lcot::testing::TempDir dir;
    auto sb = make_sandbox(dir);
    try {
        sb.execute("cobol", "x", 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::validation);
    }
    SandboxConfig c;
    c.interpreters = {{"sh", {"/bin/sh", "{file}"}, ".sh"}};
    Sandbox sh(c);
    EXPECT_THROW(sh.execute("sh", "true", -1), Error);
}

TEST(Sandbox, PythonHelloWorld) {
    lcot::testing::TempDir dir;
    auto sb = make_sandbox(dir);
    REQUIRE_PYTHON(sb);
    auto r = sb.execute("python", "print(6*7)");
    EXPECT_EQ(r.exit_status, 0) << r.stderr_text;
    EXPECT_EQ(r.stdout_text, "42\n");
    EXPECT_EQ(r.language, "python");
}

TEST(Sandbox, InfiniteLoopKilledWithinDeadline) {
    lcot::testing::TempDir dir;
    auto sb = make_sandbox(dir);
    REQUIRE_PYTHON(sb);
    auto t0 = std::chrono::steady_clock::now();
    auto r = sb.execute("python", "while True:\n    pass\n", 1.0);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_TRUE(r.timed_out);
    EXPECT_EQ(r.exit_status, 128 + 9);
    EXPECT_LT(wall, 1.0 + 2.0);
}

TEST(Sandbox, ChildProcessesDieWithTheGroup) {
    lcot::testing::TempDir dir;
    SandboxConfig c;
    c.root = dir.path();
    c.interpreters = {{"sh", {"/bin/sh", "{file}"}, ".sh"}};
    Sandbox sb(c);
    auto t0 = std::chrono::steady_clock::now();
    // The background sleeper keeps the pipe open; it must be killed too.
    auto r = sb.execute("sh", "sleep 30 & sleep 30", 0.5);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_TRUE(r.timed_out);
    EXPECT_LT(wall, 2.5);
}

TEST(Sandbox, NetworkBlocked) {
    lcot::testing::TempDir dir;
    auto sb = make_sandbox(dir);
    REQUIRE_PYTHON(sb);
    auto r = sb.execute("python",
                        "import socket\n"
                        "try:\n"
                        "    s = socket.create_connection(('1.1.1.1', 80), timeout=2)\n"
                        "    print('connected')\n"
                        "except OSError as e:\n"
                        "    print('blocked', e.errno)\n",
                        5);
    EXPECT_EQ(r.exit_status, 0) << r.stderr_text;
    EXPECT_EQ(r.stdout_text.rfind("blocked", 0), 0u) << r.stdout_text;
}

TEST(Sandbox, UnixSocketsStillAllowed) {
    lcot::testing::TempDir dir;
    auto sb = make_sandbox(dir);
    REQUIRE_PYTHON(sb);
    auto r = sb.execute("python", "import socket\na, b = socket.socketpair()\na.send(b'x')\nprint(b.recv(1))\n", 5);
    EXPECT_EQ(r.stdout_text, "b'x'\n") << r.stderr_text;
}

TEST(Sandbox, MemoryCapEnforced) {
    lcot::testing::TempDir dir;
    auto c = SandboxConfig::defaults();
    c.root = dir.path();
    c.memory_bytes = std::size_t{256} << 20;
    Sandbox sb(c);
    REQUIRE_PYTHON(sb);
    auto r = sb.execute("python", "x = bytearray(1024 * 1024 * 1024)\nprint('allocated')\n", 10);
    EXPECT_NE(r.exit_status, 0);
    EXPECT_EQ(r.stdout_text.find("allocated"), std::string::npos);
    EXPECT_NE(r.stderr_text.find("MemoryError"), std::string::npos) << r.stderr_text;
}

TEST(Sandbox, OutputCapTruncates) {
    lcot::testing::TempDir dir;
    SandboxConfig c;
    c.root = dir.path();
    c.output_cap = 1000;
    c.interpreters = {{"sh", {"/bin/sh", "{file}"}, ".sh"}};
    Sandbox sb(c);
    auto r = sb.execute("sh", "i=0; while [ $i -lt 500 ]; do echo 0123456789; i=$((i+1)); done", 5);
    EXPECT_EQ(r.stdout_text.size(), 1000u);
    EXPECT_TRUE(r.truncated);
    EXPECT_EQ(r.exit_status, 0);
}

TEST(Sandbox, CleanEnvironment) {
    lcot::testing::TempDir dir;
    SandboxConfig c;
    c.root = dir.path();
    c.interpreters = {{"sh", {"/bin/sh", "{file}"}, ".sh"}};
    Sandbox sb(c);
    ::setenv("LCOT_SECRET_TOKEN", "s3cret", 1);
    auto r = sb.execute("sh", "env", 5);
    ::unsetenv("LCOT_SECRET_TOKEN");
    EXPECT_EQ(r.stdout_text.find("s3cret"), std::string::npos);
}

TEST(Sandbox, ParallelSleepsOverlapAndKeepOrder) {
    lcot::testing::TempDir dir;
    auto sb = make_sandbox(dir);
    REQUIRE_PYTHON(sb);
    ASSERT_GE(sb.config().workers, 8u);
    std::vector<std::string> codes;
    for (int i = 0; i < 8; ++i) codes.push_back("import time\ntime.sleep(1)\nprint(" + std::to_string(i) + ")\n");
    auto t0 = std::chrono::steady_clock::now();
    auto rs = sb.execute_parallel("python", codes, 10);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ASSERT_EQ(rs.size(), 8u);
    for (int i = 0; i < 8; ++i) EXPECT_EQ(rs[i].stdout_text, std::to_string(i) + "\n");
    EXPECT_LT(wall, 8.0);
}

TEST(Sandbox, ResultJsonRoundTrip) {
    ExecResult r;
    r.language = "python";
    r.exit_status = 1;
    r.stdout_text = "a";
    r.stderr_text = "b";
    r.elapsed_s = 0.25;
    r.timed_out = true;
    nlohmann::json j = r;
    EXPECT_EQ(j["stdout"], "a");
    EXPECT_EQ(j["timed_out"], true);
    auto back = j.get<ExecResult>();
    EXPECT_EQ(back.stderr_text, "b");
    EXPECT_DOUBLE_EQ(back.elapsed_s, 0.25);
}
