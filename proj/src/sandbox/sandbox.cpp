#include "lcot/sandbox/sandbox.hpp"

#include <fcntl.h>
#include <linux/audit.h>
#include <linux/filter.h>
#include <linux/seccomp.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/resource.h>
#include <sys/socket.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "lcot/common/error.hpp"
#include "lcot/common/parallel.hpp"

namespace lcot::sandbox {
namespace {

using Clock = std::chrono::steady_clock;

#if defined(__x86_64__)
constexpr std::uint32_t kAuditArch = AUDIT_ARCH_X86_64;
#elif defined(__aarch64__)
constexpr std::uint32_t kAuditArch = AUDIT_ARCH_AARCH64;
#else
constexpr std::uint32_t kAuditArch = 0;
#endif

// Absolute path of an executable found on PATH, or empty.
std::string find_program(const std::string& program) {
    if (program.find('/') != std::string::npos) return ::access(program.c_str(), X_OK) == 0 ? program : "";
    const char* path = std::getenv("PATH");
    if (!path) return "";
    std::string p = path;
    std::size_t start = 0;
    while (start <= p.size()) {
        auto end = p.find(':', start);
        if (end == std::string::npos) end = p.size();
        auto dir = p.substr(start, end - start);
        if (!dir.empty() && ::access((dir + "/" + program).c_str(), X_OK) == 0) return dir + "/" + program;
        start = end + 1;
    }
    return "";
}

// Refuses socket(AF_INET|AF_INET6, ...) with EACCES; everything else passes.
bool install_socket_filter() {
    if (kAuditArch == 0) return false;
    struct sock_filter filter[] = {
        BPF_STMT(BPF_LD | BPF_W | BPF_ABS, offsetof(struct seccomp_data, arch)),
        BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, kAuditArch, 1, 0),
        BPF_STMT(BPF_RET | BPF_K, SECCOMP_RET_KILL_PROCESS),
        BPF_STMT(BPF_LD | BPF_W | BPF_ABS, offsetof(struct seccomp_data, nr)),
        BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, __NR_socket, 0, 4),
        BPF_STMT(BPF_LD | BPF_W | BPF_ABS, offsetof(struct seccomp_data, args[0])),
        BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, AF_INET, 1, 0),
        BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, AF_INET6, 0, 1),
        BPF_STMT(BPF_RET | BPF_K, SECCOMP_RET_ERRNO | (EACCES & SECCOMP_RET_DATA)),
        BPF_STMT(BPF_RET | BPF_K, SECCOMP_RET_ALLOW),
    };
    struct sock_fprog prog = {static_cast<unsigned short>(sizeof(filter) / sizeof(filter[0])), filter};
    if (::prctl(PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0) return false;
    return ::syscall(SYS_seccomp, SECCOMP_SET_MODE_FILTER, 0, &prog) == 0;
}

// Only async-signal-safe calls: the parent may be multithreaded.
[[noreturn]] void child_fail(const char* what) {
    static const char prefix[] = "sandbox: setup failed: ";
    (void)!::write(STDERR_FILENO, prefix, sizeof prefix - 1);
    (void)!::write(STDERR_FILENO, what, std::strlen(what));
    (void)!::write(STDERR_FILENO, "\n", 1);
    ::_exit(127);
}

void set_limit(int resource, rlim_t value) {
    struct rlimit rl {value, value};
    ::setrlimit(resource, &rl);
}

std::string random_suffix() {
    static thread_local std::mt19937_64 rng(std::random_device{}() ^ std::hash<std::thread::id>{}(std::this_thread::get_id()));
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (int i = 0; i < 12; ++i) s += digits[rng() % 16];
    return s;
}

} // namespace

void to_json(nlohmann::json& j, const Interpreter& i) {
    j = {{"language", i.language}, {"command", i.command}, {"extension", i.extension}};
}

void from_json(const nlohmann::json& j, Interpreter& i) {
    i.language = j.at("language").get<std::string>();
    i.command = j.at("command").get<std::vector<std::string>>();
    i.extension = j.value("extension", "");
    if (i.language.empty() || i.command.empty()) throw validation_error("interpreter needs a language and a command");
}

SandboxConfig SandboxConfig::defaults() {
    SandboxConfig c;
    if (!find_program("python3").empty()) c.interpreters.push_back({"python", {"python3", "-I", "-B", "{file}"}, ".py"});
    c.workers = std::max<std::size_t>(default_workers(), 8);
    return c;
}

void to_json(nlohmann::json& j, const SandboxConfig& c) {
    j = {{"interpreters", c.interpreters}, {"memory_bytes", c.memory_bytes}, {"output_cap", c.output_cap},
         {"workers", c.workers},           {"isolate_network", c.isolate_network}, {"root", c.root.string()}};
}

void from_json(const nlohmann::json& j, SandboxConfig& c) {
    c = SandboxConfig::defaults();
    if (j.contains("interpreters")) c.interpreters = j.at("interpreters").get<std::vector<Interpreter>>();
    c.memory_bytes = j.value("memory_bytes", c.memory_bytes);
    c.output_cap = j.value("output_cap", c.output_cap);
    c.workers = j.value("workers", c.workers);
    c.isolate_network = j.value("isolate_network", c.isolate_network);
    c.root = j.value("root", std::string{});
    if (c.workers == 0) throw validation_error("sandbox workers must be positive");
}

void to_json(nlohmann::json& j, const ExecResult& r) {
    j = {{"language", r.language},     {"exit_status", r.exit_status}, {"stdout", r.stdout_text},
         {"stderr", r.stderr_text},    {"elapsed_s", r.elapsed_s},     {"timed_out", r.timed_out},
         {"truncated", r.truncated}};
}

void from_json(const nlohmann::json& j, ExecResult& r) {
    r.language = j.at("language").get<std::string>();
    r.exit_status = j.at("exit_status").get<int>();
    r.stdout_text = j.at("stdout").get<std::string>();
    r.stderr_text = j.at("stderr").get<std::string>();
    r.elapsed_s = j.at("elapsed_s").get<double>();
    r.timed_out = j.at("timed_out").get<bool>();
    r.truncated = j.value("truncated", false);
}

Sandbox::Sandbox(SandboxConfig config) : config_(std::move(config)) {
    std::set<std::string> seen;
    for (const auto& i : config_.interpreters)
        if (!seen.insert(i.language).second) throw validation_error("duplicate sandbox language " + i.language);
}

std::vector<std::string> Sandbox::languages() const {
    std::set<std::string> out;
    for (const auto& i : config_.interpreters) out.insert(i.language);
    return {out.begin(), out.end()};
}

bool Sandbox::supports(const std::string& language) const {
    return std::any_of(config_.interpreters.begin(), config_.interpreters.end(),
                       [&](const Interpreter& i) { return i.language == language; });
}

const Interpreter& Sandbox::interpreter(const std::string& language) const {
    for (const auto& i : config_.interpreters)
        if (i.language == language) return i;
    throw validation_error("unsupported language: " + language);
}

std::filesystem::path Sandbox::scratch_root() const {
    if (!config_.root.empty()) return config_.root;
    if (const char* env = std::getenv(kRootEnv); env && *env) return env;
    return std::filesystem::temp_directory_path();
}

ExecResult Sandbox::execute(const std::string& language, const std::string& code, double timeout_s) const {
    const auto& interp = interpreter(language);
    if (!(timeout_s >= 0) || !std::isfinite(timeout_s)) throw validation_error("timeout must be a nonnegative number");

    auto dir = scratch_root() / ("lcot-sbx-" + random_suffix());
    std::filesystem::create_directories(dir);
    struct Cleanup {
        std::filesystem::path dir;
        ~Cleanup() {
            std::error_code ec;
            std::filesystem::remove_all(dir, ec);
        }
    } cleanup{dir};
    auto file = dir / ("main" + interp.extension);
    {
        std::ofstream out(file, std::ios::binary);
        out << code;
        if (!out) throw Error(ErrorCode::runtime, "cannot write snippet to " + file.string());
    }

    std::vector<std::string> args;
    for (const auto& a : interp.command) args.push_back(a == "{file}" ? file.string() : a);
    const auto program = find_program(args.front());
    if (program.empty()) throw Error(ErrorCode::runtime, "interpreter not found: " + args.front());
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    std::string home = "HOME=" + dir.string();
    std::vector<std::string> env_strings = {"PATH=/usr/local/bin:/usr/bin:/bin", home, "LANG=C.UTF-8",
                                            "PYTHONDONTWRITEBYTECODE=1"};
    std::vector<char*> envp;
    for (auto& e : env_strings) envp.push_back(e.data());
    envp.push_back(nullptr);

    int out_pipe[2], err_pipe[2];
    if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0)
        throw Error(ErrorCode::runtime, std::string("pipe: ") + std::strerror(errno));

    const auto cpu_limit = static_cast<rlim_t>(std::ceil(timeout_s)) + 1;
    const auto started = Clock::now();
    pid_t pid = ::fork();
    if (pid < 0) throw Error(ErrorCode::runtime, std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::dup2(err_pipe[1], STDERR_FILENO);
        int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
        if (::chdir(dir.c_str()) != 0) child_fail("chdir");
        if (config_.isolate_network) {
            // Best effort: an empty network namespace; the seccomp filter covers kernels that refuse.
            (void)::unshare(CLONE_NEWUSER | CLONE_NEWNET);
            if (!install_socket_filter()) child_fail("seccomp");
        }
        set_limit(RLIMIT_AS, config_.memory_bytes);
        set_limit(RLIMIT_CPU, cpu_limit);
        set_limit(RLIMIT_NOFILE, 64);
        set_limit(RLIMIT_FSIZE, rlim_t{16} << 20);
        set_limit(RLIMIT_CORE, 0);
        ::execve(program.c_str(), argv.data(), envp.data());
        child_fail("exec");
    }
    ::setpgid(pid, pid);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);

    ExecResult r;
    r.language = language;
    const auto deadline = started + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(timeout_s));
    struct pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    std::string* sinks[2] = {&r.stdout_text, &r.stderr_text};
    int open_fds = 2;
    bool killed = false;
    char buf[8192];
    while (open_fds > 0) {
        auto now = Clock::now();
        int wait_ms;
        if (!killed && now >= deadline) {
            ::kill(-pid, SIGKILL);
            killed = r.timed_out = true;
        }
        if (killed) wait_ms = 200;  // drain what is left after the kill
        else wait_ms = int(std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count()) + 1;
        int n = ::poll(fds, 2, wait_ms);
        if (n < 0 && errno == EINTR) continue;
        if (n == 0 && killed) break;
        for (int k = 0; k < 2; ++k) {
            if (fds[k].fd < 0 || !(fds[k].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            ssize_t got = ::read(fds[k].fd, buf, sizeof buf);
            if (got <= 0) {
                ::close(fds[k].fd);
                fds[k].fd = -1;
                --open_fds;
                continue;
            }
            auto& sink = *sinks[k];
            std::size_t room = config_.output_cap > sink.size() ? config_.output_cap - sink.size() : 0;
            sink.append(buf, std::min<std::size_t>(room, std::size_t(got)));
            if (std::size_t(got) > room) r.truncated = true;
        }
    }
    for (auto& f : fds)
        if (f.fd >= 0) ::close(f.fd);

    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    // Reap anything the snippet left running in its group.
    ::kill(-pid, SIGKILL);
    r.elapsed_s = std::chrono::duration<double>(Clock::now() - started).count();
    if (WIFEXITED(status)) r.exit_status = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) r.exit_status = 128 + WTERMSIG(status);
    if (r.timed_out) r.elapsed_s = std::max(r.elapsed_s, timeout_s);
    return r;
}

std::vector<ExecResult> Sandbox::execute_parallel(const std::string& language, const std::vector<std::string>& codes,
                                                  double timeout_s) const {
    if (codes.empty()) throw validation_error("code list is empty");
    interpreter(language);
    std::vector<ExecResult> out(codes.size());
    parallel_for(codes.size(), config_.workers, [&](std::size_t i) {
        try {
            out[i] = execute(language, codes[i], timeout_s);
        } catch (const Error& e) {
            out[i].language = language;
            out[i].exit_status = -1;
            out[i].stderr_text = e.what();
        }
    });
    return out;
}

} // namespace lcot::sandbox
