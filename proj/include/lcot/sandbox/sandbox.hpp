#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lcot::sandbox {

inline constexpr double kDefaultExecTimeout = 10.0;
inline constexpr std::size_t kDefaultMemoryBytes = std::size_t{512} << 20;
inline constexpr std::size_t kDefaultOutputCap = std::size_t{64} << 10;
inline constexpr const char* kRootEnv = "LCOT_SANDBOX_ROOT";

// argv with "{file}" replaced by the snippet path, e.g. {"python3", "-I", "{file}"}.
struct Interpreter {
    std::string language;
    std::vector<std::string> command;
    std::string extension;
};

void to_json(nlohmann::json& j, const Interpreter& i);
void from_json(const nlohmann::json& j, Interpreter& i);

struct SandboxConfig {
    std::vector<Interpreter> interpreters;
    std::size_t memory_bytes = kDefaultMemoryBytes;
    std::size_t output_cap = kDefaultOutputCap;
    std::size_t workers = 8;
    bool isolate_network = true;
    std::filesystem::path root;  // scratch parent; LCOT_SANDBOX_ROOT or the temp dir when empty

    // python via python3 when it is on PATH; workers = max(CPU count, 8).
    static SandboxConfig defaults();
};

void to_json(nlohmann::json& j, const SandboxConfig& c);
void from_json(const nlohmann::json& j, SandboxConfig& c);

struct ExecResult {
    std::string language;
    int exit_status = 0;  // 128 + signal when killed
    std::string stdout_text;
    std::string stderr_text;
    double elapsed_s = 0;
    bool timed_out = false;
    bool truncated = false;
};

void to_json(nlohmann::json& j, const ExecResult& r);
void from_json(const nlohmann::json& j, ExecResult& r);

// Every snippet runs as a fresh process group in its own scratch directory
// with an address-space cap, a CPU limit, no outbound network (private network
// namespace where the kernel allows it, plus a seccomp filter refusing
// AF_INET/AF_INET6 sockets), and a wall-clock deadline enforced by SIGKILL.
class Sandbox {
public:
    explicit Sandbox(SandboxConfig config = SandboxConfig::defaults());

    const SandboxConfig& config() const { return config_; }
    // Sorted, duplicate-free.
    std::vector<std::string> languages() const;
    bool supports(const std::string& language) const;

    // Throws lcot::Error(validation) for an unsupported language or a negative timeout.
    ExecResult execute(const std::string& language, const std::string& code,
                       double timeout_s = kDefaultExecTimeout) const;
    // Positionally aligned; a failing snippet never aborts the batch.
    std::vector<ExecResult> execute_parallel(const std::string& language, const std::vector<std::string>& codes,
                                             double timeout_s = kDefaultExecTimeout) const;

private:
    const Interpreter& interpreter(const std::string& language) const;
    std::filesystem::path scratch_root() const;

    SandboxConfig config_;
};

} // namespace lcot::sandbox
