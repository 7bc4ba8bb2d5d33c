#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "lcot/common/error.hpp"

namespace lcot::gateway {

inline constexpr double kSolverTemperature = 0.2;
inline constexpr double kAuthorTemperature = 0.8;

struct BackendSpec {
    std::string backend_id;
    std::string provider_name;
    std::string endpoint;
    std::string model_name;
    int max_concurrency = 1;
    double timeout_s = 60.0;

    void validate() const;
};

struct ChatRequest {
    std::string system_prompt;
    std::string user_prompt;
    double temperature = kSolverTemperature;
    int max_tokens = 4096;
    std::optional<std::int64_t> seed;
};

inline ChatRequest make_request(std::string system_prompt, std::string user_prompt, double temperature) {
    ChatRequest r;
    r.system_prompt = std::move(system_prompt);
    r.user_prompt = std::move(user_prompt);
    r.temperature = temperature;
    return r;
}

struct ChatResponse {
    std::string text;
    std::string backend_id;
    std::int64_t token_count = 0;
    std::int64_t latency_ms = 0;
};

enum class FailureKind { timeout, transport, rejected, unknown_backend };

// Backend failure. Timeouts and transport errors are retriable; provider
// rejections (4xx) and unknown backends are not.
class BackendError : public Error {
public:
    BackendError(FailureKind kind, std::string backend_id, const std::string& message)
        : Error(ErrorCode::backend, message), kind_(kind), backend_id_(std::move(backend_id)) {}

    FailureKind kind() const noexcept { return kind_; }
    const std::string& backend_id() const noexcept { return backend_id_; }
    bool retriable() const noexcept { return kind_ == FailureKind::timeout || kind_ == FailureKind::transport; }

private:
    FailureKind kind_;
    std::string backend_id_;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual const BackendSpec& spec() const = 0;
    // Must be safe to call concurrently.
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// Backend driven by an arbitrary function; mostly for instrumentation in tests.
class CallbackBackend : public Backend {
public:
    using Fn = std::function<std::string(const ChatRequest&)>;
    CallbackBackend(BackendSpec spec, Fn fn) : spec_(std::move(spec)), fn_(std::move(fn)) {}

    const BackendSpec& spec() const override { return spec_; }
    ChatResponse complete(const ChatRequest& request) override;

private:
    BackendSpec spec_;
    Fn fn_;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    double multiplier = 2.0;
};

class Gateway {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;
    Gateway(Gateway&&) noexcept;
    Gateway& operator=(Gateway&&) noexcept;
    ~Gateway();

    // Registration is single-writer and expected at startup.
    std::string register_backend(std::unique_ptr<Backend> backend);

    // Retries timeout/transport failures with exponential backoff; every
    // other failure propagates immediately.
    ChatResponse complete(std::string_view backend_id, const ChatRequest& request) const;

    bool contains(std::string_view backend_id) const;
    const BackendSpec& spec(std::string_view backend_id) const;
    std::vector<BackendSpec> list() const;

    void set_retry_policy(RetryPolicy policy) { retry_ = policy; }
    const RetryPolicy& retry_policy() const { return retry_; }
    void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

private:
    struct Entry {
        std::unique_ptr<Backend> backend;
        std::unique_ptr<std::counting_semaphore<>> slots;
    };
    const Entry& entry(std::string_view backend_id) const;

    std::map<std::string, Entry, std::less<>> backends_;
    RetryPolicy retry_;
    Sleeper sleeper_;
};

} // namespace lcot::gateway
