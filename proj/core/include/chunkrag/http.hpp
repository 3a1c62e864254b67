#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

namespace chunkrag::http {

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{500};
    double backoff_factor = 2.0;
    std::chrono::milliseconds max_backoff{8000};
    double timeout_seconds = 30.0;
};

/// Delay before retry number `attempt` (0-based): initial * factor^attempt, capped.
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt);

/// Split form of an http(s) URL.
struct Url {
    std::string scheme_host_port;  // e.g. "https://api.example.com:443"
    std::string path;              // always starts with '/'
};

Url parse_url(const std::string& url);

/// POSTs a JSON body and returns the parsed JSON response.
///
/// Retries with exponential backoff on HTTP 429, 5xx and transport failures,
/// up to `policy.max_retries` extra attempts. HTTP 401/403 throw AuthError
/// immediately; other 4xx responses throw BackendError without retrying.
/// `bearer_token` may be empty, in which case no Authorization header is sent.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body, const std::string& bearer_token,
                         const RetryPolicy& policy);

/// Reads the API key from the named environment variable; empty when unset.
std::string api_key_from_env(const std::string& env_var);

/// Bounds concurrent requests and, optionally, requests per rolling minute.
/// acquire() blocks until both limits allow another request.
class RequestGate {
public:
    class Permit {
    public:
        explicit Permit(RequestGate* gate) : gate_(gate) {}
        Permit(Permit&& other) noexcept : gate_(other.gate_) { other.gate_ = nullptr; }
        Permit& operator=(Permit&&) = delete;
        Permit(const Permit&) = delete;
        ~Permit() {
            if (gate_ != nullptr) {
                gate_->release();
            }
        }

    private:
        RequestGate* gate_;
    };

    explicit RequestGate(std::size_t max_in_flight = 4, std::size_t per_minute = 0);

    Permit acquire();

private:
    void release();

    std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t max_in_flight_;
    std::size_t per_minute_;
    std::size_t in_flight_ = 0;
    std::deque<std::chrono::steady_clock::time_point> recent_;
};

}  // namespace chunkrag::http
