#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace fpwasm {

// Line-delimited JSON protocol spoken with the runtime harness over its
// standard streams. One object per line, UTF-8; responses are matched by id
// and may arrive in any order.

struct HarnessRequest {
    std::string id;
    std::string script;
    int timeout_ms = 5000;
    bool collect_fingerprint = false;
    bool monitor_apis = false;
};

enum class HarnessStatus : std::uint8_t { Ok, ParseError, RuntimeError, Timeout };

std::string_view to_string(HarnessStatus s) noexcept;

struct HarnessResponse {
    std::string id;
    HarnessStatus status = HarnessStatus::Ok;
    std::optional<std::string> error;
    std::optional<std::string> fingerprint_hash;
    std::optional<std::vector<std::string>> api_accesses;
    std::vector<std::string> console;

    friend bool operator==(const HarnessResponse&, const HarnessResponse&) = default;
};

/// Single line without the trailing newline.
std::string encode_request(const HarnessRequest& req);
std::string encode_response(const HarnessResponse& resp);
/// Unknown fields are ignored. Throws ProtocolError on malformed lines.
HarnessRequest parse_request(std::string_view line);
HarnessResponse parse_response(std::string_view line);

/// Either a harness verdict or an infrastructure failure (crash, protocol
/// error, missed deadline). Infrastructure failures say nothing about the
/// script.
struct HarnessResult {
    std::optional<HarnessResponse> response;
    std::string infra_error;

    bool is_infra_error() const noexcept { return !response.has_value(); }
};

/// Client for a harness child process. Safe for concurrent `execute`
/// calls; each call blocks at most `timeout_ms` plus the grace period. A
/// dead child is respawned on the next call.
class HarnessClient {
public:
    explicit HarnessClient(std::vector<std::string> argv,
                           std::chrono::milliseconds grace = std::chrono::milliseconds(1000));
    ~HarnessClient();

    HarnessClient(const HarnessClient&) = delete;
    HarnessClient& operator=(const HarnessClient&) = delete;

    /// The request id is replaced by a client-unique one; the returned
    /// response carries the caller's original id.
    HarnessResult execute(HarnessRequest req);

    bool alive() const noexcept { return alive_.load(); }
    int restarts() const noexcept { return restarts_.load(); }
    /// Lines that were not valid responses or matched no pending id.
    int stray_lines() const noexcept { return stray_.load(); }

private:
    struct Pending {
        std::optional<HarnessResponse> response;
        std::string infra_error;
        bool done = false;
    };

    void spawn();
    void shutdown_child();
    void reader_loop(int fd);
    void fail_all(const std::string& reason);

    std::vector<std::string> argv_;
    std::chrono::milliseconds grace_;
    std::mutex spawn_mutex_;
    std::mutex write_mutex_;
    std::mutex pending_mutex_;
    std::condition_variable pending_cv_;
    std::map<std::string, std::shared_ptr<Pending>> pending_;
    std::thread reader_;
    int to_child_ = -1;
    int from_child_ = -1;
    int pid_ = -1;
    std::atomic<bool> alive_{false};
    std::atomic<int> restarts_{0};
    std::atomic<int> stray_{0};
    std::atomic<std::uint64_t> next_id_{0};
};

}  // namespace fpwasm
