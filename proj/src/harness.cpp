#include "fpwasm/harness.hpp"

#include "fpwasm/errors.hpp"

#include <json.hpp>

#include <array>
#include <cerrno>
#include <cstring>

#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace fpwasm {

using nlohmann::json;

std::string_view to_string(HarnessStatus s) noexcept {
    switch (s) {
    case HarnessStatus::Ok: return "ok";
    case HarnessStatus::ParseError: return "parse_error";
    case HarnessStatus::RuntimeError: return "runtime_error";
    case HarnessStatus::Timeout: return "timeout";
    }
    return "?";
}

namespace {

HarnessStatus parse_status(const std::string& s) {
    if (s == "ok") return HarnessStatus::Ok;
    if (s == "parse_error") return HarnessStatus::ParseError;
    if (s == "runtime_error") return HarnessStatus::RuntimeError;
    if (s == "timeout") return HarnessStatus::Timeout;
    throw ProtocolError("unknown status '" + s + "'");
}

json parse_object(std::string_view line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ProtocolError("line is not a JSON object");
    return j;
}

template <typename T>
T required(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ProtocolError(std::string("missing field '") + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ProtocolError(std::string("field '") + key + "' has the wrong type");
    }
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ProtocolError(std::string("field '") + key + "' has the wrong type");
    }
}

}  // namespace

std::string encode_request(const HarnessRequest& req) {
    return json{{"id", req.id},
                {"script", req.script},
                {"timeout_ms", req.timeout_ms},
                {"collect_fingerprint", req.collect_fingerprint},
                {"monitor_apis", req.monitor_apis}}
        .dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string encode_response(const HarnessResponse& resp) {
    json j{{"id", resp.id}, {"status", to_string(resp.status)}, {"console", resp.console}};
    if (resp.error) j["error"] = *resp.error;
    if (resp.fingerprint_hash) j["fingerprint_hash"] = *resp.fingerprint_hash;
    if (resp.api_accesses) j["api_accesses"] = *resp.api_accesses;
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

HarnessRequest parse_request(std::string_view line) {
    const json j = parse_object(line);
    HarnessRequest req;
    req.id = required<std::string>(j, "id");
    req.script = required<std::string>(j, "script");
    req.timeout_ms = optional_field<int>(j, "timeout_ms").value_or(5000);
    req.collect_fingerprint = optional_field<bool>(j, "collect_fingerprint").value_or(false);
    req.monitor_apis = optional_field<bool>(j, "monitor_apis").value_or(false);
    return req;
}

HarnessResponse parse_response(std::string_view line) {
    const json j = parse_object(line);
    HarnessResponse resp;
    resp.id = required<std::string>(j, "id");
    resp.status = parse_status(required<std::string>(j, "status"));
    resp.error = optional_field<std::string>(j, "error");
    resp.fingerprint_hash = optional_field<std::string>(j, "fingerprint_hash");
    resp.api_accesses = optional_field<std::vector<std::string>>(j, "api_accesses");
    resp.console = optional_field<std::vector<std::string>>(j, "console").value_or(std::vector<std::string>{});
    return resp;
}

// --- client ---------------------------------------------------------------

HarnessClient::HarnessClient(std::vector<std::string> argv, std::chrono::milliseconds grace)
  : argv_(std::move(argv)), grace_(grace) {
    if (argv_.empty()) throw HarnessUnavailable("empty harness command");
    std::lock_guard lock(spawn_mutex_);
    spawn();
}

HarnessClient::~HarnessClient() {
    std::lock_guard lock(spawn_mutex_);
    shutdown_child();
}

void HarnessClient::spawn() {
    int in_pair[2];
    int out_pair[2];
    if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, in_pair) != 0)
        throw HarnessUnavailable(std::string("socketpair: ") + std::strerror(errno));
    if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, out_pair) != 0) {
        close(in_pair[0]);
        close(in_pair[1]);
        throw HarnessUnavailable(std::string("socketpair: ") + std::strerror(errno));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pair[1], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pair[1], STDOUT_FILENO);

    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);
    pid_t pid = -1;
    const int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    close(in_pair[1]);
    close(out_pair[1]);
    if (rc != 0) {
        close(in_pair[0]);
        close(out_pair[0]);
        throw HarnessUnavailable("cannot start harness '" + argv_[0] + "': " + std::strerror(rc));
    }
    pid_ = pid;
    to_child_ = in_pair[0];
    from_child_ = out_pair[0];
    alive_ = true;
    reader_ = std::thread(&HarnessClient::reader_loop, this, from_child_);
}

void HarnessClient::shutdown_child() {
    if (pid_ < 0) return;
    ::shutdown(to_child_, SHUT_WR);
    int status = 0;
    bool reaped = false;
    for (int i = 0; i < 200 && !reaped; ++i) {
        if (waitpid(pid_, &status, WNOHANG) == pid_)
            reaped = true;
        else
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (!reaped) {
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
    }
    ::shutdown(from_child_, SHUT_RD);
    if (reader_.joinable()) reader_.join();
    close(to_child_);
    close(from_child_);
    to_child_ = from_child_ = pid_ = -1;
    alive_ = false;
    fail_all("harness shut down");
}

void HarnessClient::fail_all(const std::string& reason) {
    std::lock_guard lock(pending_mutex_);
    for (auto& [id, p] : pending_) {
        if (p->done) continue;
        p->infra_error = reason;
        p->done = true;
    }
    pending_.clear();
    pending_cv_.notify_all();
}

void HarnessClient::reader_loop(int fd) {
    std::string buffer;
    std::array<char, 65536> chunk{};
    auto dispatch = [&](std::string_view line) {
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) return;
        std::optional<HarnessResponse> resp;
        std::string id;
        std::string problem;
        try {
            resp = parse_response(line);
            id = resp->id;
        } catch (const ProtocolError& e) {
            problem = e.what();
            json j = json::parse(line, nullptr, false);
            if (j.is_object() && j.contains("id") && j["id"].is_string()) id = j["id"].get<std::string>();
        }
        std::lock_guard lock(pending_mutex_);
        auto it = pending_.find(id);
        if (it == pending_.end()) {
            ++stray_;
            return;
        }
        if (resp)
            it->second->response = std::move(resp);
        else
            it->second->infra_error = "protocol error: " + problem;
        it->second->done = true;
        pending_.erase(it);
        pending_cv_.notify_all();
    };
    for (;;) {
        const ssize_t n = read(fd, chunk.data(), chunk.size());
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        buffer.append(chunk.data(), static_cast<std::size_t>(n));
        std::size_t start = 0;
        for (auto nl = buffer.find('\n', start); nl != std::string::npos; nl = buffer.find('\n', start)) {
            dispatch(std::string_view(buffer).substr(start, nl - start));
            start = nl + 1;
        }
        buffer.erase(0, start);
    }
    alive_ = false;
    fail_all("harness exited");
}

HarnessResult HarnessClient::execute(HarnessRequest req) {
    {
        std::lock_guard lock(spawn_mutex_);
        if (!alive_) {
            shutdown_child();
            try {
                spawn();
            } catch (const HarnessUnavailable& e) {
                return {std::nullopt, e.what()};
            }
            ++restarts_;
        }
    }
    const std::string caller_id = req.id;
    req.id = "q" + std::to_string(next_id_.fetch_add(1));
    auto pending = std::make_shared<Pending>();
    {
        std::lock_guard lock(pending_mutex_);
        pending_[req.id] = pending;
    }
    const std::string line = encode_request(req) + "\n";
    bool sent = true;
    {
        std::lock_guard lock(write_mutex_);
        std::size_t off = 0;
        while (off < line.size()) {
            const ssize_t n = send(to_child_, line.data() + off, line.size() - off, MSG_NOSIGNAL);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) {
                sent = false;
                break;
            }
            off += static_cast<std::size_t>(n);
        }
    }
    std::unique_lock lock(pending_mutex_);
    if (!sent && !pending->done) {
        pending_.erase(req.id);
        return {std::nullopt, "cannot write to harness"};
    }
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(std::max(req.timeout_ms, 0)) + grace_;
    if (!pending_cv_.wait_until(lock, deadline, [&] { return pending->done; })) {
        pending_.erase(req.id);
        return {std::nullopt, "no response within " + std::to_string(req.timeout_ms) + " ms plus grace"};
    }
    if (!pending->response) return {std::nullopt, pending->infra_error};
    HarnessResult result{std::move(pending->response), ""};
    result.response->id = caller_id;
    return result;
}

}  // namespace fpwasm
