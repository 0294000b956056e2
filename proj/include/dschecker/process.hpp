#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dschecker {

struct ProcessRequest {
    std::vector<std::string> argv;
    std::filesystem::path cwd;
    std::chrono::milliseconds timeout{30'000};
    std::string stdin_text;
    /// Extra NAME=value entries appended to the inherited environment.
    std::vector<std::string> extra_env;
};

struct ProcessResult {
    int exit_code = -1;    // valid when the process exited normally
    int term_signal = 0;   // non-zero when killed by a signal
    bool timed_out = false;
    std::string stdout_text;
    std::string stderr_text;
    std::int64_t duration_ms = 0;
};

/// Runs argv[0] (searched in PATH) in its own process group. On timeout the
/// whole group is killed. Throws InterpreterNotFound if argv[0] cannot be
/// executed, WorkspaceIo on pipe/fork failures.
ProcessResult run_process(const ProcessRequest& request);

/// PATH lookup; absolute or relative paths containing '/' are checked as-is.
std::optional<std::filesystem::path> find_executable(std::string_view name);

}  // namespace dschecker
