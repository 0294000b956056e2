#include "dschecker/process.hpp"

#include "dschecker/error.hpp"

#include <fmt/format.h>

#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <utility>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace fs = std::filesystem;

namespace dschecker {

namespace {

struct Pipe {
    int fds[2] = {-1, -1};

    Pipe()
    {
        if (::pipe2(fds, O_CLOEXEC) != 0)
            fail(ErrorCode::WorkspaceIo, fmt::format("pipe: {}", std::strerror(errno)));
    }
    ~Pipe()
    {
        close_read();
        close_write();
    }
    Pipe(const Pipe&) = delete;
    Pipe& operator=(const Pipe&) = delete;

    int read_end() const { return fds[0]; }
    int write_end() const { return fds[1]; }
    void close_read()
    {
        if (fds[0] >= 0)
            ::close(std::exchange(fds[0], -1));
    }
    void close_write()
    {
        if (fds[1] >= 0)
            ::close(std::exchange(fds[1], -1));
    }
};

void set_nonblocking(int fd)
{
    ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK);
}

}  // namespace

std::optional<fs::path> find_executable(std::string_view name)
{
    if (name.empty())
        return std::nullopt;
    if (name.find('/') != std::string_view::npos) {
        fs::path p{std::string(name)};
        if (::access(p.c_str(), X_OK) == 0)
            return p;
        return std::nullopt;
    }
    const char* path_env = std::getenv("PATH");
    std::string_view paths = path_env ? path_env : "/usr/local/bin:/usr/bin:/bin";
    while (!paths.empty()) {
        auto colon = paths.find(':');
        auto dir = paths.substr(0, colon);
        fs::path candidate = fs::path(std::string(dir.empty() ? "." : dir)) / std::string(name);
        if (::access(candidate.c_str(), X_OK) == 0 && fs::is_regular_file(candidate))
            return candidate;
        if (colon == std::string_view::npos)
            break;
        paths.remove_prefix(colon + 1);
    }
    return std::nullopt;
}

ProcessResult run_process(const ProcessRequest& request)
{
    // Writing stdin to a child that already exited must not kill us.
    static const bool sigpipe_ignored = [] { return std::signal(SIGPIPE, SIG_IGN) != SIG_ERR; }();
    (void)sigpipe_ignored;
    if (request.argv.empty())
        fail(ErrorCode::InterpreterNotFound, "empty command line");
    auto exe = find_executable(request.argv.front());
    if (!exe)
        fail(ErrorCode::InterpreterNotFound, fmt::format("'{}' not found", request.argv.front()));

    // Everything the child touches is prepared before fork.
    std::vector<char*> argv;
    for (const auto& a : request.argv)
        argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    std::vector<std::string> env_storage;
    for (char** e = environ; *e; ++e)
        env_storage.emplace_back(*e);
    for (const auto& e : request.extra_env)
        env_storage.push_back(e);
    std::vector<char*> envp;
    for (auto& e : env_storage)
        envp.push_back(e.data());
    envp.push_back(nullptr);
    const std::string exe_path = exe->string();
    const std::string cwd = request.cwd.string();

    Pipe in_pipe, out_pipe, err_pipe, exec_status;
    const auto start = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0)
        fail(ErrorCode::WorkspaceIo, fmt::format("fork: {}", std::strerror(errno)));
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(in_pipe.read_end(), STDIN_FILENO);
        ::dup2(out_pipe.write_end(), STDOUT_FILENO);
        ::dup2(err_pipe.write_end(), STDERR_FILENO);
        if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) {
            int err = errno;
            (void)!::write(exec_status.write_end(), &err, sizeof err);
            ::_exit(127);
        }
        ::execve(exe_path.c_str(), argv.data(), envp.data());
        int err = errno;
        (void)!::write(exec_status.write_end(), &err, sizeof err);
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    in_pipe.close_read();
    out_pipe.close_write();
    err_pipe.close_write();
    exec_status.close_write();

    int child_errno = 0;
    if (::read(exec_status.read_end(), &child_errno, sizeof child_errno) == sizeof child_errno) {
        ::waitpid(pid, nullptr, 0);
        fail(child_errno == ENOENT || child_errno == EACCES ? ErrorCode::InterpreterNotFound
                                                             : ErrorCode::WorkspaceIo,
             fmt::format("cannot execute '{}' in '{}': {}", exe_path, cwd, std::strerror(child_errno)));
    }

    ProcessResult result;
    std::size_t stdin_written = 0;
    if (request.stdin_text.empty())
        in_pipe.close_write();
    else
        set_nonblocking(in_pipe.write_end());
    set_nonblocking(out_pipe.read_end());
    set_nonblocking(err_pipe.read_end());

    const auto deadline = start + request.timeout;
    char buffer[8192];
    while (out_pipe.read_end() >= 0 || err_pipe.read_end() >= 0) {
        auto now = std::chrono::steady_clock::now();
        if (now >= deadline) {
            result.timed_out = true;
            ::kill(-pid, SIGKILL);
            break;
        }
        std::vector<pollfd> fds;
        if (out_pipe.read_end() >= 0)
            fds.push_back({out_pipe.read_end(), POLLIN, 0});
        if (err_pipe.read_end() >= 0)
            fds.push_back({err_pipe.read_end(), POLLIN, 0});
        if (in_pipe.write_end() >= 0)
            fds.push_back({in_pipe.write_end(), POLLOUT, 0});
        auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        int ready = ::poll(fds.data(), fds.size(), static_cast<int>(std::min<long long>(wait_ms + 1, 1000)));
        if (ready < 0 && errno != EINTR)
            break;
        for (const auto& p : fds) {
            if (p.revents == 0)
                continue;
            if (p.fd == in_pipe.write_end()) {
                auto n = ::write(p.fd, request.stdin_text.data() + stdin_written,
                                 request.stdin_text.size() - stdin_written);
                if (n > 0)
                    stdin_written += static_cast<std::size_t>(n);
                if (n < 0 || stdin_written == request.stdin_text.size())
                    in_pipe.close_write();
                continue;
            }
            auto n = ::read(p.fd, buffer, sizeof buffer);
            if (n > 0) {
                (p.fd == out_pipe.read_end() ? result.stdout_text : result.stderr_text).append(buffer, n);
            } else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
                if (p.fd == out_pipe.read_end())
                    out_pipe.close_read();
                else
                    err_pipe.close_read();
            }
        }
    }

    int status = 0;
    ::waitpid(pid, &status, 0);
    // Reap anything the child left behind in its group.
    ::kill(-pid, SIGKILL);
    result.duration_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    if (WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        result.term_signal = WTERMSIG(status);
    return result;
}

}  // namespace dschecker
