#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <string>

#include "ptco/errors.hpp"

namespace ptco {

struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
    bool timed_out = false;

    bool ok() const { return !timed_out && exit_code == 0; }
};

inline std::string sh_quote(const std::string& s) {
    std::string quoted = "'";
    for (char c : s) {
        if (c == '\'')
            quoted += "'\\''";
        else
            quoted += c;
    }
    quoted += "'";
    return quoted;
}

// Runs a shell command, capturing stdout and stderr separately. A zero
// timeout means no limit. On timeout the whole process group is killed.
inline CommandResult run_command(const std::string& shell_cmd,
                                 const std::filesystem::path& cwd = {},
                                 std::chrono::seconds timeout = std::chrono::seconds{0}) {
    int out_pipe[2];
    int err_pipe[2];
    if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0) throw Error("pipe() failed");

    pid_t pid = fork();
    if (pid < 0) throw Error("fork() failed");
    if (pid == 0) {
        setpgid(0, 0);
        if (!cwd.empty() && chdir(cwd.c_str()) != 0) _exit(127);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        close(out_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[0]);
        close(err_pipe[1]);
        execl("/bin/sh", "sh", "-c", shell_cmd.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }

    close(out_pipe[1]);
    close(err_pipe[1]);

    CommandResult result;
    auto deadline = std::chrono::steady_clock::now() + timeout;
    bool unlimited = timeout.count() == 0;

    struct pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    bool open_fd[2] = {true, true};
    char buf[4096];
    while (open_fd[0] || open_fd[1]) {
        int wait_ms = 200;
        if (!unlimited) {
            auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (remaining.count() <= 0) {
                result.timed_out = true;
                kill(-pid, SIGKILL);
            }
            wait_ms = std::min<long long>(200, std::max<long long>(1, remaining.count()));
        }
        int n = poll(fds, 2, wait_ms);
        if (n < 0) break;
        for (int i = 0; i < 2; ++i) {
            if (!open_fd[i]) continue;
            if (fds[i].revents & (POLLIN | POLLHUP)) {
                ssize_t got = read(fds[i].fd, buf, sizeof(buf));
                if (got > 0) {
                    (i == 0 ? result.out : result.err).append(buf, static_cast<std::size_t>(got));
                } else {
                    open_fd[i] = false;
                    fds[i].fd = -1;
                }
            }
        }
        if (result.timed_out && !open_fd[0] && !open_fd[1]) break;
    }
    close(out_pipe[0]);
    close(err_pipe[0]);

    int status = 0;
    waitpid(pid, &status, 0);
    if (result.timed_out)
        result.exit_code = -1;
    else if (WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        result.exit_code = 128 + WTERMSIG(status);
    return result;
}

}  // namespace ptco
