#include "evoagent/executor.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace evoagent {

namespace {

void drain(int fd, std::string& sink) {
    char buf[8192];
    for (;;) {
        ssize_t n = ::read(fd, buf, sizeof(buf));
        if (n > 0)
            sink.append(buf, static_cast<size_t>(n));
        else
            break;
    }
}

}  // namespace

ExecutionResult LocalExecutor::run(const std::string& command, const std::string& cwd,
                                   std::chrono::seconds timeout) {
    int out_pipe[2], err_pipe[2];
    if (::pipe(out_pipe) != 0 || ::pipe(err_pipe) != 0)
        throw std::runtime_error("pipe() failed");

    pid_t pid = ::fork();
    if (pid < 0)
        throw std::runtime_error("fork() failed");

    if (pid == 0) {
        ::setpgid(0, 0);  // own process group so timeouts kill descendants too
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::dup2(err_pipe[1], STDERR_FILENO);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        ::close(err_pipe[0]);
        ::close(err_pipe[1]);
        int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0)
            ::dup2(devnull, STDIN_FILENO);
        if (!cwd.empty() && ::chdir(cwd.c_str()) != 0)
            ::_exit(127);
        ::execl("/bin/bash", "bash", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }

    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    ::fcntl(out_pipe[0], F_SETFL, O_NONBLOCK);
    ::fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);

    ExecutionResult result;
    auto deadline = std::chrono::steady_clock::now() + timeout;
    auto hard_stop = deadline + std::chrono::seconds(2);  // grace for pipe EOF after SIGKILL
    bool out_open = true, err_open = true;
    bool killed = false;

    while ((out_open || err_open) && !(killed && std::chrono::steady_clock::now() >= hard_stop)) {
        struct pollfd fds[2];
        int nfds = 0;
        if (out_open)
            fds[nfds++] = {out_pipe[0], POLLIN, 0};
        if (err_open)
            fds[nfds++] = {err_pipe[0], POLLIN, 0};

        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        int wait_ms = killed ? 100 : static_cast<int>(std::max<long long>(remaining.count(), 0));
        int rc = ::poll(fds, nfds, std::min(wait_ms, 1000));
        if (rc < 0 && errno != EINTR)
            break;

        for (int i = 0; i < nfds; ++i) {
            if (!(fds[i].revents & (POLLIN | POLLHUP)))
                continue;
            char buf[8192];
            ssize_t n;
            while ((n = ::read(fds[i].fd, buf, sizeof(buf))) > 0) {
                (fds[i].fd == out_pipe[0] ? result.stdout_bytes : result.stderr_bytes)
                    .append(buf, static_cast<size_t>(n));
            }
            if (n == 0) {
                if (fds[i].fd == out_pipe[0])
                    out_open = false;
                else
                    err_open = false;
            }
        }

        if (!killed && std::chrono::steady_clock::now() >= deadline) {
            ::kill(-pid, SIGKILL);
            killed = true;
            result.timed_out = true;
        }
    }
    drain(out_pipe[0], result.stdout_bytes);
    drain(err_pipe[0], result.stderr_bytes);
    ::close(out_pipe[0]);
    ::close(err_pipe[0]);

    int status = 0;
    ::waitpid(pid, &status, 0);
    if (result.timed_out)
        result.returncode = 124;
    else if (WIFEXITED(status))
        result.returncode = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        result.returncode = 128 + WTERMSIG(status);
    return result;
}

}  // namespace evoagent
