#include "treegen/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <system_error>
#include <vector>

#include "treegen/errors.hpp"
#include "treegen/pyscan.hpp"

namespace treegen {

const char* run_status_name(RunStatus status) {
    switch (status) {
        case RunStatus::pass: return "pass";
        case RunStatus::fail: return "fail";
        case RunStatus::error: return "error";
        case RunStatus::timeout: return "timeout";
    }
    return "?";
}

namespace {

std::vector<std::string> split_command(const std::string& command) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : command) {
        if (c == ' ' || c == '\t') {
            if (!current.empty()) parts.push_back(std::move(current)), current.clear();
        } else {
            current += c;
        }
    }
    if (!current.empty()) parts.push_back(std::move(current));
    return parts;
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

void replace_all(std::string& text, const std::string& needle, const std::string& with) {
    if (needle.empty()) return;
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), with);
        pos += with.size();
    }
}

// Last traceback source-context line that is an assert statement.
std::optional<std::string> find_failing_assertion(const std::string& stderr_text) {
    std::optional<std::string> found;
    std::size_t start = 0;
    while (start <= stderr_text.size()) {
        std::size_t end = stderr_text.find('\n', start);
        if (end == std::string::npos) end = stderr_text.size();
        std::size_t first = start;
        while (first < end && (stderr_text[first] == ' ' || stderr_text[first] == '\t')) ++first;
        if (stderr_text.compare(first, 7, "assert ") == 0 ||
            stderr_text.compare(first, 7, "assert(") == 0)
            found = stderr_text.substr(first, end - first);
        if (end == stderr_text.size()) break;
        start = end + 1;
    }
    return found;
}

struct Pipe {
    int rd = -1;
    int wr = -1;

    Pipe() {
        int fds[2];
        if (pipe(fds) != 0)
            throw Error("pipe failed: " + std::string(std::strerror(errno)));
        rd = fds[0];
        wr = fds[1];
    }
    ~Pipe() {
        close_rd();
        close_wr();
    }
    void close_rd() {
        if (rd >= 0) close(rd), rd = -1;
    }
    void close_wr() {
        if (wr >= 0) close(wr), wr = -1;
    }
};

}  // namespace

Sandbox::Sandbox(SandboxOptions options) : options_(std::move(options)) {
    if (options_.interpreter_cmd.empty()) throw Error("interpreter_cmd is empty");
    if (options_.workspace_root.empty())
        options_.workspace_root = std::filesystem::temp_directory_path();
}

TestReport Sandbox::execute_candidate(const std::string& program, const std::string& tests,
                                      const std::optional<std::string>& entry_point,
                                      const ExecLimits& limits) const {
    if (limits.wall_timeout_seconds <= 0) throw Error("wall_timeout_seconds must be positive");

    // Assemble main.py and remember where the test region starts.
    std::string file_text = program;
    if (!file_text.empty() && file_text.back() != '\n') file_text += '\n';
    file_text += '\n';
    const std::size_t test_start_line = count_lines(file_text) + 1;
    file_text += tests;
    if (!file_text.empty() && file_text.back() != '\n') file_text += '\n';
    if (entry_point) file_text += "\ncheck(" + *entry_point + ")\n";

    std::filesystem::create_directories(options_.workspace_root);
    std::string workspace_template = (options_.workspace_root / "treegen-run-XXXXXX").string();
    std::vector<char> workspace_buf(workspace_template.begin(), workspace_template.end());
    workspace_buf.push_back('\0');
    if (!mkdtemp(workspace_buf.data()))
        throw Error("mkdtemp failed: " + std::string(std::strerror(errno)));
    const std::string workspace(workspace_buf.data());

    {
        std::filesystem::path main_py = std::filesystem::path(workspace) / "main.py";
        FILE* f = std::fopen(main_py.c_str(), "wb");
        if (!f) throw Error("cannot write " + main_py.string());
        std::fwrite(file_text.data(), 1, file_text.size(), f);
        std::fclose(f);
    }

    std::vector<std::string> argv_strings = split_command(options_.interpreter_cmd);
    argv_strings.push_back("main.py");
    std::vector<char*> argv;
    for (auto& s : argv_strings) argv.push_back(s.data());
    argv.push_back(nullptr);

    std::vector<std::string> env_strings = {
        "PATH=/usr/local/bin:/usr/bin:/bin",
        "LC_ALL=C",
        "HOME=" + workspace,
        "TMPDIR=" + workspace,
        "PYTHONDONTWRITEBYTECODE=1",
        "PYTHONHASHSEED=0",
        "PYTHONIOENCODING=utf-8",
    };
    std::vector<char*> envp;
    for (auto& s : env_strings) envp.push_back(s.data());
    envp.push_back(nullptr);

    Pipe out_pipe, err_pipe, exec_pipe;
    fcntl(exec_pipe.wr, F_SETFD, FD_CLOEXEC);

    const auto started = std::chrono::steady_clock::now();
    const pid_t pid = fork();
    if (pid < 0) throw Error("fork failed: " + std::string(std::strerror(errno)));

    if (pid == 0) {
        setpgid(0, 0);
        if (chdir(workspace.c_str()) != 0) _exit(126);
        dup2(out_pipe.wr, STDOUT_FILENO);
        dup2(err_pipe.wr, STDERR_FILENO);
        out_pipe.close_rd();
        out_pipe.close_wr();
        err_pipe.close_rd();
        err_pipe.close_wr();
        exec_pipe.close_rd();
        execvpe(argv[0], argv.data(), envp.data());
        int err = errno;
        ssize_t ignored = write(exec_pipe.wr, &err, sizeof(err));
        (void)ignored;
        _exit(127);
    }

    out_pipe.close_wr();
    err_pipe.close_wr();
    exec_pipe.close_wr();

    const auto deadline = started + std::chrono::seconds(limits.wall_timeout_seconds);
    std::string out_text, err_text;
    std::size_t out_dropped = 0;
    bool out_open = true, err_open = true;
    bool timed_out = false;

    auto drain = [&](int fd, bool to_stdout) -> bool {  // false on EOF
        char buf[4096];
        ssize_t got = read(fd, buf, sizeof(buf));
        if (got <= 0) return false;
        if (to_stdout) {
            // keep the head
            std::size_t room = limits.max_output_bytes > out_text.size()
                                   ? limits.max_output_bytes - out_text.size()
                                   : 0;
            std::size_t take = std::min<std::size_t>(room, static_cast<std::size_t>(got));
            out_text.append(buf, take);
            out_dropped += static_cast<std::size_t>(got) - take;
        } else {
            // keep the tail
            err_text.append(buf, static_cast<std::size_t>(got));
            if (err_text.size() > limits.max_output_bytes)
                err_text.erase(0, err_text.size() - limits.max_output_bytes);
        }
        return true;
    };

    while (out_open || err_open) {
        if (!timed_out && std::chrono::steady_clock::now() >= deadline) {
            timed_out = true;
            kill(-pid, SIGKILL);
        }
        struct pollfd fds[2];
        nfds_t n = 0;
        if (out_open) fds[n++] = {out_pipe.rd, POLLIN, 0};
        if (err_open) fds[n++] = {err_pipe.rd, POLLIN, 0};
        int timeout_ms = 50;
        if (!timed_out) {
            auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 deadline - std::chrono::steady_clock::now())
                                 .count();
            if (remaining < 0) remaining = 0;
            timeout_ms = static_cast<int>(std::min<long long>(50, remaining));
        }
        int ready = poll(fds, n, timeout_ms);
        if (ready < 0) {
            if (errno == EINTR) continue;
            kill(-pid, SIGKILL);
            break;
        }
        for (nfds_t i = 0; i < n; ++i) {
            if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const bool is_out = fds[i].fd == out_pipe.rd;
            if (!drain(fds[i].fd, is_out)) {
                if (is_out)
                    out_open = false;
                else
                    err_open = false;
            }
        }
    }

    int wait_status = 0;
    waitpid(pid, &wait_status, 0);
    if (timed_out) kill(-pid, SIGKILL);  // sweep stray grandchildren
    const double duration =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    int exec_errno = 0;
    const bool exec_failed =
        read(exec_pipe.rd, &exec_errno, sizeof(exec_errno)) == sizeof(exec_errno);

    if (!options_.keep_artifacts) {
        std::error_code ec;
        std::filesystem::remove_all(workspace, ec);
    }

    if (exec_failed)
        throw SandboxUnavailable("cannot run interpreter '" + options_.interpreter_cmd +
                                 "': " + std::strerror(exec_errno));

    if (out_dropped > 0) {
        static const std::string marker = "\n... [stdout truncated]";
        if (out_text.size() + marker.size() > limits.max_output_bytes &&
            limits.max_output_bytes > marker.size())
            out_text.resize(limits.max_output_bytes - marker.size());
        if (out_text.size() + marker.size() <= limits.max_output_bytes) out_text += marker;
    }
    replace_all(out_text, workspace, "<sandbox>");
    replace_all(err_text, workspace, "<sandbox>");

    TestReport report;
    report.duration_seconds = duration;
    report.stdout_excerpt = std::move(out_text);
    report.stderr_excerpt = std::move(err_text);

    if (timed_out) {
        report.status = RunStatus::timeout;
        return report;
    }
    if (WIFEXITED(wait_status) && WEXITSTATUS(wait_status) == 0) {
        report.status = RunStatus::pass;
        return report;
    }
    if (report.stderr_excerpt.find("AssertionError") != std::string::npos) {
        report.status = RunStatus::fail;
        report.failing_assertion = find_failing_assertion(report.stderr_excerpt);
        if (!report.failing_assertion) report.failing_assertion = "AssertionError";
        return report;
    }
    report.status = RunStatus::error;
    if (auto line = deepest_frame_line(report.stderr_excerpt, "main.py"))
        report.error_in_tests = *line >= test_start_line;
    return report;
}

}  // namespace treegen
