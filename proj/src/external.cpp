#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "dimred/csvio.hpp"
#include "dimred/regress.hpp"

namespace dimred {

namespace {

struct TempFile {
    std::string path;
    TempFile()
    {
        std::string tmpl = (std::filesystem::temp_directory_path() / "dimred-XXXXXX.csv").string();
        int fd = mkstemps(tmpl.data(), 4);
        if (fd < 0) throw ExternalFailure("cannot create a temporary data file");
        close(fd);
        path = tmpl;
    }
    ~TempFile() { std::remove(path.c_str()); }
    TempFile(const TempFile&) = delete;
    TempFile& operator=(const TempFile&) = delete;
};

std::string shell_quote(const std::string& s)
{
    std::string out = "'";
    for (char ch : s) {
        if (ch == '\'') out += "'\\''";
        else out += ch;
    }
    return out + "'";
}

std::string build_command(const std::string& tmpl, const std::string& path)
{
    const std::string marker = "{csv}";
    auto pos = tmpl.find(marker);
    if (pos == std::string::npos) return tmpl + " " + shell_quote(path);
    std::string cmd = tmpl;
    const std::string quoted = shell_quote(path);
    for (; pos != std::string::npos; pos = cmd.find(marker, pos + quoted.size())) cmd.replace(pos, marker.size(), quoted);
    return cmd;
}

struct Outcome {
    std::string output;
    int status = 0;
    bool timed_out = false;
};

Outcome run(const std::string& cmd, double timeout_seconds)
{
    int fds[2];
    if (pipe(fds) != 0) throw ExternalFailure("pipe failed");
    pid_t pid = fork();
    if (pid < 0) throw ExternalFailure("fork failed");
    if (pid == 0) {
        setpgid(0, 0);
        dup2(fds[1], STDOUT_FILENO);
        close(fds[0]);
        close(fds[1]);
        execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(fds[1]);
    Outcome o;
    auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
    char buf[4096];
    for (;;) {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            o.timed_out = true;
            kill(-pid, SIGKILL);
            break;
        }
        pollfd p{fds[0], POLLIN, 0};
        int r = poll(&p, 1, static_cast<int>(left.count()));
        if (r < 0 && errno == EINTR) continue;
        if (r == 0) continue;
        ssize_t got = read(fds[0], buf, sizeof buf);
        if (got > 0) {
            o.output.append(buf, static_cast<std::size_t>(got));
            continue;
        }
        if (got < 0 && errno == EINTR) continue;
        break;
    }
    close(fds[0]);
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    o.status = status;
    return o;
}

}  // namespace

ExprDag fit_external(const Matrix& X, const Vector& y, const RegressorSpec& spec)
{
    if (spec.command.empty()) throw ExternalFailure("no external command given");
    TempFile file;
    try {
        write_csv_file(file.path, X, y);
    } catch (const CsvError& e) {
        throw ExternalFailure(e.what());
    }
    Outcome o = run(build_command(spec.command, file.path), spec.timeout_seconds);
    if (o.timed_out) throw ExternalFailure("external regressor timed out");
    if (!WIFEXITED(o.status) || WEXITSTATUS(o.status) != 0)
        throw ExternalFailure("external regressor exited with status " +
                              std::to_string(WIFEXITED(o.status) ? WEXITSTATUS(o.status) : -1));
    std::istringstream lines(o.output);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            ExprDag e = parse(line);
            if (e.arity() > X.cols()) throw ExternalFailure("external expression uses unknown variables: " + line);
            return e;
        } catch (const ParseError& err) {
            throw ExternalFailure(std::string("unparsable external output: ") + err.what());
        }
    }
    throw ExternalFailure("external regressor printed no expression");
}

}  // namespace dimred
