// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstring>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/resource.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "forge/civil_time.hpp"
#include "forge/util.hpp"

namespace forge::sandbox {

/// Python-side runtime written into every run directory. It anchors the clock
/// from FORGE_CLOCK, installs the brokered `rt` page-retrieval module, blocks
/// direct sockets, then executes the workflow and calls its entry point.
/// Nothing is caught: script failures exit nonzero with a full traceback.
inline const char* launcher_source() {
    return R"PY(import sys, os, re, json, socket, datetime as _dt


def _install_clock():
    iso = os.environ.get("FORGE_CLOCK")
    if not iso:
        return
    m = re.match(r"(\d{4})-(\d{2})-(\d{2})[T ](\d{2}):(\d{2}):(\d{2})(?:\.\d+)?([+-])(\d{2}):?(\d{2})$", iso)
    if not m:
        raise RuntimeError("malformed FORGE_CLOCK: " + iso)
    y, mo, d, h, mi, s = (int(m.group(k)) for k in range(1, 7))
    off = int(m.group(8)) * 60 + int(m.group(9))
    if m.group(7) == "-":
        off = -off
    tz = _dt.timezone(_dt.timedelta(minutes=off))

    class _AnchoredDateTime(_dt.datetime):
        @classmethod
        def now(cls, tz_arg=None):
            if tz_arg is None:
                return cls(y, mo, d, h, mi, s)
            return cls(y, mo, d, h, mi, s, tzinfo=tz).astimezone(tz_arg)

        @classmethod
        def today(cls):
            return cls(y, mo, d, h, mi, s)

        @classmethod
        def utcnow(cls):
            u = cls(y, mo, d, h, mi, s, tzinfo=tz).astimezone(_dt.timezone.utc)
            return cls(u.year, u.month, u.day, u.hour, u.minute, u.second)

    class _AnchoredDate(_dt.date):
        @classmethod
        def today(cls):
            return cls(y, mo, d)

    _dt.datetime = _AnchoredDateTime
    _dt.date = _AnchoredDate


class _Broker:
    def __init__(self, fd):
        self._sock = socket.socket(fileno=fd)
        self._rfile = self._sock.makefile("r", encoding="utf-8")
        self._wfile = self._sock.makefile("w", encoding="utf-8")

    def call(self, op, **kwargs):
        req = {"op": op}
        req.update(kwargs)
        self._wfile.write(json.dumps(req, ensure_ascii=False) + "\n")
        self._wfile.flush()
        line = self._rfile.readline()
        if not line:
            raise RuntimeError("broker closed the connection")
        res = json.loads(line)
        if not res.get("ok"):
            raise RuntimeError(res.get("error", "broker error"))
        return res


def _install_rt(broker):
    import types

    mod = types.ModuleType("rt")
    mod.__doc__ = "Workflow runtime: brokered page retrieval."

    def fetch_html(url):
        return broker.call("fetch", url=url, render="html")["body"]

    def fetch_markdown(url):
        return broker.call("fetch", url=url, render="markdown")["body"]

    mod.fetch_html = fetch_html
    mod.fetch_markdown = fetch_markdown
    sys.modules["rt"] = mod


def _block_direct_network():
    def _denied(*args, **kwargs):
        raise RuntimeError("direct network access is disabled; use rt.fetch_html / rt.fetch_markdown")

    socket.socket = _denied
    socket.create_connection = _denied


def _run():
    script_path, entry = sys.argv[1], sys.argv[2]
    _install_clock()
    fd = os.environ.get("FORGE_BROKER_FD")
    if fd is not None:
        broker = _Broker(int(fd))
        _install_rt(broker)
        _block_direct_network()
    with open(script_path, "r", encoding="utf-8") as f:
        source = f.read()
    ns = {"__name__": "__workflow__"}
    exec(compile(source, script_path, "exec"), ns)
    fn = ns.get(entry)
    if fn is None:
        raise RuntimeError("entry point not found: " + entry)
    fn()
    sys.stdout.flush()


_run()
)PY";
}

struct RunLimits {
    int timeout_s = 120;
    long memory_bytes = 512 * 1024 * 1024;
    size_t stdout_cap = 1 << 20;
    size_t stderr_cap = 256 << 10;
};

struct RunResult {
    int exit_code = -1;
    int term_signal = 0;
    bool timed_out = false;
    std::string stdout_text;
    std::string stderr_text;
    int64_t duration_ms = 0;
    std::string spawn_error; // non-empty when the process could not start
};

/// Services one `rt` request from the child. Returns the JSON response;
/// must set "ok".
using BrokerHandler = std::function<nlohmann::json(const nlohmann::json& request)>;

/// Runs `source` in an isolated interpreter process: own process group,
/// CPU/memory rlimits, stdout/stderr captured, wall-clock deadline enforced
/// by SIGKILL on the group. `clock` (when set) is exported as FORGE_CLOCK for
/// the launcher's datetime shim.
inline RunResult run_script(const std::string& source, const std::string& entry_point,
                            std::optional<AnchorTimestamp> clock, const RunLimits& limits,
                            BrokerHandler broker, const std::string& python_exe = "python3") {
    namespace chr = std::chrono;
    RunResult result;

    static std::atomic<uint64_t> run_counter{0};
    fs::path run_dir = fs::temp_directory_path() /
                       util::format("forge-run-%d-%llu", static_cast<int>(::getpid()),
                                    static_cast<unsigned long long>(++run_counter));
    fs::create_directories(run_dir);
    fs::path script_path = run_dir / "workflow.py";
    fs::path launcher_path = run_dir / "launcher.py";
    util::write_file(script_path, source);
    util::write_file(launcher_path, launcher_source());

    int out_pipe[2], err_pipe[2], broker_sv[2];
    if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0 ||
        ::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, broker_sv) != 0) {
        result.spawn_error = std::string("pipe setup failed: ") + std::strerror(errno);
        return result;
    }

    auto t0 = chr::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0) {
        result.spawn_error = std::string("fork failed: ") + std::strerror(errno);
        return result;
    }
    if (pid == 0) {
        // child
        ::setpgid(0, 0);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::dup2(err_pipe[1], STDERR_FILENO);
        int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
        int flags = ::fcntl(broker_sv[1], F_GETFD);
        ::fcntl(broker_sv[1], F_SETFD, flags & ~FD_CLOEXEC);

        rlimit cpu{};
        cpu.rlim_cur = cpu.rlim_max = static_cast<rlim_t>(limits.timeout_s + 5);
        ::setrlimit(RLIMIT_CPU, &cpu);
        rlimit mem{};
        mem.rlim_cur = mem.rlim_max = static_cast<rlim_t>(limits.memory_bytes);
        ::setrlimit(RLIMIT_AS, &mem);

        if (clock)
            ::setenv("FORGE_CLOCK", clock->iso().c_str(), 1);
        else
            ::unsetenv("FORGE_CLOCK");
        ::setenv("FORGE_BROKER_FD", util::format("%d", broker_sv[1]).c_str(), 1);
        ::setenv("PYTHONDONTWRITEBYTECODE", "1", 1);
        ::setenv("PYTHONIOENCODING", "utf-8", 1);

        ::execlp(python_exe.c_str(), python_exe.c_str(), launcher_path.c_str(), script_path.c_str(),
                 entry_point.c_str(), static_cast<char*>(nullptr));
        std::perror("exec failed");
        ::_exit(127);
    }

    // parent
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    ::close(broker_sv[1]);
    int out_fd = out_pipe[0], err_fd = err_pipe[0], brk_fd = broker_sv[0];

    std::string broker_buf;
    bool out_open = true, err_open = true, brk_open = true;
    auto deadline = t0 + chr::seconds(limits.timeout_s);

    auto drain = [&](int fd, std::string& sink, size_t cap, bool& open_flag) {
        char buf[8192];
        ssize_t n = ::read(fd, buf, sizeof(buf));
        if (n <= 0) {
            open_flag = false;
            ::close(fd);
            return;
        }
        if (sink.size() < cap)
            sink.append(buf, static_cast<size_t>(std::min<ssize_t>(n, static_cast<ssize_t>(cap - sink.size()))));
    };

    auto respond = [&](const nlohmann::json& res) {
        std::string line = res.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
        size_t off = 0;
        while (off < line.size()) {
            ssize_t n = ::write(brk_fd, line.data() + off, line.size() - off);
            if (n <= 0) break;
            off += static_cast<size_t>(n);
        }
    };

    bool child_exited = false;
    int status = 0;
    while (!child_exited || out_open || err_open || brk_open) {
        if (!child_exited && ::waitpid(pid, &status, WNOHANG) == pid)
            child_exited = true;
        if (child_exited && !out_open && !err_open && !brk_open)
            break;

        auto now = chr::steady_clock::now();
        if (!child_exited && now >= deadline) {
            result.timed_out = true;
            ::kill(-pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            child_exited = true;
            continue; // one more pass to drain whatever is left
        }

        pollfd fds[3];
        nfds_t nfds = 0;
        int idx_out = -1, idx_err = -1, idx_brk = -1;
        if (out_open) { idx_out = nfds; fds[nfds++] = {out_fd, POLLIN, 0}; }
        if (err_open) { idx_err = nfds; fds[nfds++] = {err_fd, POLLIN, 0}; }
        if (brk_open) { idx_brk = nfds; fds[nfds++] = {brk_fd, POLLIN, 0}; }
        if (nfds == 0) { // child alive with everything closed: just wait it out
            ::usleep(20 * 1000);
            continue;
        }
        int rc = ::poll(fds, nfds, 100);
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (idx_out >= 0 && (fds[idx_out].revents & (POLLIN | POLLHUP)))
            drain(out_fd, result.stdout_text, limits.stdout_cap, out_open);
        if (idx_err >= 0 && (fds[idx_err].revents & (POLLIN | POLLHUP)))
            drain(err_fd, result.stderr_text, limits.stderr_cap, err_open);
        if (idx_brk >= 0 && (fds[idx_brk].revents & (POLLIN | POLLHUP))) {
            char buf[16384];
            ssize_t n = ::read(brk_fd, buf, sizeof(buf));
            if (n <= 0) {
                brk_open = false;
                ::close(brk_fd);
            } else {
                broker_buf.append(buf, static_cast<size_t>(n));
                size_t nl;
                while ((nl = broker_buf.find('\n')) != std::string::npos) {
                    std::string line = broker_buf.substr(0, nl);
                    broker_buf.erase(0, nl + 1);
                    nlohmann::json response;
                    try {
                        nlohmann::json request = nlohmann::json::parse(line);
                        response = broker ? broker(request)
                                          : nlohmann::json{{"ok", false}, {"error", "no broker installed"}};
                    } catch (const std::exception& e) {
                        response = {{"ok", false}, {"error", std::string("broker failure: ") + e.what()}};
                    }
                    respond(response);
                }
            }
        }
    }

    if (out_open) ::close(out_fd);
    if (err_open) ::close(err_fd);
    if (brk_open) ::close(brk_fd);
    if (!child_exited)
        ::waitpid(pid, &status, 0);
    ::kill(-pid, SIGKILL); // kill any stragglers left in the group
    result.duration_ms = chr::duration_cast<chr::milliseconds>(chr::steady_clock::now() - t0).count();
    if (WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) {
        result.term_signal = WTERMSIG(status);
        result.exit_code = 128 + result.term_signal;
    }

    std::error_code ec;
    fs::remove_all(run_dir, ec);
    return result;
}

} // namespace forge::sandbox
