#include "taskgen/sandbox.hpp"

#include <fcntl.h>
#include <linux/audit.h>
#include <linux/filter.h>
#include <linux/landlock.h>
#include <linux/seccomp.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstddef>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <mutex>
#include <sstream>

#include "taskgen/text.hpp"

namespace taskgen::sandbox {

namespace fs = std::filesystem;

// --- Fence sanitization ----------------------------------------------------

namespace {

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

bool is_opening_fence(const std::string& line) {
  auto t = text::trim(strip_cr(line));
  if (!text::starts_with(t, "```")) return false;
  auto tag = t.substr(3);
  return std::all_of(tag.begin(), tag.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '+' || c == '-' ||
           c == '.' || c == '#';
  });
}

bool is_closing_fence(const std::string& line) { return text::trim(strip_cr(line)) == "```"; }

}  // namespace

std::string sanitize_source(std::string_view source) {
  const auto lines = text::split_lines(source);
  std::vector<std::string> kept;
  bool found = false;
  std::size_t i = 0;
  while (i < lines.size()) {
    if (!is_opening_fence(lines[i])) {
      ++i;
      continue;
    }
    std::size_t close = i + 1;
    while (close < lines.size() && !is_closing_fence(lines[close])) ++close;
    if (close >= lines.size()) break;  // unclosed fence: not a block
    found = true;
    kept.insert(kept.end(), lines.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                lines.begin() + static_cast<std::ptrdiff_t>(close));
    i = close + 1;
  }
  if (!found) return std::string(source);
  return text::join(kept, "\n");
}

void validate(const SandboxLimits& limits) {
  if (limits.wall_timeout_ms <= 0) throw std::invalid_argument("wall_timeout_ms must be > 0");
  if (limits.network_allowed) throw std::invalid_argument("network access is never allowed");
}

// --- Harness ---------------------------------------------------------------

namespace {

constexpr std::string_view kHarness = R"PY(import os
import sys

_PROTO = os.fdopen(os.dup(1), "w", buffering=1, encoding="utf-8", errors="replace")
os.dup2(2, 1)
sys.stdout = sys.stderr

import sysconfig
import traceback
import types
import unittest

ROOT = os.path.realpath(os.getcwd())
_READ_ROOTS = sorted({os.path.realpath(p) for p in (sysconfig.get_paths().get("stdlib"),
                                                    sysconfig.get_paths().get("platstdlib")) if p})
_BLOCKED = {
    "subprocess.Popen", "os.system", "os.exec", "os.posix_spawn", "os.spawn", "os.fork",
    "os.forkpty", "pty.spawn", "ctypes.dlopen", "ctypes.dlsym", "ctypes.cdata", "os.kill",
    "os.killpg", "signal.pthread_kill",
}
_WRITE_FLAGS = os.O_WRONLY | os.O_RDWR | os.O_CREAT | os.O_TRUNC | os.O_APPEND


def _under(path, root):
    return path == root or path.startswith(root + os.sep)


def _guard(event, args):
    if event == "open":
        path, mode, flags = args
        if path is None or isinstance(path, int):
            return
        try:
            real = os.path.realpath(os.fsdecode(path))
        except Exception:
            raise PermissionError("sandbox: file access denied") from None
        if _under(real, ROOT):
            return
        writing = (isinstance(mode, str) and any(c in mode for c in "wax+")) or \
            bool((flags or 0) & _WRITE_FLAGS)
        if not writing and any(_under(real, r) for r in _READ_ROOTS):
            return
        raise PermissionError("sandbox: access to %r denied" % os.fsdecode(path))
    if event in _BLOCKED or event.startswith("socket."):
        raise PermissionError("sandbox: %s is not allowed" % event)


def _load(name, filename, namespace=None):
    module = types.ModuleType(name)
    module.__file__ = filename
    if namespace:
        module.__dict__.update(namespace)
    sys.modules[name] = module
    with open(filename, encoding="utf-8") as fh:
        source = fh.read()
    exec(compile(source, filename, "exec"), module.__dict__)
    return module


def _one_line(text, limit=300):
    text = " ".join(str(text).split())
    return text[:limit]


def _message(exc):
    text = str(exc)
    if not text and isinstance(exc, AssertionError):
        for frame in reversed(traceback.extract_tb(exc.__traceback__)):
            if frame.filename == "tests.py" and frame.line:
                text = "%s (line %d)" % (frame.line, frame.lineno)
                break
    kind = type(exc).__name__
    return _one_line("%s: %s" % (kind, text) if text else kind)


class _CaseFailure(Exception):
    pass


def _case_runner(cls, method):
    def run():
        result = unittest.TestResult()
        cls(method).run(result)
        problems = result.failures + result.errors
        if problems:
            lines = [l for l in problems[0][1].splitlines() if l.strip()]
            raise _CaseFailure(lines[-1] if lines else "failed")
        if result.skipped:
            raise _CaseFailure("skipped: %s" % result.skipped[0][1])
    return run


def _collect(tests):
    cases = []
    for name, obj in list(vars(tests).items()):
        if isinstance(obj, types.FunctionType) and name.startswith("test") and \
                obj.__module__ == "tests":
            cases.append((name, obj))
        elif isinstance(obj, type) and issubclass(obj, unittest.TestCase) and \
                obj.__module__ == "tests":
            for method in unittest.TestLoader().getTestCaseNames(obj):
                cases.append(("%s.%s" % (name, method), _case_runner(obj, method)))
    return cases


def _fail_load():
    kind, exc, tb = sys.exc_info()
    frames = [f for f in traceback.extract_tb(tb) if f.filename != __file__]
    if frames:
        sys.stderr.write("Traceback (most recent call last):\n")
        sys.stderr.write("".join(traceback.format_list(frames)))
    sys.stderr.write("".join(traceback.format_exception_only(kind, exc)))
    sys.stderr.flush()
    os._exit(2)


def main():
    sys.addaudithook(_guard)
    try:
        solution = _load("solution", "solution.py")
    except BaseException:
        _fail_load()
    shared = {k: v for k, v in vars(solution).items()
              if not (k.startswith("__") and k.endswith("__"))}
    try:
        tests = _load("tests", "tests.py", shared)
    except BaseException:
        _fail_load()
    passed = 0
    cases = _collect(tests)
    for name, fn in cases:
        name = "".join(name.split()) or "unnamed"
        try:
            fn()
        except BaseException as exc:
            msg = str(exc) if isinstance(exc, _CaseFailure) else _message(exc)
            _PROTO.write("TEST %s FAIL %s\n" % (name, _one_line(msg) or "failed"))
        else:
            passed += 1
            _PROTO.write("TEST %s PASS\n" % name)
        _PROTO.flush()
    _PROTO.write("SUMMARY %d/%d\n" % (passed, len(cases)))
    _PROTO.flush()
    sys.stderr.flush()
    os._exit(0)


main()
)PY";

// --- Landlock (kernel ABI, defined locally: system headers may predate it) --

struct LandlockRulesetAttr {
  std::uint64_t handled_access_fs;
  std::uint64_t handled_access_net;
  std::uint64_t scoped;
};

constexpr std::uint64_t kFsRefer = 1ULL << 13;
constexpr std::uint64_t kFsTruncate = 1ULL << 14;
constexpr std::uint64_t kFsIoctlDev = 1ULL << 15;
constexpr std::uint64_t kNetBindTcp = 1ULL << 0;
constexpr std::uint64_t kNetConnectTcp = 1ULL << 1;
constexpr std::uint64_t kScopeAbstractUnix = 1ULL << 0;
constexpr std::uint64_t kScopeSignal = 1ULL << 1;

constexpr std::uint64_t kFsReadOnly =
    LANDLOCK_ACCESS_FS_EXECUTE | LANDLOCK_ACCESS_FS_READ_FILE | LANDLOCK_ACCESS_FS_READ_DIR;
constexpr std::uint64_t kFsFileRights =
    LANDLOCK_ACCESS_FS_EXECUTE | LANDLOCK_ACCESS_FS_WRITE_FILE | LANDLOCK_ACCESS_FS_READ_FILE |
    kFsTruncate | kFsIoctlDev;

int landlock_abi() {
  long v = ::syscall(SYS_landlock_create_ruleset, nullptr, 0, LANDLOCK_CREATE_RULESET_VERSION);
  return v < 0 ? 0 : static_cast<int>(v);
}

std::uint64_t handled_fs_for(int abi) {
  std::uint64_t all = (1ULL << 13) - 1;  // ABI 1 rights
  if (abi >= 2) all |= kFsRefer;
  if (abi >= 3) all |= kFsTruncate;
  if (abi >= 5) all |= kFsIoctlDev;
  return all;
}

struct LandlockRule {
  int fd;
  std::uint64_t access;
};

// Prepared in the parent so the child only issues syscalls.
struct LandlockPlan {
  int abi = 0;
  LandlockRulesetAttr attr{};
  std::size_t attr_size = 0;
  std::vector<LandlockRule> rules;

  ~LandlockPlan() {
    for (auto& r : rules) ::close(r.fd);
  }
};

void add_path_rule(LandlockPlan& plan, const std::string& path, std::uint64_t wanted) {
  int fd = ::open(path.c_str(), O_PATH | O_CLOEXEC);
  if (fd < 0) return;
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    return;
  }
  std::uint64_t access = wanted & plan.attr.handled_access_fs;
  if (!S_ISDIR(st.st_mode)) access &= kFsFileRights;
  plan.rules.push_back({fd, access});
}

// --- seccomp: no sockets, no io_uring --------------------------------------

#if defined(__x86_64__)
constexpr std::uint32_t kAuditArch = AUDIT_ARCH_X86_64;
#define TASKGEN_HAVE_SECCOMP 1
#elif defined(__aarch64__)
constexpr std::uint32_t kAuditArch = AUDIT_ARCH_AARCH64;
#define TASKGEN_HAVE_SECCOMP 1
#endif

#ifdef TASKGEN_HAVE_SECCOMP
const sock_filter kSeccompFilter[] = {
    BPF_STMT(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, arch)),
    BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, kAuditArch, 1, 0),
    BPF_STMT(BPF_RET | BPF_K, SECCOMP_RET_KILL_PROCESS),
    BPF_STMT(BPF_LD | BPF_W | BPF_ABS, offsetof(seccomp_data, nr)),
    // x32 syscall numbers carry bit 30.
    BPF_JUMP(BPF_JMP | BPF_JGE | BPF_K, 0x40000000, 3, 0),
    BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, __NR_socket, 2, 0),
    BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, __NR_socketpair, 1, 0),
    BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, __NR_io_uring_setup, 0, 1),
    BPF_STMT(BPF_RET | BPF_K, SECCOMP_RET_ERRNO | (EACCES & SECCOMP_RET_DATA)),
    BPF_STMT(BPF_RET | BPF_K, SECCOMP_RET_ALLOW),
};
#endif

enum IsolationBits : unsigned char { kNetns = 1, kLandlock = 2, kSeccomp = 4 };

[[noreturn]] void child_fail(int status_fd, int err) {
  unsigned char buf[5] = {'E'};
  std::memcpy(buf + 1, &err, sizeof err);
  [[maybe_unused]] auto n = ::write(status_fd, buf, sizeof buf);
  ::_exit(127);
}

std::string find_in_path(const std::string& name) {
  if (name.find('/') != std::string::npos) return name;
  for (const char* dir : {"/usr/local/bin", "/usr/bin", "/bin"}) {
    auto candidate = fs::path(dir) / name;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate.string();
  }
  return {};
}

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK); }

class TempDir {
 public:
  TempDir(const std::string& root, bool keep) : keep_(keep) {
    auto base = root.empty() ? fs::temp_directory_path() : fs::path(root);
    std::error_code ec;
    fs::create_directories(base, ec);
    std::string tmpl = (base / "taskgen-run-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) {
      throw SandboxSetupFailure("cannot create sandbox directory under " + base.string() + ": " +
                                std::strerror(errno));
    }
    path_ = tmpl;
  }
  ~TempDir() {
    if (keep_) return;
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  bool keep_;
};

}  // namespace

std::string_view PythonSandbox::harness_source() { return kHarness; }

PythonSandbox::PythonSandbox(SandboxConfig config)
    : config_(std::move(config)),
      slots_(std::make_unique<std::counting_semaphore<>>(std::max(1, config_.max_concurrent))) {
  if (config_.interpreter.empty()) throw std::invalid_argument("interpreter command is empty");
}

std::string PythonSandbox::resolve_interpreter() const {
  auto path = find_in_path(config_.interpreter.front());
  if (path.empty() || ::access(path.c_str(), X_OK) != 0) {
    throw SandboxSetupFailure("interpreter not found: " + config_.interpreter.front());
  }
  return path;
}

IsolationReport PythonSandbox::last_isolation() const {
  std::lock_guard lock(report_mutex_);
  return last_report_;
}

PythonSandbox::RawResult PythonSandbox::execute(
    const std::vector<std::pair<std::string, std::string>>& files, const std::string& entry,
    const SandboxLimits& limits) {
  validate(limits);
  const std::string interpreter = resolve_interpreter();

  slots_->acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{*slots_};

  TempDir dir(config_.work_root, config_.keep_workdirs);
  for (const auto& [name, content] : files) {
    try {
      text::write_file_atomic((fs::path(dir.path()) / name).string(), content);
    } catch (const std::exception& e) {
      throw SandboxSetupFailure(std::string("cannot write sandbox file: ") + e.what());
    }
  }

  // Everything the child needs is built before fork().
  std::vector<std::string> argv_store{interpreter};
  argv_store.insert(argv_store.end(), config_.interpreter.begin() + 1, config_.interpreter.end());
  argv_store.push_back(entry);
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  argv.push_back(nullptr);

  std::vector<std::string> env_store{"PATH=/usr/bin:/bin", "HOME=" + dir.path(), "LANG=C.UTF-8",
                                     "PYTHONIOENCODING=utf-8", "PYTHONDONTWRITEBYTECODE=1"};
  std::vector<char*> envp;
  for (auto& e : env_store) envp.push_back(e.data());
  envp.push_back(nullptr);

  LandlockPlan plan;
  plan.abi = landlock_abi();
  if (plan.abi > 0) {
    plan.attr.handled_access_fs = handled_fs_for(plan.abi);
    plan.attr_size = sizeof(std::uint64_t);
    if (plan.abi >= 4) {
      plan.attr.handled_access_net = kNetBindTcp | kNetConnectTcp;
      plan.attr_size = 2 * sizeof(std::uint64_t);
    }
    if (plan.abi >= 6) {
      plan.attr.scoped = kScopeAbstractUnix | kScopeSignal;
      plan.attr_size = sizeof(LandlockRulesetAttr);
    }
    auto read_only = config_.read_only_paths;
    std::error_code ec;
    auto real = fs::canonical(interpreter, ec);
    if (!ec && real.has_parent_path()) read_only.push_back(real.parent_path().parent_path().string());
    for (const auto& p : read_only) add_path_rule(plan, p, kFsReadOnly);
    add_path_rule(plan, "/dev/null", LANDLOCK_ACCESS_FS_READ_FILE | LANDLOCK_ACCESS_FS_WRITE_FILE);
    add_path_rule(plan, "/dev/urandom", LANDLOCK_ACCESS_FS_READ_FILE);
    add_path_rule(plan, dir.path(), plan.attr.handled_access_fs);
  }

  const int cpu_seconds = limits.wall_timeout_ms / 1000 + 2;
  const rlim_t memory_bytes = static_cast<rlim_t>(config_.memory_limit_mb) * 1024 * 1024;

  int out_pipe[2], err_pipe[2], status_pipe[2];
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw SandboxSetupFailure("pipe failed");
  if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    throw SandboxSetupFailure("pipe failed");
  }
  if (::pipe2(status_pipe, O_CLOEXEC) != 0) {
    for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) ::close(fd);
    throw SandboxSetupFailure("pipe failed");
  }
  int null_fd = ::open("/dev/null", O_RDONLY | O_CLOEXEC);

  const auto start = std::chrono::steady_clock::now();
  pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1], status_pipe[0],
                   status_pipe[1], null_fd}) {
      ::close(fd);
    }
    throw SandboxSetupFailure(std::string("fork failed: ") + std::strerror(errno));
  }

  if (pid == 0) {
    const int status_fd = status_pipe[1];
    ::setpgid(0, 0);
    ::signal(SIGPIPE, SIG_DFL);

    rlimit rl{};
    rl.rlim_cur = rl.rlim_max = static_cast<rlim_t>(cpu_seconds);
    ::setrlimit(RLIMIT_CPU, &rl);
    rl.rlim_cur = rl.rlim_max = memory_bytes;
    ::setrlimit(RLIMIT_AS, &rl);
    rl.rlim_cur = rl.rlim_max = 16 * 1024 * 1024;
    ::setrlimit(RLIMIT_FSIZE, &rl);
    rl.rlim_cur = rl.rlim_max = 0;
    ::setrlimit(RLIMIT_CORE, &rl);
    rl.rlim_cur = rl.rlim_max = 64;
    ::setrlimit(RLIMIT_NOFILE, &rl);

    unsigned char layers = 0;
    if (::unshare(CLONE_NEWNET) == 0) layers |= kNetns;
    if (::prctl(PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0) child_fail(status_fd, errno);

    if (plan.abi > 0) {
      long ruleset = ::syscall(SYS_landlock_create_ruleset, &plan.attr, plan.attr_size, 0);
      if (ruleset >= 0) {
        bool ok = true;
        for (const auto& r : plan.rules) {
          landlock_path_beneath_attr pb{};
          pb.allowed_access = r.access;
          pb.parent_fd = r.fd;
          if (::syscall(SYS_landlock_add_rule, ruleset, LANDLOCK_RULE_PATH_BENEATH, &pb, 0) != 0) {
            ok = false;
          }
        }
        if (ok && ::syscall(SYS_landlock_restrict_self, ruleset, 0) == 0) layers |= kLandlock;
        ::close(static_cast<int>(ruleset));
      }
    }

#ifdef TASKGEN_HAVE_SECCOMP
    sock_fprog prog{};
    prog.len = static_cast<unsigned short>(sizeof(kSeccompFilter) / sizeof(kSeccompFilter[0]));
    prog.filter = const_cast<sock_filter*>(kSeccompFilter);
    if (::prctl(PR_SET_SECCOMP, SECCOMP_MODE_FILTER, &prog, 0, 0) == 0) layers |= kSeccomp;
#endif

    if (::chdir(dir.path().c_str()) != 0) child_fail(status_fd, errno);
    if (::dup2(null_fd, 0) < 0 || ::dup2(out_pipe[1], 1) < 0 || ::dup2(err_pipe[1], 2) < 0) {
      child_fail(status_fd, errno);
    }
    if (status_fd != 3) {
      if (::dup2(status_fd, 3) < 0) child_fail(status_fd, errno);
    }
    ::fcntl(3, F_SETFD, FD_CLOEXEC);
    ::syscall(SYS_close_range, 4U, ~0U, 0U);
    [[maybe_unused]] auto n = ::write(3, &layers, 1);
    ::execve(argv[0], argv.data(), envp.data());
    child_fail(3, errno);
  }

  ::setpgid(pid, pid);
  for (int fd : {out_pipe[1], err_pipe[1], status_pipe[1], null_fd}) ::close(fd);

  // Status pipe closes on successful exec; anything after the layer byte is an exec error.
  unsigned char status_buf[8];
  std::size_t status_len = 0;
  while (true) {
    auto n = ::read(status_pipe[0], status_buf + status_len, sizeof status_buf - status_len);
    if (n > 0) {
      status_len += static_cast<std::size_t>(n);
      if (status_len == sizeof status_buf) break;
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    break;
  }
  ::close(status_pipe[0]);

  RawResult raw;
  bool exec_failed = false;
  int exec_errno = 0;
  std::size_t err_at = status_len > 0 && status_buf[0] != 'E' ? 1 : 0;
  if (status_len >= err_at + 5 && status_buf[err_at] == 'E') {
    exec_failed = true;
    std::memcpy(&exec_errno, status_buf + err_at + 1, sizeof exec_errno);
  }
  if (status_len > 0 && status_buf[0] != 'E') {
    std::lock_guard lock(report_mutex_);
    last_report_ = {(status_buf[0] & kNetns) != 0, (status_buf[0] & kLandlock) != 0,
                    (status_buf[0] & kSeccomp) != 0};
  }

  set_nonblocking(out_pipe[0]);
  set_nonblocking(err_pipe[0]);
  pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
  std::string* sinks[2] = {&raw.out, &raw.err};
  bool open_fd[2] = {true, true};
  bool reaped = false;
  int wstatus = 0;
  const auto deadline = start + std::chrono::milliseconds(limits.wall_timeout_ms);
  auto drain_deadline = std::chrono::steady_clock::time_point::max();
  char buf[8192];

  while (true) {
    const auto now = std::chrono::steady_clock::now();
    if (!reaped && now >= deadline) {
      ::kill(-pid, SIGKILL);
      raw.timed_out = true;
    }
    if (!reaped && ::waitpid(pid, &wstatus, WNOHANG) == pid) {
      reaped = true;
      ::kill(-pid, SIGKILL);  // stray descendants
      drain_deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(500);
    }
    if (reaped && ((!open_fd[0] && !open_fd[1]) || std::chrono::steady_clock::now() >= drain_deadline)) {
      break;
    }
    int wait_ms = 20;
    if (!reaped) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
      wait_ms = static_cast<int>(std::clamp<long long>(left, 0, 20));
    }
    for (int k = 0; k < 2; ++k) fds[k].fd = open_fd[k] ? (k == 0 ? out_pipe[0] : err_pipe[0]) : -1;
    ::poll(fds, 2, wait_ms);
    for (int k = 0; k < 2; ++k) {
      if (!open_fd[k]) continue;
      while (true) {
        auto n = ::read(fds[k].fd, buf, sizeof buf);
        if (n > 0) {
          auto room = limits.max_output_bytes - std::min(limits.max_output_bytes, sinks[k]->size());
          sinks[k]->append(buf, std::min<std::size_t>(room, static_cast<std::size_t>(n)));
          continue;
        }
        if (n == 0) open_fd[k] = false;
        break;
      }
    }
  }
  if (!reaped) ::waitpid(pid, &wstatus, 0);
  ::close(out_pipe[0]);
  ::close(err_pipe[0]);

  raw.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  const std::string prefix = dir.path() + "/";
  raw.out = text::replace_all(std::move(raw.out), prefix, "");
  raw.err = text::replace_all(std::move(raw.err), prefix, "");
  if (exec_failed) {
    throw SandboxSetupFailure("cannot start interpreter " + interpreter + ": " +
                              std::strerror(exec_errno));
  }
  if (WIFEXITED(wstatus)) {
    raw.exited = true;
    raw.exit_code = WEXITSTATUS(wstatus);
  } else if (WIFSIGNALED(wstatus)) {
    raw.signal = WTERMSIG(wstatus);
  }
  return raw;
}

ExecutionOutcome interpret_run(const std::string& protocol_out, const std::string& err, bool exited,
                               int exit_code, int signal, bool timed_out, std::int64_t wall_time_ms) {
  ExecutionOutcome o;
  o.stdout_text = protocol_out;
  o.stderr_text = err;
  o.timed_out = timed_out;
  o.wall_time_ms = wall_time_ms;

  std::vector<TestResult> tests;
  std::optional<std::pair<long, long>> summary;
  bool malformed = false;
  for (const auto& raw_line : text::split_lines(protocol_out)) {
    const auto line = strip_cr(raw_line);
    if (line.empty()) continue;
    if (summary) {
      malformed = true;  // nothing may follow SUMMARY
      continue;
    }
    if (text::starts_with(line, "TEST ")) {
      auto rest = line.substr(5);
      auto sp = rest.find(' ');
      if (sp == std::string::npos || sp == 0) {
        malformed = true;
        continue;
      }
      auto name = rest.substr(0, sp);
      auto verdict = rest.substr(sp + 1);
      if (verdict == "PASS") {
        tests.push_back({name, true, ""});
      } else if (text::starts_with(verdict, "FAIL")) {
        auto msg = verdict.size() > 5 ? verdict.substr(5) : std::string{};
        tests.push_back({name, false, msg});
      } else {
        malformed = true;
      }
    } else if (text::starts_with(line, "SUMMARY ")) {
      long passed = -1, total = -1;
      char tail = 0;
      if (std::sscanf(line.c_str() + 8, "%ld/%ld%c", &passed, &total, &tail) == 2) {
        summary = std::make_pair(passed, total);
      } else {
        malformed = true;
      }
    } else {
      malformed = true;
    }
  }

  const bool clean_exit = exited && exit_code == 0;
  if (tests.empty() && !summary && !timed_out) {
    // Load-time failure: the harness stopped before running any test.
    o.compile_ok = false;
    if (!clean_exit && o.stderr_text.empty()) {
      o.stderr_text = signal ? "process terminated by signal " + std::to_string(signal)
                             : "process exited with status " + std::to_string(exit_code);
    } else if (clean_exit) {
      o.stderr_text += (o.stderr_text.empty() ? "" : "\n");
      o.stderr_text += "test harness ended before running any test";
    }
    return o;
  }

  o.compile_ok = true;
  const long passed = std::count_if(tests.begin(), tests.end(), [](auto& t) { return t.passed; });
  const bool consistent = summary && summary->first == passed &&
                          summary->second == static_cast<long>(tests.size());
  o.tests = std::move(tests);
  if (timed_out) return o;
  if (!clean_exit || !consistent || malformed) {
    std::string why = !clean_exit ? (signal ? "terminated by signal " + std::to_string(signal)
                                            : "exited with status " + std::to_string(exit_code))
                                  : "produced an inconsistent result report";
    o.tests.push_back({"__harness__", false, "test run " + why});
  }
  return o;
}

ExecutionOutcome PythonSandbox::run_solution_against_tests(const std::string& solution,
                                                           const std::string& tests,
                                                           const SandboxLimits& limits) {
  auto raw = execute({{"solution.py", solution}, {"tests.py", tests}, {"harness.py", std::string(kHarness)}},
                     "harness.py", limits);
  return interpret_run(raw.out, raw.err, raw.exited, raw.exit_code, raw.signal, raw.timed_out,
                       raw.wall_time_ms);
}

ExecutionOutcome PythonSandbox::run_script(const std::string& script, const SandboxLimits& limits) {
  auto raw = execute({{"main.py", script}}, "main.py", limits);
  ExecutionOutcome o;
  o.compile_ok = raw.exited && raw.exit_code == 0;
  o.stdout_text = raw.out;
  o.stderr_text = raw.err;
  o.timed_out = raw.timed_out;
  o.wall_time_ms = raw.wall_time_ms;
  return o;
}

ExecutionOutcome run_submission(Runner& runner, const Task& task, const std::string& student_code,
                                const SandboxLimits& limits) {
  if (task.status != TaskStatus::functional) {
    throw TaskNotFunctional("task " + task.id + " is not functional");
  }
  return runner.run_solution_against_tests(student_code, task.unit_tests, limits);
}

}  // namespace taskgen::sandbox
