#include "perm_oracle.hpp"

#include <dirent.h>
#include <fcntl.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <stdexcept>

#include "fixtures.hpp"
#include "sandboxeval/access.hpp"
#include "sandboxeval/model.hpp"

namespace sandboxeval::testing {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMismatchesKept = 20;

std::string octal(unsigned m)
{
    char buf[8];
    std::snprintf(buf, sizeof buf, "%03o", m);
    return buf;
}

void check(int rc, const fs::path& p, const char* what)
{
    if (rc != 0) throw std::runtime_error(std::string(what) + " failed on " + p.string());
}

// Corpus files are copies of a real executable: without read permission a
// script's header cannot be inspected, so the binary rule is what can be
// checked for every mode.
void write_binary(const fs::path& p)
{
    fs::copy_file("/bin/true", p, fs::copy_options::overwrite_existing);
}

void write_script(const fs::path& p)
{
    int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw std::runtime_error("cannot create " + p.string());
    const std::string body = "#!/bin/sh\nexit 0\n";
    auto n = ::write(fd, body.data(), body.size());
    ::close(fd);
    if (n != static_cast<ssize_t>(body.size())) throw std::runtime_error("short write on " + p.string());
}

bool try_read(const fs::path& p, bool dir)
{
    if (!dir) {
        int fd = ::open(p.c_str(), O_RDONLY | O_CLOEXEC);
        if (fd < 0) return false;
        ::close(fd);
        return true;
    }
    DIR* d = ::opendir(p.c_str());
    if (!d) return false;
    errno = 0;
    while (::readdir(d) != nullptr) {
    }
    const bool ok = errno == 0;
    ::closedir(d);
    return ok;
}

bool try_write(const fs::path& p, bool dir)
{
    if (!dir) {
        int fd = ::open(p.c_str(), O_WRONLY | O_CLOEXEC);
        if (fd < 0) return false;
        ::close(fd);
        return true;
    }
    const auto probe = p / "w.tmp";
    int fd = ::open(probe.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
    if (fd < 0) return false;
    ::close(fd);
    ::unlink(probe.c_str());
    return true;
}

bool try_execute(const fs::path& p, bool dir)
{
    if (dir) {
        struct stat st {};
        return ::stat((p / "c").c_str(), &st) == 0;
    }
    pid_t pid = ::fork();
    if (pid < 0) return false;
    if (pid == 0) {
        int null = ::open("/dev/null", O_RDWR);
        if (null >= 0) {
            ::dup2(null, 1);
            ::dup2(null, 2);
        }
        char* argv[] = {const_cast<char*>(p.c_str()), nullptr};
        char* envp[] = {nullptr};
        ::execve(p.c_str(), argv, envp);
        ::_exit(127);
    }
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    return WIFEXITED(status) && WEXITSTATUS(status) == 0;
}

bool try_create(const fs::path& p, bool dir)
{
    if (dir) return ::mkdir(p.c_str(), 0755) == 0;
    int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
    if (fd < 0) return false;
    ::close(fd);
    return true;
}

bool try_delete(const fs::path& p, bool dir) { return (dir ? ::rmdir(p.c_str()) : ::unlink(p.c_str())) == 0; }

}  // namespace

void build_corpus(const fs::path& base, uid_t owner, gid_t group)
{
    fs::create_directories(base / "obj");
    fs::create_directories(base / "ent");
    check(::chmod(base.c_str(), 0755), base, "chmod");
    for (const char* sub : {"obj", "ent"}) check(::chmod((base / sub).c_str(), 0755), base / sub, "chmod");
    for (unsigned m = 0; m < 512; ++m) {
        const auto f = base / "obj" / ("f" + octal(m));
        write_binary(f);
        check(::lchown(f.c_str(), owner, group), f, "chown");
        check(::chmod(f.c_str(), m), f, "chmod");

        const auto d = base / "obj" / ("d" + octal(m));
        check(::mkdir(d.c_str(), 0755), d, "mkdir");
        write_script(d / "c");
        check(::lchown((d / "c").c_str(), owner, group), d, "chown");
        check(::lchown(d.c_str(), owner, group), d, "chown");
        check(::chmod(d.c_str(), m), d, "chmod");

        for (bool dir_victim : {false, true}) {
            const auto parent = base / "ent" / ((dir_victim ? "d" : "f") + octal(m));
            check(::mkdir(parent.c_str(), 0755), parent, "mkdir");
            const auto victim = parent / "victim";
            if (dir_victim)
                check(::mkdir(victim.c_str(), 0755), victim, "mkdir");
            else
                write_script(victim);
            check(::lchown(victim.c_str(), owner, group), victim, "chown");
            check(::lchown(parent.c_str(), owner, group), parent, "chown");
            check(::chmod(parent.c_str(), m), parent, "chmod");
        }
    }
}

OracleSummary check_corpus(const fs::path& base)
{
    OracleSummary s;
    const auto who = Credentials::current();
    auto record = [&](AccessOp op, bool dir, unsigned m, const fs::path& target, bool actual,
                      const AccessPrediction& pred) {
        ++s.cases;
        if (actual) ++s.allowed;
        if (pred.allowed() == actual) {
            ++s.agree;
            return;
        }
        if (s.mismatches.size() < kMismatchesKept)
            s.mismatches.push_back(std::string(to_string(op)) + (dir ? " dir " : " file ") + octal(m) + " " +
                                   target.filename().string() + ": predicted " +
                                   (pred.allowed() ? "allow" : "deny") + ", kernel " +
                                   (actual ? "allow" : "deny") + " (" + pred.basis + ")");
    };

    for (unsigned m = 0; m < 512; ++m) {
        for (bool dir : {false, true}) {
            const auto obj = base / "obj" / ((dir ? "d" : "f") + octal(m));
            for (AccessOp op : {AccessOp::Read, AccessOp::Execute, AccessOp::Write}) {
                const auto pred = infer_access(obj, op, who);
                bool actual = false;
                if (op == AccessOp::Read) actual = try_read(obj, dir);
                if (op == AccessOp::Execute) actual = try_execute(obj, dir);
                if (op == AccessOp::Write) actual = try_write(obj, dir);
                record(op, dir, m, obj, actual, pred);
            }

            const auto parent = base / "ent" / ((dir ? "d" : "f") + octal(m));
            const auto fresh = parent / "fresh";
            auto pred = infer_access(fresh, AccessOp::CreateIn, who);
            record(AccessOp::CreateIn, dir, m, fresh, try_create(fresh, dir), pred);

            const auto victim = parent / "victim";
            pred = infer_access(victim, AccessOp::DeleteFrom, who);
            record(AccessOp::DeleteFrom, dir, m, victim, try_delete(victim, dir), pred);
        }
    }
    return s;
}

OracleSummary run_oracle(const fs::path& base, uid_t owner, gid_t group,
                         std::optional<std::pair<uid_t, gid_t>> identity)
{
    OracleSummary result;
    try {
        build_corpus(base, owner, group);
    } catch (const std::exception& e) {
        result.failure = e.what();
        return result;
    }
    std::string out;
    const int rc = run_in_child(
        [&](int fd) {
            if (identity && !become(identity->first, identity->second)) return 3;
            const auto s = check_corpus(base);
            std::string text = std::to_string(s.cases) + " " + std::to_string(s.agree) + " " +
                               std::to_string(s.allowed) + "\n";
            for (const auto& m : s.mismatches) text += m + "\n";
            std::size_t off = 0;
            while (off < text.size()) {
                auto n = ::write(fd, text.data() + off, text.size() - off);
                if (n <= 0) return 4;
                off += static_cast<std::size_t>(n);
            }
            return 0;
        },
        out);
    if (rc != 0) {
        result.failure = "oracle child exited with status " + std::to_string(rc);
        return result;
    }
    std::size_t pos = out.find('\n');
    if (pos == std::string::npos || std::sscanf(out.c_str(), "%zu %zu %zu", &result.cases, &result.agree,
                                                &result.allowed) != 3) {
        result.failure = "oracle child sent no summary";
        return result;
    }
    while (pos + 1 < out.size()) {
        auto next = out.find('\n', pos + 1);
        result.mismatches.push_back(out.substr(pos + 1, next - pos - 1));
        pos = next;
    }
    return result;
}

}  // namespace sandboxeval::testing
