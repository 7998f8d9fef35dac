#include <doctest.h>

#include <sys/stat.h>
#include <sys/utsname.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <set>

#include "../support/fixtures.hpp"
#include "sandboxeval/recon.hpp"
#include "sandboxeval/walk.hpp"

using namespace sandboxeval;
namespace fs = std::filesystem;

namespace {

std::set<std::string> listed(const Observation& o)
{
    std::set<std::string> out;
    for (const auto& e : o.evidence.payload["entries"]) out.insert(e.get<std::string>());
    return out;
}

}  // namespace

TEST_SUITE("recon") {

TEST_CASE("platform reports the kernel uname sees")
{
    struct utsname u {};
    REQUIRE(::uname(&u) == 0);
    const auto o = probe_system(SystemFacet::Platform);
    CHECK(o.disposition == Disposition::PayloadObtained);
    CHECK(o.evidence.payload["system"] == std::string(u.sysname));
    CHECK(o.evidence.payload["release"] == std::string(u.release));
    CHECK(o.evidence.payload["machine"] == std::string(u.machine));
}

TEST_CASE("cpu, memory and disk facets carry numbers")
{
    const auto cpu = probe_system(SystemFacet::Cpu);
    CHECK(cpu.disposition == Disposition::PayloadObtained);
    CHECK(cpu.evidence.payload["logical_online"].get<long>() == ::sysconf(_SC_NPROCESSORS_ONLN));
    const auto mem = probe_system(SystemFacet::Memory);
    CHECK(mem.disposition == Disposition::PayloadObtained);
    CHECK(mem.evidence.payload["total_bytes"].get<std::uint64_t>() > 0);
    const auto disk = probe_system(SystemFacet::Disk);
    CHECK(disk.disposition == Disposition::PayloadObtained);
}

TEST_CASE("environment facet exposes variables verbatim")
{
    ::setenv("SBX_TEST_MARKER", "marker-value", 1);
    const auto o = probe_system(SystemFacet::Environment);
    CHECK(o.disposition == Disposition::PayloadObtained);
    CHECK(o.evidence.payload["variables"]["SBX_TEST_MARKER"] == "marker-value");
    ::unsetenv("SBX_TEST_MARKER");
}

TEST_CASE("locale echoes TZ")
{
    const char* old = std::getenv("TZ");
    const std::string saved = old ? old : "";
    ::setenv("TZ", "UTC", 1);
    const auto o = probe_system(SystemFacet::Locale);
    CHECK(o.disposition == Disposition::PayloadObtained);
    CHECK(o.evidence.payload["timezone"] == "UTC");
    CHECK(o.evidence.payload["timezone_source"] == "TZ");
    if (old)
        ::setenv("TZ", saved.c_str(), 1);
    else
        ::unsetenv("TZ");
    ::tzset();
}

TEST_CASE("sensor absence is a denial, never unknown")
{
    const auto o = probe_system(SystemFacet::Sensor);
    CHECK(o.disposition != Disposition::InternalFailure);
    if (o.disposition == Disposition::SourceUnavailable) CHECK(o.detail == "source unavailable");
}

TEST_CASE("pid and user facets record what they saw")
{
    const auto pid = probe_system(SystemFacet::Pid);
    CHECK(pid.evidence.payload["visible_count"].get<int>() >= 1);
    CHECK(pid.evidence.payload["own_count"].get<int>() >= 1);
    const auto user = probe_system(SystemFacet::User);
    CHECK(user.evidence.payload["account_count"].get<int>() >= 1);
    CHECK(user.disposition != Disposition::InternalFailure);
}

TEST_CASE("scope resolution")
{
    testing::TempDir dir;
    const auto work = dir.path() / "w";
    fs::create_directory(work);
    CHECK(resolve_scope(DirScope::Working, work) == work);
    CHECK(resolve_scope(DirScope::Parent, work) == dir.path());
    CHECK(resolve_scope(DirScope::Root, work) == fs::path("/"));
    const auto o = probe_directory(DirScope::Working, false, 1, 10, work);
    CHECK(o.disposition == Disposition::PayloadObtained);
    CHECK(o.evidence.payload["path"] == work.string());
}

TEST_CASE("parent enumeration lists exactly the constructed tree")
{
    testing::TempDir dir;
    std::set<std::string> manifest;
    const auto work = dir.path() / "w";
    fs::create_directory(work);
    manifest.insert(work.string());
    for (const char* name : {"a.txt", "b.bin", "c"}) {
        std::ofstream(dir.path() / name) << name;
        manifest.insert((dir.path() / name).string());
    }
    std::ofstream(work / "deeper") << "not listed at depth 1";
    const auto o = probe_directory(DirScope::Parent, true, 1, 100, work);
    REQUIRE(o.disposition == Disposition::PayloadObtained);
    CHECK(listed(o) == manifest);
    CHECK(o.evidence.payload["file_count"] == 3);
    CHECK(o.evidence.payload["directory_count"] == 1);
}

TEST_CASE("listing cap keeps counts exact")
{
    testing::TempDir dir;
    for (int i = 0; i < 12; ++i) std::ofstream(dir.path() / ("f" + std::to_string(i))) << i;
    const auto o = enumerate_directory(dir.path(), 3, 5);
    CHECK(o.evidence.payload["entries"].size() == 5);
    CHECK(o.evidence.payload["entry_count"] == 12);
    CHECK(o.evidence.payload["listed_truncated"] == true);
}

TEST_CASE("symlinks are listed, not followed")
{
    testing::TempDir dir;
    fs::create_directory(dir.path() / "real");
    std::ofstream(dir.path() / "real" / "inside") << 1;
    fs::create_directory_symlink(dir.path() / "real", dir.path() / "link");
    const auto o = enumerate_directory(dir.path(), 5, 100);
    const auto names = listed(o);
    CHECK(names.count((dir.path() / "link").string()) == 1);
    CHECK(names.count((dir.path() / "link" / "inside").string()) == 0);
}

TEST_CASE("missing directory is not unknown")
{
    const auto o = enumerate_directory("/nonexistent/sbx", 2, 10);
    CHECK(o.disposition == Disposition::SourceUnavailable);
}

TEST_CASE("metadata: ownership, permission, attributes")
{
    testing::TempDir dir;
    const auto f = dir.path() / "ro";
    std::ofstream(f) << "12345";
    ::chmod(f.c_str(), 0444);

    const auto own = probe_metadata(MetadataKind::Ownership, dir.path(), 1, 10);
    REQUIRE(own.evidence.payload["entries"].size() == 1);
    struct stat st {};
    ::stat(f.c_str(), &st);
    CHECK(st.st_uid == ::geteuid());
    const auto row = own.evidence.payload["entries"][0];
    CHECK(row["path"] == f.string());

    const auto perm = probe_metadata(MetadataKind::Permission, dir.path(), 1, 10);
    const auto prow = perm.evidence.payload["entries"][0];
    CHECK(prow["mode"] == "0444");
    for (const char* cls : {"user", "group", "other"}) CHECK(prow[cls].get<std::string>()[1] == '-');

    const auto attr = probe_metadata(MetadataKind::Attributes, dir.path(), 1, 10);
    CHECK(attr.evidence.payload["entries"][0]["size"] == 5);
    CHECK(attr.disposition == Disposition::PayloadObtained);
}

TEST_CASE("triplets")
{
    CHECK(permission_triplet(7) == "rwx");
    CHECK(permission_triplet(5) == "r-x");
    CHECK(permission_triplet(0) == "---");
}

TEST_CASE("walk skips unreadable directories and reports mounts")
{
    WalkStats stats;
    std::size_t seen = 0;
    CHECK(walk_tree("/proc/self", 1, [&](const WalkEntry&) { ++seen; }, stats) == 0);
    CHECK(seen == stats.entries);
    CHECK(is_volatile_filesystem(filesystem_type("/proc")));
    CHECK_FALSE(is_volatile_filesystem(filesystem_type("/usr")));
}

}
