// Sentinel hashing: OpenMP team vs the serial reference, over a generated
// tree of small files and a few large ones.

#include <benchmark/benchmark.h>

#include <fstream>
#include <random>

#include "sandboxeval/sentinel.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& corpus()
{
    static const fs::path root = [] {
        auto dir = fs::temp_directory_path() / "sandboxeval-bench-corpus";
        if (fs::exists(dir / ".complete")) return dir;
        fs::remove_all(dir);
        std::mt19937_64 rng(1);
        for (int d = 0; d < 40; ++d) {
            const auto sub = dir / ("d" + std::to_string(d));
            fs::create_directories(sub);
            for (int f = 0; f < 50; ++f) {
                std::string body(static_cast<std::size_t>(rng() % 16384), '\0');
                for (auto& c : body) c = static_cast<char>(rng());
                std::ofstream(sub / ("f" + std::to_string(f)), std::ios::binary) << body;
            }
        }
        for (int i = 0; i < 8; ++i) {
            std::string body(512 * 1024, static_cast<char>(i));
            std::ofstream(dir / ("big" + std::to_string(i)), std::ios::binary) << body;
        }
        std::ofstream(dir / ".complete");
        return dir;
    }();
    return root;
}

void BM_SentinelParallel(benchmark::State& state)
{
    const std::vector<fs::path> roots{corpus()};
    for (auto _ : state) benchmark::DoNotOptimize(sandboxeval::sentinel_hash(roots));
}

void BM_SentinelSerial(benchmark::State& state)
{
    const std::vector<fs::path> roots{corpus()};
    for (auto _ : state) benchmark::DoNotOptimize(sandboxeval::sentinel_hash_serial(roots));
}

BENCHMARK(BM_SentinelParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SentinelSerial)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
