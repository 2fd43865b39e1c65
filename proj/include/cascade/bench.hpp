#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/errors.hpp"
#include "cascade/vm.hpp"

namespace cascade {

// ---- object-creation scenarios ----

inline constexpr const char* kUnmodified = "unmodified";
inline constexpr const char* kWaterfallPlain = "waterfall-plain";
inline constexpr const char* kWaterfallInstrumented = "waterfall-instrumented";
inline constexpr const char* kReflectiveUnsafe = "reflective-unsafe";
inline constexpr const char* kReflectiveSafe = "reflective-safe";

const std::vector<std::string>& basicnew_configs();

/// Install `basicNew` the way `config` defines it, plus the language-side
/// driver `createObjects:`.
void install_basicnew(VM& vm, std::string_view config);
/// Reflective basicNew whose instrumentation itself allocates. Guarded or
/// not, for the recursion demonstration.
void install_recursive_instrumentation(VM& vm, bool guarded);
/// Run `createObjects: n` on the Point class through the interpreter.
Word create_objects(VM& vm, Word n);

// ---- harness ----

class BenchConfigError : public Error {
public:
    using Error::Error;
};

struct BenchConfig {
    std::string experiment = "basicnew";  // basicnew | fileplugin
    std::vector<long> points;             // empty: experiment default
    int runs = 50;
    std::vector<std::string> configs;     // empty: all
    std::filesystem::path root;           // fileplugin; empty: temp dir
    bool in_memory = false;               // fileplugin on InMemoryFileSystem
};

struct BenchRow {
    std::string config;
    long point = 0;
    double mean_ms = 0;
    double stddev_ms = 0;
    double relative = 0;
    double first_call_ms = 0;
    std::string note;
};

struct Stats {
    double mean = 0;
    double stddev = 0;  // sample standard deviation
};
Stats summarize(const std::vector<double>& samples);

/// Fill defaults and reject invalid settings (BenchConfigError).
BenchConfig validate(BenchConfig cfg);

std::vector<BenchRow> bench_basicnew(const BenchConfig& cfg);
std::vector<BenchRow> bench_fileplugin(const BenchConfig& cfg);
std::vector<BenchRow> run_bench(const BenchConfig& cfg);

inline constexpr const char* kCsvHeader = "config,point,mean_ms,stddev_ms,relative,first_call_ms,note";
std::string to_csv(const std::vector<BenchRow>& rows);
std::string to_json(const std::vector<BenchRow>& rows);

}  // namespace cascade
