#include "cascade/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include "json.hpp"
#include <unistd.h>

#include "cascade/plugin.hpp"

namespace cascade {

namespace {

constexpr const char* kDriver = "createObjects: n\n\tn timesRepeat: [self basicNew].\n\t^ n";

constexpr const char* kPrintAddress =
    "printAddress: o\n"
    "\t<var: #o type: #oop>\n"
    "\t^ self callVMFunction: #printOop withArguments: {o}";

// Instrumentation that allocates while reporting: it re-enters basicNew.
constexpr const char* kDescribe =
    "describe: o\n"
    "\t| scratch |\n"
    "\t<var: #o type: #oop>\n"
    "\t<var: #scratch type: #oop>\n"
    "\tscratch := self basicNew.\n"
    "\t^ self callVMFunction: #printOop withArguments: {o}";

constexpr const char* kWaterfallPlainSrc =
    "basicNew\n"
    "\t<primitive>\n"
    "\t<returns: #oop>\n"
    "\t^ self callVMFunction: #primitiveNew withArguments: {}";

constexpr const char* kWaterfallInstrumentedSrc =
    "basicNew\n"
    "\t| oop |\n"
    "\t<primitive>\n"
    "\t<var: #oop type: #oop>\n"
    "\t<returns: #oop>\n"
    "\toop := self stackAt: 0.\n"
    "\tself callVMFunction: #printOop withArguments: {oop}.\n"
    "\t^ self callVMFunction: #primitiveNew withArguments: {}";

constexpr const char* kReflectiveUnsafeSrc =
    "basicNew\n"
    "\t| obj |\n"
    "\t<var: #obj type: #oop>\n"
    "\t<returns: #oop>\n"
    "\tobj := self unmodifiedBasicNew.\n"
    "\tself printAddress: obj.\n"
    "\t^ obj";

constexpr const char* kReflectiveSafeSrc =
    "basicNew\n"
    "\t<returns: #oop>\n"
    "\tself ifStackContains: #basicNew do: [^ self unmodifiedBasicNew].\n"
    "\tself printAddress: self.\n"
    "\t^ self unmodifiedBasicNew";

void install_unmodified(VM& vm, const std::string& selector) {
    vm.install_builtin(selector, [](VM& v, Oop receiver, std::span<const Oop>) { return v.instantiate(receiver); });
}

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::vector<long> default_points() {
    std::vector<long> p;
    for (long n = 100; n <= 1000; n += 100) p.push_back(n);
    return p;
}

std::filesystem::path corpus_dir() {
    if (const char* env = std::getenv("CASCADE_CORPUS")) return env;
#ifdef CASCADE_CORPUS_DIR
    return CASCADE_CORPUS_DIR;
#else
    return "corpus";
#endif
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void fill_relative(std::vector<BenchRow>& rows, const std::string& baseline) {
    std::map<long, double> base;
    for (const auto& r : rows)
        if (r.config == baseline && r.note.empty()) base[r.point] = r.mean_ms;
    for (auto& r : rows) {
        auto it = base.find(r.point);
        r.relative = it != base.end() && it->second > 0 ? r.mean_ms / it->second : std::nan("");
    }
}

}  // namespace

const std::vector<std::string>& basicnew_configs() {
    static const std::vector<std::string> kConfigs = {kUnmodified, kWaterfallPlain, kWaterfallInstrumented,
                                                      kReflectiveUnsafe, kReflectiveSafe};
    return kConfigs;
}

void install_basicnew(VM& vm, std::string_view config) {
    if (vm.methods().find_method("createObjects:") == nullptr) vm.add_source(kDriver);
    if (vm.methods().find_method("printAddress:") == nullptr) vm.add_source(kPrintAddress);
    if (config == kUnmodified) {
        install_unmodified(vm, "basicNew");
    } else if (config == kWaterfallPlain) {
        vm.install_primitive({"Behavior", "basicNew", kWaterfallPlainSrc});
    } else if (config == kWaterfallInstrumented) {
        vm.install_primitive({"Behavior", "basicNew", kWaterfallInstrumentedSrc});
    } else if (config == kReflectiveUnsafe || config == kReflectiveSafe) {
        install_unmodified(vm, "unmodifiedBasicNew");
        vm.install_reflective(
            {"Behavior", "basicNew", config == kReflectiveSafe ? kReflectiveSafeSrc : kReflectiveUnsafeSrc});
    } else {
        throw BenchConfigError("unknown basicnew config: " + std::string(config));
    }
}

void install_recursive_instrumentation(VM& vm, bool guarded) {
    if (vm.methods().find_method("describe:") == nullptr) vm.add_source(kDescribe);
    if (vm.methods().find_method("createObjects:") == nullptr) vm.add_source(kDriver);
    install_unmodified(vm, "unmodifiedBasicNew");
    std::string src = "basicNew\n\t| obj |\n\t<var: #obj type: #oop>\n\t<returns: #oop>\n";
    if (guarded) src += "\tself ifStackContains: #basicNew do: [^ self unmodifiedBasicNew].\n";
    src += "\tobj := self unmodifiedBasicNew.\n\tself describe: obj.\n\t^ obj";
    vm.install_reflective({"Behavior", "basicNew", src});
}

Word create_objects(VM& vm, Word n) {
    return vm.send("createObjects:", vm.class_named("Point").bits(), std::span<const Word>(&n, 1));
}

Stats summarize(const std::vector<double>& samples) {
    Stats s;
    if (samples.empty()) return s;
    for (double x : samples) s.mean += x;
    s.mean /= static_cast<double>(samples.size());
    if (samples.size() < 2) return s;
    double acc = 0;
    for (double x : samples) acc += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(samples.size() - 1));
    return s;
}

BenchConfig validate(BenchConfig cfg) {
    bool basicnew = cfg.experiment == "basicnew";
    if (!basicnew && cfg.experiment != "fileplugin") throw BenchConfigError("unknown experiment: " + cfg.experiment);
    if (cfg.runs < 2) throw BenchConfigError("runs must be at least 2");
    if (cfg.points.empty()) cfg.points = default_points();
    for (long p : cfg.points) {
        if (p < 0) throw BenchConfigError("points must not be negative");
        if (basicnew && p == 0) throw BenchConfigError("basicnew points must be positive");
    }
    std::vector<std::string> known =
        basicnew ? basicnew_configs() : std::vector<std::string>{"direct", "compiled-plugin"};
    if (cfg.configs.empty()) cfg.configs = known;
    for (const auto& c : cfg.configs)
        if (std::find(known.begin(), known.end(), c) == known.end())
            throw BenchConfigError("unknown config for " + cfg.experiment + ": " + c);
    return cfg;
}

namespace {

// Configs are sampled round-robin within each run so that drift in machine
// load spreads evenly over them. The first run of every (config, point) is
// reported separately as first_call_ms.
using Sampler = std::function<double(std::size_t config, long point, int run)>;

std::vector<BenchRow> measure_interleaved(const BenchConfig& cfg, const Sampler& sample, const char* note_prefix) {
    const std::size_t n = cfg.configs.size();
    std::vector<BenchRow> rows;
    for (long point : cfg.points) {
        std::vector<std::vector<double>> samples(n);
        std::vector<BenchRow> point_rows;
        for (std::size_t c = 0; c < n; ++c) point_rows.push_back({cfg.configs[c], point, 0, 0, 0, 0, {}});
        for (int run = 0; run <= cfg.runs; ++run)
            for (std::size_t c = 0; c < n; ++c) {
                if (!point_rows[c].note.empty()) continue;
                try {
                    double ms = sample(c, point, run);
                    if (run == 0)
                        point_rows[c].first_call_ms = ms;
                    else
                        samples[c].push_back(ms);
                } catch (const std::exception& e) {
                    point_rows[c].note = std::string(note_prefix) + e.what();
                }
            }
        for (std::size_t c = 0; c < n; ++c) {
            if (point_rows[c].note.empty()) {
                Stats s = summarize(samples[c]);
                point_rows[c].mean_ms = s.mean;
                point_rows[c].stddev_ms = s.stddev;
            }
            rows.push_back(point_rows[c]);
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [&](const BenchRow& a, const BenchRow& b) {
        auto rank = [&](const std::string& c) { return std::find(cfg.configs.begin(), cfg.configs.end(), c) - cfg.configs.begin(); };
        return rank(a.config) < rank(b.config);
    });
    return rows;
}

VmOptions bench_options() {
    VmOptions options;
    options.gc_torture = false;
    return options;
}

}  // namespace

std::vector<BenchRow> bench_basicnew(const BenchConfig& raw) {
    BenchConfig cfg = raw;
    cfg.experiment = "basicnew";
    cfg = validate(std::move(cfg));
    std::vector<std::unique_ptr<VM>> vms;
    std::vector<std::unique_ptr<MemorySink>> sinks;
    for (const auto& config : cfg.configs) {
        vms.push_back(std::make_unique<VM>(bench_options()));
        sinks.push_back(std::make_unique<MemorySink>());
        vms.back()->set_sink(sinks.back().get());
        install_basicnew(*vms.back(), config);
    }
    auto rows = measure_interleaved(
        cfg,
        [&](std::size_t c, long point, int) {
            auto start = Clock::now();
            create_objects(*vms[c], static_cast<Word>(point));
            double ms = elapsed_ms(start);
            sinks[c]->clear();
            return ms;
        },
        "");
    fill_relative(rows, kUnmodified);
    return rows;
}

std::vector<BenchRow> bench_fileplugin(const BenchConfig& raw) {
    BenchConfig cfg = raw;
    cfg.experiment = "fileplugin";
    cfg = validate(std::move(cfg));
    std::filesystem::path root = cfg.root;
    bool temp_root = root.empty() && !cfg.in_memory;
    if (temp_root) {
        root = std::filesystem::temp_directory_path() / ("cascade-bench-" + std::to_string(::getpid()));
        std::filesystem::create_directories(root);
    }
    if (cfg.in_memory) root = "/bench";

    struct Subject {
        std::unique_ptr<VM> vm;
        std::unique_ptr<InMemoryFileSystem> memory;
        std::string selector;
        Plugin plugin;
    };
    std::vector<Subject> subjects;
    for (const auto& config : cfg.configs) {
        Subject s;
        s.vm = std::make_unique<VM>(bench_options());
        s.memory = std::make_unique<InMemoryFileSystem>();
        if (cfg.in_memory) {
            s.vm->set_filesystem(s.memory.get());
            s.memory->create_directory(root.string());
        }
        if (config == "direct") {
            s.selector = "createDirectoryDirect:";
            s.vm->install_builtin(s.selector, [](VM& v, Oop, std::span<const Oop> args) {
                Word path = args[0].bits();
                v.call_vm_function("createDirectory", std::span<const Word>(&path, 1));
                return v.true_object();
            });
        } else {
            s.selector = "primitiveCreateDirectory:";
            s.plugin = load_plugin(corpus_dir() / "plugins" / "file_plugin");
            PluginNativizer(*s.vm).nativize(s.plugin);
        }
        subjects.push_back(std::move(s));
    }
    auto rows = measure_interleaved(
        cfg,
        [&](std::size_t c, long point, int run) {
            Subject& s = subjects[c];
            std::string base = (root / (cfg.configs[c] + "-" + std::to_string(point) + "-" + std::to_string(run))).string();
            if (cfg.in_memory) {
                s.memory->create_directory(base);
            } else if (!std::filesystem::create_directory(base)) {
                throw Error("cannot create " + base);
            }
            Oop receiver = s.vm->class_named("Object");
            auto start = Clock::now();
            for (long i = 0; i < point; ++i) {
                Oop path = s.vm->new_string(base + "/d" + std::to_string(i));
                s.vm->call_primitive(s.selector, receiver, std::span<const Oop>(&path, 1));
            }
            double ms = elapsed_ms(start);
            if (!cfg.in_memory) std::filesystem::remove_all(base);
            return ms;
        },
        "io-error: ");
    if (temp_root) {
        std::error_code ec;
        std::filesystem::remove_all(root, ec);
    }
    fill_relative(rows, "direct");
    return rows;
}

std::vector<BenchRow> run_bench(const BenchConfig& cfg) {
    if (cfg.experiment == "fileplugin") return bench_fileplugin(cfg);
    if (cfg.experiment == "basicnew") return bench_basicnew(cfg);
    throw BenchConfigError("unknown experiment: " + cfg.experiment);
}

std::string to_csv(const std::vector<BenchRow>& rows) {
    std::string out = std::string(kCsvHeader) + "\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, ",%ld,%.6f,%.6f,%.4f,%.6f,", r.point, r.mean_ms, r.stddev_ms, r.relative,
                      r.first_call_ms);
        out += csv_field(r.config) + buf + csv_field(r.note) + "\n";
    }
    return out;
}

std::string to_json(const std::vector<BenchRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json rec = {{"config", r.config},   {"point", r.point},
                              {"mean_ms", r.mean_ms}, {"stddev_ms", r.stddev_ms},
                              {"first_call_ms", r.first_call_ms}};
        rec["relative"] = std::isnan(r.relative) ? nlohmann::json(nullptr) : nlohmann::json(r.relative);
        if (!r.note.empty()) rec["note"] = r.note;
        arr.push_back(std::move(rec));
    }
    return arr.dump(2) + "\n";
}

}  // namespace cascade
