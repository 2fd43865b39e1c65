// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "cascade/bench.hpp"
#include "cascade/errors.hpp"
#include "cascade/frontend.hpp"
#include "cascade/plugin.hpp"
#include "oracles.hpp"

using namespace cascade;

namespace {

// Tolerances.
constexpr std::size_t kMinCorpus = 30;
constexpr std::size_t kEquivalenceTuples = 100;
constexpr double kEquivalenceSeconds = 60.0;
constexpr int kCallsPerPrimitive = 1000;
constexpr Word kCreatedObjects = 10000;
constexpr std::size_t kRecursionBudget = 2000;
constexpr std::size_t kTortureTuples = 20;
constexpr std::uint64_t kMinTortureCollections = 100;
constexpr long kBasicNewPoint = 1000;
constexpr int kBasicNewRuns = 50;
constexpr double kInstrumentedOverPlainMax = 1.5;
constexpr double kSafeOverInstrumentedMin = 2.0;
constexpr long kFilePluginPoint = 1000;
constexpr int kFilePluginRuns = 10;
constexpr double kCompiledOverDirectMax = 1.3;
constexpr std::size_t kParityPaths = 500;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Check = std::function<Outcome()>;

double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

Outcome equivalence() {
    auto start = std::chrono::steady_clock::now();
    auto r = oracle::run_equivalence(kEquivalenceTuples, false);
    double secs = seconds_since(start);
    std::ostringstream d;
    d << r.methods << " methods, " << r.tuples << " tuples, " << r.mismatches.size() << " mismatches, " << secs << " s";
    if (!r.mismatches.empty()) d << "; first: " << r.mismatches[0].selector << " " << r.mismatches[0].detail;
    return {r.methods >= kMinCorpus && r.mismatches.empty() && secs < kEquivalenceSeconds, d.str()};
}

Outcome lazy_compilation() {
    VM vm;
    MemorySink sink;
    vm.set_sink(&sink);
    auto corpus = oracle::equivalence_corpus();
    std::vector<std::string> selectors;
    for (const auto& m : corpus) vm.add_method(m);
    for (const auto& m : corpus) selectors.push_back(vm.install_primitive(m).selector);
    for (const auto& s : selectors)
        if (vm.primitive(s)->compile_count != 0) return {false, s + " compiled before its first call"};

    Oop receiver = vm.class_named("Point");
    std::mt19937_64 rng(11);
    for (const auto& s : selectors) {
        auto values = oracle::random_tuple(rng, vm.primitive(s)->signature.params.size());
        std::vector<Oop> args;
        for (auto v : values) args.push_back(Oop::from_int(v));
        for (int i = 0; i < kCallsPerPrimitive; ++i) vm.invoke_raw(s, receiver, args, Backend::Native);
        if (vm.primitive(s)->compile_count != 1)
            return {false, s + " compiled " + std::to_string(vm.primitive(s)->compile_count) + " times"};
        vm.mark_dirty(s);
        vm.invoke_raw(s, receiver, args, Backend::Native);
        vm.invoke_raw(s, receiver, args, Backend::Native);
        if (vm.primitive(s)->compile_count != 2) return {false, s + " not recompiled exactly once after mark_dirty"};
    }
    return {true, std::to_string(selectors.size()) + " primitives x " + std::to_string(kCallsPerPrimitive) +
                      " calls: 1 compile each, 2 after mark_dirty"};
}

Outcome instrumentation_and_guard() {
    std::ostringstream d;
    bool ok = true;
    {
        VM vm;
        MemorySink sink;
        vm.set_sink(&sink);
        install_basicnew(vm, kWaterfallInstrumented);
        vm.reset_guard_checks();
        Word made = create_objects(vm, kCreatedObjects);
        std::size_t lines = count_lines(sink.text());
        d << "instrumented: " << lines << " lines, " << vm.guard_checks() << " guard checks";
        ok = ok && made == kCreatedObjects && lines == kCreatedObjects && vm.guard_checks() == 0 &&
             vm.primitive("basicNew")->compile_count == 1;
    }
    VmOptions options;
    options.interp.step_budget = kRecursionBudget;
    {
        VM vm(options);
        MemorySink sink;
        vm.set_sink(&sink);
        install_recursive_instrumentation(vm, false);
        bool exhausted = false;
        try {
            create_objects(vm, 1);
        } catch (const StepBudgetExceeded&) {
            exhausted = true;
        }
        d << "; unguarded " << (exhausted ? "exceeds" : "stays within") << " the step budget";
        ok = ok && exhausted;
    }
    {
        VM vm(options);
        MemorySink sink;
        vm.set_sink(&sink);
        install_recursive_instrumentation(vm, true);
        bool done = false;
        try {
            done = create_objects(vm, 1) == 1;
        } catch (const std::exception& e) {
            d << " (" << e.what() << ")";
        }
        d << "; guarded " << (done ? "completes" : "fails") << " with " << count_lines(sink.text()) << " line(s)";
        ok = ok && done && count_lines(sink.text()) == 1;
    }
    return {ok, d.str()};
}

Outcome torture() {
    auto r = oracle::run_equivalence(kTortureTuples, true, 7);
    std::ostringstream d;
    d << r.collections << " collections, " << r.mismatches.size() << " mismatches";
    bool ok = r.mismatches.empty() && r.collections > kMinTortureCollections;

    VmOptions options;
    options.gc_torture = true;
    VM vm(options);
    vm.install_primitive({"Slang", "",
                          "probe: o <var: #o type: #oop> | live | "
                          "live := self callVMFunction: #collectGarbage withArguments: {}. "
                          "^ self fetchPointer: 1 ofObject: (self stackAt: 1)"});
    bool survived = true;
    for (int round = 0; round < 50; ++round) {
        Oop obj = vm.instantiate(vm.class_named("Point"));
        Heap::slot(obj, 1) = static_cast<Word>(4000 + round);
        auto out = vm.invoke_raw("probe:", vm.nil(), std::span<const Oop>(&obj, 1), Backend::Native);
        survived = survived && !out.failed && out.raw == static_cast<Word>(4000 + round);
    }
    d << "; pinned argument " << (survived ? "survives" : "lost") << " collections inside native code";
    return {ok && survived, d.str()};
}

double mean_of(const std::vector<BenchRow>& rows, const std::string& config) {
    for (const auto& r : rows)
        if (r.config == config) return r.mean_ms;
    return -1;
}

Outcome basicnew_overhead() {
    BenchConfig cfg;
    cfg.points = {kBasicNewPoint};
    cfg.runs = kBasicNewRuns;
    auto rows = run_bench(cfg);
    std::ostringstream d;
    std::vector<double> means;
    for (const auto& c : basicnew_configs()) {
        means.push_back(mean_of(rows, c));
        d << c << "=" << means.back() << "ms ";
    }
    bool ordered = std::is_sorted(means.begin(), means.end()) &&
                   std::adjacent_find(means.begin(), means.end()) == means.end();
    double instr_plain = means[2] / means[1];
    double safe_instr = means[4] / means[2];
    d << "; instrumented/plain=" << instr_plain << " safe/instrumented=" << safe_instr;
    return {ordered && instr_plain <= kInstrumentedOverPlainMax && safe_instr >= kSafeOverInstrumentedMin, d.str()};
}

Outcome hot_swap() {
    VM vm;
    Plugin p;
    p.name = "Swap";
    p.target_class = "Swap";
    p.mode = CompileMode::Eager;
    p.add_method({"Swap", "", "answer ^ 41"});
    p.add_method({"Swap", "", "twice: x ^ x * 2"});
    p.add_method({"Swap", "", "sum: a with: b ^ a + b"});
    PluginNativizer nat(vm);
    if (!nat.nativize(p).ok()) return {false, "plugin did not install"};
    Oop receiver = vm.class_named("Swap");
    auto code = [&](const char* s) { return vm.primitive(s)->compiled->artifact.code; };
    auto twice = code("twice:"), sum = code("sum:with:");
    Word before = nat.call(p, "answer", receiver, {}).to_int();
    nat.edit(p, "answer", "answer ^ 42");
    Word after = nat.call(p, "answer", receiver, {}).to_int();
    bool siblings = code("twice:") == twice && code("sum:with:") == sum && nat.compile_count("twice:") == 1 &&
                    nat.compile_count("sum:with:") == 1;
    std::ostringstream d;
    d << "answer " << before << " -> " << after << ", answer compiles=" << nat.compile_count("answer")
      << ", siblings " << (siblings ? "byte-identical" : "changed");
    return {before == 41 && after == 42 && nat.compile_count("answer") == 2 && siblings, d.str()};
}

Outcome file_plugin() {
    BenchConfig cfg;
    cfg.experiment = "fileplugin";
    cfg.points = {kFilePluginPoint};
    cfg.runs = kFilePluginRuns;
    auto rows = run_bench(cfg);
    std::ostringstream d;
    bool notes = false;
    for (const auto& r : rows) notes = notes || !r.note.empty();
    double direct = mean_of(rows, "direct"), compiled = mean_of(rows, "compiled-plugin");
    double ratio = compiled / direct;
    d << "direct=" << direct << "ms compiled=" << compiled << "ms ratio=" << ratio;
    auto parity = oracle::file_plugin_parity(kParityPaths, 5);
    d << "; parity over " << parity.paths.size() << " paths (" << parity.successes << " ok, " << parity.failures
      << " failed): " << (parity.agree ? "agree" : "DISAGREE");
    return {!notes && ratio <= kCompiledOverDirectMax && parity.agree && parity.successes > 0 && parity.failures > 0,
            d.str()};
}

Outcome ssa_form() {
    VM vm;
    auto corpus = oracle::equivalence_corpus();
    for (const auto& m : corpus) vm.add_method(m);
    std::size_t with_phis = 0;
    for (const auto& m : corpus) {
        auto node = compile_front(m);
        ir::IrFunction ssa = ir::to_ssa(ir::lower(node, vm.methods()));
        std::string problem = oracle::single_definition(ssa);
        if (!problem.empty()) return {false, node.selector + ": " + problem};
        auto expected = oracle::expected_phis(ssa), actual = oracle::actual_phis(ssa);
        if (expected != actual) return {false, node.selector + ": phi placement differs from the frontier oracle"};
        if (!actual.empty()) ++with_phis;
    }
    return {true, std::to_string(corpus.size()) + " functions single-definition, phis match oracle (" +
                      std::to_string(with_phis) + " with phis)"};
}

}  // namespace

int main() {
    const std::pair<const char*, Check> criteria[] = {
        {"backend equivalence", equivalence},
        {"lazy compile once", lazy_compilation},
        {"instrumentation and recursion guard", instrumentation_and_guard},
        {"gc torture and pinned slot", torture},
        {"basicNew overhead ordering", basicnew_overhead},
        {"hot swap", hot_swap},
        {"file plugin cost and parity", file_plugin},
        {"ssa form", ssa_form},
    };
    int failed = 0, n = 0;
    for (const auto& [name, check] : criteria) {
        ++n;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
