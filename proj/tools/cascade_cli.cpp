// cascade: command-line driver for the nativization pipeline.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cascade/bench.hpp"
#include "cascade/codegen.hpp"
#include "cascade/frontend.hpp"
#include "cascade/ir.hpp"
#include "cascade/plugin.hpp"
#include "cascade/reachability.hpp"
#include "cascade/vm.hpp"

using namespace cascade;

namespace {

constexpr int kOk = 0;
constexpr int kUserError = 1;
constexpr int kInternalError = 2;

// Thrown for problems the user can fix: missing files, bad selectors, bad args.
struct UsageError : Error {
    using Error::Error;
};

std::vector<SourceMethod> read_methods(const std::string& file) {
    if (!std::filesystem::exists(file)) throw UsageError("no such file: " + file);
    return load_source_file(file);
}

const SourceMethod& find_source(const std::vector<SourceMethod>& methods, const std::string& selector) {
    for (const auto& m : methods)
        if (compile_front(m).selector == selector) return m;
    throw UsageError("selector " + selector + " not defined in file");
}

// A VM holding every method of the file in its language-side table.
void load_into(VM& vm, const std::vector<SourceMethod>& methods) {
    for (const auto& m : methods) vm.add_method(m);
}

int cmd_parse(const std::string& file) {
    for (const auto& m : read_methods(file)) std::cout << print_method(compile_front(m)) << "\n";
    return kOk;
}

int cmd_reachable(const std::string& file, const std::string& selector) {
    auto methods = read_methods(file);
    find_source(methods, selector);
    VM vm;
    load_into(vm, methods);
    ReachableSet r = reachable_methods(selector, vm.methods());
    for (const auto& s : r.selectors) std::cout << s << "\n";
    for (const auto& f : r.vm_functions) std::cout << "vm " << f << "\n";
    return kOk;
}

int cmd_ir(const std::string& file, const std::string& selector, bool ssa) {
    auto methods = read_methods(file);
    const SourceMethod& src = find_source(methods, selector);
    VM vm;
    load_into(vm, methods);
    ir::IrFunction fn = ir::lower(compile_front(src), vm.methods());
    if (ssa) fn = ir::to_ssa(std::move(fn));
    std::cout << ir::print_function(fn);
    return kOk;
}

PrimitiveSlot& install_entry(VM& vm, const std::vector<SourceMethod>& methods, const std::string& selector) {
    const SourceMethod& src = find_source(methods, selector);
    for (const auto& m : methods)
        if (&m != &src) vm.add_method(m);
    return vm.install_primitive(src);
}

int cmd_asm(const std::string& file, const std::string& selector) {
    auto methods = read_methods(file);
    VM vm;
    PrimitiveSlot& slot = install_entry(vm, methods, selector);
    vm.ensure_compiled(selector);
    std::cout << codegen::format_listing(slot.compiled->artifact);
    return kOk;
}

std::string show(Oop o) {
    if (o.is_small_int()) return std::to_string(o.to_int());
    std::ostringstream out;
    out << "oop 0x" << std::hex << o.bits();
    return out.str();
}

int cmd_run(const std::string& file, const std::string& selector, const std::vector<std::string>& raw_args,
            const std::string& backend_text) {
    auto backend = backend_from_name(backend_text);
    if (!backend) throw UsageError("unknown backend: " + backend_text);
    std::vector<Oop> args;
    for (const auto& a : raw_args) {
        try {
            std::size_t used = 0;
            long long v = std::stoll(a, &used, 0);
            if (used != a.size()) throw std::invalid_argument(a);
            args.push_back(Oop::from_int(v));
        } catch (const std::logic_error&) {
            throw UsageError("argument is not an integer: " + a);
        }
    }
    auto methods = read_methods(file);
    VM vm;
    install_entry(vm, methods, selector);
    const auto& sig = vm.primitive(selector)->signature;
    if (sig.params.size() != args.size())
        throw UsageError(selector + " takes " + std::to_string(sig.params.size()) + " arguments, got " +
                         std::to_string(args.size()));
    Oop result = vm.call_primitive(selector, vm.nil(), args, *backend);
    std::cout << show(result) << "\n";
    return kOk;
}

int cmd_swap_demo() {
    VM vm;
    Plugin p;
    p.name = "SwapDemo";
    p.target_class = "SwapDemo";
    p.mode = CompileMode::Lazy;
    p.add_method({"SwapDemo", "", "answer ^ 41"});
    p.add_method({"SwapDemo", "", "sibling: x ^ x * 2"});
    PluginNativizer nat(vm);
    nat.nativize(p);
    Oop receiver = vm.class_named("SwapDemo");
    Oop seven = Oop::from_int(7);

    std::cout << "answer -> " << show(nat.call(p, "answer", receiver, {})) << "\n";
    std::cout << "sibling: 7 -> " << show(nat.call(p, "sibling:", receiver, std::span<const Oop>(&seven, 1))) << "\n";
    auto before = vm.primitive("sibling:")->compiled->artifact.code;

    nat.edit(p, "answer", "answer ^ 42");
    std::cout << "edited answer, dirty=" << p.dirty.count("answer") << "\n";
    std::cout << "answer -> " << show(nat.call(p, "answer", receiver, {})) << "\n";
    std::cout << "sibling: 7 -> " << show(nat.call(p, "sibling:", receiver, std::span<const Oop>(&seven, 1))) << "\n";
    auto after = vm.primitive("sibling:")->compiled->artifact.code;

    std::cout << "compiles: answer=" << nat.compile_count("answer") << " sibling=" << nat.compile_count("sibling:")
              << "\n";
    std::cout << "sibling artifact " << (before == after ? "unchanged" : "CHANGED") << "\n";
    return before == after ? kOk : kInternalError;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct BenchArgs {
    std::string experiment = "basicnew";
    std::string points;
    int runs = 50;
    std::string configs;
    std::string root;
    bool in_memory = false;
    bool json = false;
    std::string out;
};

int cmd_bench(const BenchArgs& a) {
    BenchConfig cfg;
    cfg.experiment = a.experiment;
    cfg.runs = a.runs;
    cfg.configs = split_list(a.configs);
    cfg.root = a.root;
    cfg.in_memory = a.in_memory;
    for (const auto& p : split_list(a.points)) {
        try {
            cfg.points.push_back(std::stol(p));
        } catch (const std::logic_error&) {
            throw UsageError("bad point: " + p);
        }
    }
    std::vector<BenchRow> rows;
    try {
        rows = run_bench(cfg);
    } catch (const BenchConfigError& e) {
        throw UsageError(e.what());
    }
    std::string text = a.json ? to_json(rows) + "\n" : to_csv(rows);
    if (a.out.empty() || a.out == "-") {
        std::cout << text;
    } else {
        std::ofstream f(a.out);
        if (!f) throw UsageError("cannot write " + a.out);
        f << text;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cascade: nativize Slang-subset methods and run them"};
    app.require_subcommand(1);

    std::string file, selector, backend = "native";
    std::vector<std::string> run_args;
    bool ssa = false;

    auto* parse = app.add_subcommand("parse", "parse a source file and print its methods");
    parse->add_option("FILE", file)->required();

    auto* reach = app.add_subcommand("dump-reachable", "list the methods and VM functions reachable from SELECTOR");
    reach->add_option("FILE", file)->required();
    reach->add_option("SELECTOR", selector)->required();

    auto* dump_ir = app.add_subcommand("dump-ir", "print the IR of SELECTOR");
    dump_ir->add_option("FILE", file)->required();
    dump_ir->add_option("SELECTOR", selector)->required();
    dump_ir->add_flag("--ssa", ssa, "print after SSA construction");

    auto* dump_asm = app.add_subcommand("dump-asm", "print the native listing of SELECTOR");
    dump_asm->add_option("FILE", file)->required();
    dump_asm->add_option("SELECTOR", selector)->required();

    auto* run = app.add_subcommand("run", "compile SELECTOR as a primitive and call it with integer arguments");
    run->add_option("FILE", file)->required();
    run->add_option("SELECTOR", selector)->required();
    run->add_option("ARGS", run_args);
    run->add_option("--backend", backend, "native | ir | ir-tac | ir-ssa | ast");

    auto* swap = app.add_subcommand("swap-demo", "edit a live plugin primitive and show the recompiled behavior");

    BenchArgs b;
    auto* bench = app.add_subcommand("bench", "run a benchmark experiment and print CSV");
    bench->add_option("EXPERIMENT", b.experiment, "basicnew | fileplugin");
    bench->add_option("--points", b.points, "comma-separated counts");
    bench->add_option("--runs", b.runs, "timed runs per point");
    bench->add_option("--configs", b.configs, "comma-separated config subset");
    bench->add_option("--root", b.root, "directory for fileplugin");
    bench->add_flag("--in-memory", b.in_memory, "fileplugin on the in-memory filesystem");
    bench->add_flag("--json", b.json, "emit JSON records instead of CSV");
    bench->add_option("--out", b.out, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return kUserError;
    }

    try {
        if (*parse) return cmd_parse(file);
        if (*reach) return cmd_reachable(file, selector);
        if (*dump_ir) return cmd_ir(file, selector, ssa);
        if (*dump_asm) return cmd_asm(file, selector);
        if (*run) return cmd_run(file, selector, run_args, backend);
        if (*swap) return cmd_swap_demo();
        if (*bench) return cmd_bench(b);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kUserError;
    } catch (const UnknownSelector& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    } catch (const PrimitiveFailed& e) {
        std::cerr << "primitive failed: " << e.what() << "\n";
        return kUserError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternalError;
    }
    return kUserError;
}
