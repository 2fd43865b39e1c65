#include "oracles.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "cascade/frontend.hpp"
#include "cascade/plugin.hpp"

namespace oracle {

using namespace cascade;
using ir::IrFunction;
using ir::VReg;

std::filesystem::path corpus_root() {
    if (const char* env = std::getenv("CASCADE_CORPUS")) return env;
    return CASCADE_TEST_CORPUS_DIR;
}

std::vector<SourceMethod> equivalence_corpus() { return load_source_file(corpus_root() / "equivalence" / "methods.slang"); }

// ---- graphs ----

Graph cfg_of(const IrFunction& fn) {
    Graph g(fn.blocks.size());
    for (std::size_t i = 0; i < fn.blocks.size(); ++i)
        for (ir::BlockId s : fn.blocks[i].successors()) g[i].push_back(fn.index_of(s));
    return g;
}

namespace {

std::vector<bool> reach_without(const Graph& g, std::size_t removed) {
    std::vector<bool> seen(g.size(), false);
    if (removed == 0) return seen;
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        std::size_t b = stack.back();
        stack.pop_back();
        for (std::size_t s : g[b])
            if (s != removed && !seen[s]) {
                seen[s] = true;
                stack.push_back(s);
            }
    }
    return seen;
}

}  // namespace

std::vector<std::set<std::size_t>> dominators(const Graph& g) {
    auto reachable = reach_without(g, g.size());
    std::vector<std::set<std::size_t>> dom(g.size());
    for (std::size_t d = 0; d < g.size(); ++d) {
        auto seen = reach_without(g, d);
        for (std::size_t b = 0; b < g.size(); ++b)
            if (reachable[b] && (b == d || !seen[b])) dom[b].insert(d);
    }
    return dom;
}

std::vector<std::size_t> immediate_dominators(const Graph& g) {
    auto dom = dominators(g);
    std::vector<std::size_t> idom(g.size(), 0);
    for (std::size_t b = 1; b < g.size(); ++b) {
        // The strict dominator that every other strict dominator dominates.
        for (std::size_t d : dom[b]) {
            if (d == b) continue;
            bool closest = true;
            for (std::size_t e : dom[b])
                if (e != b && e != d && !dom[d].count(e)) closest = false;
            if (closest) idom[b] = d;
        }
    }
    return idom;
}

std::vector<std::set<std::size_t>> frontiers(const Graph& g) {
    auto dom = dominators(g);
    std::vector<std::set<std::size_t>> df(g.size());
    for (std::size_t p = 0; p < g.size(); ++p)
        for (std::size_t y : g[p])
            for (std::size_t x : dom[p])
                if (!(dom[y].count(x) && x != y)) df[x].insert(y);
    return df;
}

std::set<std::size_t> iterated_frontier(const Graph& g, const std::set<std::size_t>& defs) {
    auto df = frontiers(g);
    std::set<std::size_t> result;
    std::set<std::size_t> current = defs;
    for (;;) {
        std::set<std::size_t> next;
        for (std::size_t x : current) next.insert(df[x].begin(), df[x].end());
        if (next == result) return result;
        result = next;
        current = defs;
        current.insert(result.begin(), result.end());
    }
}

std::vector<std::vector<bool>> closure(std::vector<std::vector<bool>> adj) {
    const std::size_t n = adj.size();
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            if (adj[i][k])
                for (std::size_t j = 0; j < n; ++j)
                    if (adj[k][j]) adj[i][j] = true;
    return adj;
}

// ---- SSA ----

std::set<std::pair<std::size_t, VReg>> expected_phis(const IrFunction& ssa) {
    auto origin = [&](VReg r) { return ssa.vregs.at(r).origin; };
    std::map<VReg, std::set<std::size_t>> defs;
    defs[origin(ssa.receiver)].insert(0);
    for (VReg p : ssa.params) defs[origin(p)].insert(0);
    std::set<VReg> non_local;
    for (std::size_t b = 0; b < ssa.blocks.size(); ++b) {
        std::set<VReg> killed;
        auto use = [&](const ir::Operand& o) {
            if (o.is_reg() && !killed.count(origin(o.reg))) non_local.insert(origin(o.reg));
        };
        for (const auto& in : ssa.blocks[b].instrs) {
            for (const auto& o : in.operands) use(o);
            if (in.dest) {
                killed.insert(origin(*in.dest));
                defs[origin(*in.dest)].insert(b);
            }
        }
        for (const auto& o : ssa.blocks[b].terminator.operands) use(o);
    }
    Graph g = cfg_of(ssa);
    std::set<std::pair<std::size_t, VReg>> out;
    for (VReg v : non_local)
        for (std::size_t b : iterated_frontier(g, defs[v])) out.insert({b, v});
    return out;
}

std::set<std::pair<std::size_t, VReg>> actual_phis(const IrFunction& ssa) {
    std::set<std::pair<std::size_t, VReg>> out;
    for (std::size_t b = 0; b < ssa.blocks.size(); ++b)
        for (const auto& phi : ssa.blocks[b].phis) out.insert({b, ssa.vregs.at(phi.dest).origin});
    return out;
}

std::string single_definition(const IrFunction& ssa) {
    std::map<VReg, int> count;
    count[ssa.receiver]++;
    for (VReg p : ssa.params) count[p]++;
    for (const auto& b : ssa.blocks) {
        for (const auto& phi : b.phis) count[phi.dest]++;
        for (const auto& in : b.instrs)
            if (in.dest) count[*in.dest]++;
    }
    for (const auto& [r, n] : count)
        if (n != 1) return "%" + std::to_string(r) + " defined " + std::to_string(n) + " times";
    auto check = [&](VReg r) -> std::string {
        return count.count(r) ? "" : "%" + std::to_string(r) + " used but never defined";
    };
    for (const auto& b : ssa.blocks) {
        for (const auto& phi : b.phis)
            for (const auto& inc : phi.incoming)
                if (auto e = check(inc.value); !e.empty()) return e;
        for (const auto& in : b.instrs)
            for (const auto& o : in.operands)
                if (o.is_reg())
                    if (auto e = check(o.reg); !e.empty()) return e;
        for (const auto& o : b.terminator.operands)
            if (o.is_reg())
                if (auto e = check(o.reg); !e.empty()) return e;
    }
    return {};
}

// ---- equivalence ----

std::vector<std::int64_t> random_tuple(std::mt19937_64& rng, std::size_t arity) {
    static const std::int64_t kEdges[] = {0, 1, -1, 2, 63, 64, -64, 255, 1 << 20, -(1 << 20),
                                          (std::int64_t{1} << 61) - 1, -(std::int64_t{1} << 61)};
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < arity; ++i) {
        switch (rng() % 4) {
            case 0: out.push_back(kEdges[rng() % std::size(kEdges)]); break;
            case 1: out.push_back(static_cast<std::int64_t>(rng() % 201) - 100); break;
            case 2: out.push_back(static_cast<std::int64_t>(rng() % (1u << 21)) - (1 << 20)); break;
            default: out.push_back(static_cast<std::int64_t>(rng()) >> 3); break;  // full small-integer range
        }
    }
    return out;
}

EquivalenceReport run_equivalence(std::size_t tuples, bool torture, std::uint64_t seed) {
    VmOptions options;
    options.gc_torture = torture;
    VM vm(options);
    MemorySink sink;
    vm.set_sink(&sink);
    auto corpus = equivalence_corpus();
    std::vector<std::string> selectors;
    for (const auto& m : corpus) vm.add_method(m);
    for (const auto& m : corpus) selectors.push_back(vm.install_primitive(m).selector);

    // Allocating methods instantiate their receiver.
    Oop receiver = vm.class_named("Point");
    EquivalenceReport report;
    report.methods = selectors.size();
    std::mt19937_64 rng(seed);
    const Backend backends[] = {Backend::Native, Backend::IrTac, Backend::IrSsa, Backend::Ast};
    for (const auto& selector : selectors) {
        const std::size_t arity = vm.primitive(selector)->signature.params.size();
        for (std::size_t t = 0; t < tuples; ++t) {
            auto values = random_tuple(rng, arity);
            std::vector<Oop> args;
            for (auto v : values) args.push_back(Oop::from_int(v));
            RawOutcome results[4];
            std::string errors[4];
            for (int b = 0; b < 4; ++b) {
                try {
                    results[b] = vm.invoke_raw(selector, receiver, args, backends[b]);
                } catch (const std::exception& e) {
                    errors[b] = e.what();
                    results[b].failed = true;
                }
            }
            ++report.tuples;
            std::ostringstream detail;
            bool agree = true;
            for (int b = 1; b < 4; ++b)
                if (results[b].failed != results[0].failed ||
                    (!results[0].failed && results[b].raw != results[0].raw))
                    agree = false;
            if (!agree) {
                for (int b = 0; b < 4; ++b)
                    detail << backend_name(backends[b]) << "=" << (results[b].failed ? "fail" : std::to_string(results[b].raw))
                           << (errors[b].empty() ? "" : "(" + errors[b] + ")") << " ";
                report.mismatches.push_back({selector, values, detail.str()});
            } else if (results[0].failed) {
                if (std::getenv("CASCADE_EQ_VERBOSE")) std::fprintf(stderr, "%s failed: %s\n", selector.c_str(), errors[0].c_str());
                ++report.failures_agreed;
            }
        }
    }
    report.collections = vm.heap().collections();
    return report;
}

// ---- file plugin ----

std::vector<std::string> random_paths(std::mt19937_64& rng, std::size_t n) {
    static const char* kNames[] = {"a", "b", "c", "data", "tmp"};
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string path = "/r";
        const std::size_t depth = 1 + rng() % 3;
        for (std::size_t d = 0; d < depth; ++d) path += std::string("/") + kNames[rng() % std::size(kNames)];
        out.push_back(path);
    }
    return out;
}

ParityReport file_plugin_parity(std::size_t n, std::uint64_t seed) {
    ParityReport report;
    std::mt19937_64 rng(seed);
    report.paths = random_paths(rng, n);

    using Setup = std::function<void(VM&)>;
    using Create = std::function<bool(VM&, Oop)>;
    auto replay = [&](const Setup& setup, const Create& create) {
        VM vm;
        InMemoryFileSystem fs;
        fs.create_directory("/r");
        vm.set_filesystem(&fs);
        setup(vm);
        std::vector<bool> results;
        for (const auto& p : report.paths) {
            Oop path = vm.new_string(p);
            bool ok = create(vm, path);
            // a reported success must be visible in the filesystem
            if (ok && !fs.exists(p)) report.agree = false;
            results.push_back(ok);
        }
        return results;
    };

    report.outcomes["direct"] = replay([](VM&) {}, [](VM& vm, Oop path) {
        Word w = path.bits();
        try {
            vm.call_vm_function("createDirectory", std::span<const Word>(&w, 1));
            return true;
        } catch (const PrimitiveFailed&) {
            return false;
        }
    });
    const std::pair<const char*, Backend> routes[] = {
        {"native", Backend::Native}, {"ir-tac", Backend::IrTac}, {"ir-ssa", Backend::IrSsa}, {"ast", Backend::Ast}};
    for (const auto& [name, backend] : routes) {
        Backend b = backend;
        report.outcomes[name] = replay(
            [](VM& vm) {
                Plugin p = load_plugin(corpus_root() / "plugins" / "file_plugin");
                PluginNativizer(vm).nativize(p);
            },
            [b](VM& vm, Oop path) {
                try {
                    Oop receiver = vm.class_named("FilePlugin");
                    return vm.call_primitive("primitiveCreateDirectory:", receiver, std::span<const Oop>(&path, 1), b) ==
                           vm.true_object();
                } catch (const PrimitiveFailed&) {
                    return false;
                }
            });
    }
    const auto& base = report.outcomes["direct"];
    for (bool ok : base) (ok ? report.successes : report.failures)++;
    for (const auto& [name, results] : report.outcomes)
        if (results != base) report.agree = false;
    return report;
}

}  // namespace oracle
