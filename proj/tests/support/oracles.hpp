#pragma once
// Independent reference computations the tests compare the library against.
// Nothing here calls the code under test beyond reading its data structures.

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cascade/ast.hpp"
#include "cascade/filesystem.hpp"
#include "cascade/ir.hpp"
#include "cascade/vm.hpp"

namespace oracle {

using cascade::Word;

std::filesystem::path corpus_root();
std::vector<cascade::SourceMethod> equivalence_corpus();

// ---- graphs ----

using Graph = std::vector<std::vector<std::size_t>>;  // successor lists

Graph cfg_of(const cascade::ir::IrFunction& fn);
/// dom[b] = blocks dominating b, by deleting each candidate and re-walking.
std::vector<std::set<std::size_t>> dominators(const Graph& g);
std::vector<std::size_t> immediate_dominators(const Graph& g);
/// DF(x) = { y : x dominates a predecessor of y, x does not strictly dominate y }.
std::vector<std::set<std::size_t>> frontiers(const Graph& g);
std::set<std::size_t> iterated_frontier(const Graph& g, const std::set<std::size_t>& defs);
/// Warshall closure over an adjacency matrix.
std::vector<std::vector<bool>> closure(std::vector<std::vector<bool>> adj);

// ---- SSA ----

/// Phi sites a semi-pruned construction must produce on an SSA function's
/// own CFG, derived from the origin of each register: (block index, origin).
std::set<std::pair<std::size_t, cascade::ir::VReg>> expected_phis(const cascade::ir::IrFunction& ssa);
std::set<std::pair<std::size_t, cascade::ir::VReg>> actual_phis(const cascade::ir::IrFunction& ssa);
/// Empty if every register has exactly one definition and every use is defined.
std::string single_definition(const cascade::ir::IrFunction& ssa);

// ---- equivalence ----

/// Random small-integer argument values, biased toward edges.
std::vector<std::int64_t> random_tuple(std::mt19937_64& rng, std::size_t arity);

struct Mismatch {
    std::string selector;
    std::vector<std::int64_t> args;
    std::string detail;
};

struct EquivalenceReport {
    std::size_t methods = 0;
    std::size_t tuples = 0;
    std::size_t failures_agreed = 0;
    std::uint64_t collections = 0;
    std::vector<Mismatch> mismatches;
};

/// Run every corpus method on all four backends with `tuples` random
/// argument tuples each and compare raw result words and failure flags.
EquivalenceReport run_equivalence(std::size_t tuples, bool torture, std::uint64_t seed = 20240601);

// ---- file plugin ----

/// Random directory paths under /r, with repeats and missing parents so
/// that some creations must fail.
std::vector<std::string> random_paths(std::mt19937_64& rng, std::size_t n);

struct ParityReport {
    std::vector<std::string> paths;
    /// Outcome per path, per route: direct VM function, then the compiled
    /// plugin on each backend.
    std::map<std::string, std::vector<bool>> outcomes;
    std::size_t successes = 0;
    std::size_t failures = 0;
    bool agree = true;
};

/// Each route gets its own VM and in-memory filesystem and replays the same
/// path sequence.
ParityReport file_plugin_parity(std::size_t n, std::uint64_t seed);

}  // namespace oracle
