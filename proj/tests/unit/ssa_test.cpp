#include <gtest/gtest.h>

#include "cascade/frontend.hpp"
#include "cascade/ir.hpp"
#include "oracles.hpp"

using namespace cascade;

namespace {

struct Lowered {
    std::string selector;
    ir::IrFunction tac;
    ir::IrFunction ssa;
};

std::vector<Lowered> lower_corpus() {
    VM vm;
    auto corpus = oracle::equivalence_corpus();
    for (const auto& m : corpus) vm.add_method(m);
    std::vector<Lowered> out;
    for (const auto& m : corpus) {
        MethodNode node = compile_front(m);
        ir::IrFunction tac = ir::lower(node, vm.methods());
        out.push_back({node.selector, tac, ir::to_ssa(tac)});
    }
    return out;
}

}  // namespace

TEST(Ssa, EveryRegisterHasOneDefinition) {
    for (const auto& f : lower_corpus()) {
        EXPECT_EQ(oracle::single_definition(f.ssa), "") << f.selector;
        EXPECT_EQ(ir::verify(f.ssa), "") << f.selector;
        EXPECT_TRUE(f.ssa.ssa);
    }
}

TEST(Ssa, PhiPlacementMatchesBruteForceFrontiers) {
    std::size_t with_phis = 0;
    for (const auto& f : lower_corpus()) {
        auto expected = oracle::expected_phis(f.ssa);
        EXPECT_EQ(oracle::actual_phis(f.ssa), expected) << f.selector << "\n" << ir::print_function(f.ssa);
        if (!expected.empty()) ++with_phis;
    }
    EXPECT_GE(with_phis, 10u);
}

TEST(Ssa, ImmediateDominatorsMatchOracle) {
    for (const auto& f : lower_corpus()) {
        EXPECT_EQ(ir::immediate_dominators(f.ssa), oracle::immediate_dominators(oracle::cfg_of(f.ssa))) << f.selector;
    }
}

TEST(Ssa, NoCriticalEdgesRemain) {
    for (const auto& f : lower_corpus()) {
        auto g = oracle::cfg_of(f.ssa);
        std::vector<int> preds(g.size(), 0);
        for (const auto& succ : g)
            for (auto s : succ) ++preds[s];
        for (std::size_t b = 0; b < g.size(); ++b)
            if (g[b].size() > 1)
                for (auto s : g[b]) EXPECT_LE(preds[s], 1) << f.selector << " edge L" << b << "->L" << s;
    }
}

TEST(Ssa, PhiArityMatchesPredecessors) {
    for (const auto& f : lower_corpus()) {
        auto preds = f.ssa.predecessors();
        for (std::size_t b = 0; b < f.ssa.blocks.size(); ++b)
            for (const auto& phi : f.ssa.blocks[b].phis) EXPECT_EQ(phi.incoming.size(), preds[b].size()) << f.selector;
    }
}

TEST(Ssa, IdempotentOnSsaInput) {
    for (const auto& f : lower_corpus()) EXPECT_EQ(ir::to_ssa(f.ssa), f.ssa) << f.selector;
}

TEST(Ssa, FrontierOracleOnDiamond) {
    // 0 -> 1, 0 -> 2, 1 -> 3, 2 -> 3
    oracle::Graph g{{1, 2}, {3}, {3}, {}};
    auto df = oracle::frontiers(g);
    EXPECT_EQ(df[1], std::set<std::size_t>{3});
    EXPECT_EQ(df[2], std::set<std::size_t>{3});
    EXPECT_TRUE(df[0].empty());
    EXPECT_EQ(oracle::immediate_dominators(g), (std::vector<std::size_t>{0, 0, 0, 0}));
}

TEST(Ssa, FrontierOracleOnLoop) {
    // 0 -> 1, 1 -> 2, 2 -> 1, 1 -> 3
    oracle::Graph g{{1}, {2, 3}, {1}, {}};
    auto df = oracle::frontiers(g);
    EXPECT_EQ(df[2], std::set<std::size_t>{1});
    EXPECT_EQ(df[1], std::set<std::size_t>{1});
    EXPECT_EQ(oracle::iterated_frontier(g, {2}), std::set<std::size_t>{1});
}
