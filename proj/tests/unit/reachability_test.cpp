#include <gtest/gtest.h>

#include <random>

#include "cascade/errors.hpp"
#include "cascade/frontend.hpp"
#include "cascade/reachability.hpp"
#include "oracles.hpp"

using namespace cascade;

namespace {

MethodTable table_of(std::initializer_list<const char*> sources) {
    MethodTable t;
    for (const char* s : sources) t.add_method(compile_front({"Slang", "", s}));
    return t;
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(Reachability, EntryWithoutSends) {
    auto t = table_of({"a ^ 1"});
    EXPECT_EQ(reachable_methods("a", t).selectors, std::vector<std::string>{"a"});
}

TEST(Reachability, DepthFirstOrder) {
    auto t = table_of({"a ^ self b", "b ^ self c", "c ^ 3"});
    EXPECT_EQ(reachable_methods("a", t).selectors, (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Reachability, MutualRecursionTerminates) {
    auto t = table_of({"a: n n = 0 ifTrue: [^ 0]. ^ self b: n - 1", "b: n ^ self a: n"});
    EXPECT_EQ(reachable_methods("a:", t).selectors, (std::vector<std::string>{"a:", "b:"}));
}

TEST(Reachability, UnknownSelector) {
    auto t = table_of({"a ^ self frobnicate"});
    try {
        reachable_methods("a", t);
        FAIL();
    } catch (const UnknownSelector& e) {
        EXPECT_EQ(e.selector(), "frobnicate");
        EXPECT_EQ(e.caller(), "a");
    }
}

TEST(Reachability, TemplatesAndVmFunctionsAreLeaves) {
    auto t = table_of({"a: x ^ (x + 1) bitAnd: (self callVMFunction: #hashMix withArguments: {x. x})"});
    t.add_vm_function({"hashMix", 2, false});
    auto r = reachable_methods("a:", t);
    EXPECT_EQ(r.selectors, std::vector<std::string>{"a:"});
    EXPECT_EQ(r.vm_functions, std::set<std::string>{"hashMix"});
}

TEST(Reachability, UnknownVmFunction) {
    auto t = table_of({"a ^ self callVMFunction: #nowhere withArguments: {}"});
    EXPECT_THROW(reachable_methods("a", t), UnknownSelector);
}

TEST(Reachability, VmFunctionArityChecked) {
    auto t = table_of({"a ^ self callVMFunction: #hashMix withArguments: {1}"});
    t.add_vm_function({"hashMix", 2, false});
    EXPECT_THROW(reachable_methods("a", t), ArityMismatch);
}

TEST(Reachability, UnreachableMethodsDoNotChangeResult) {
    auto t = table_of({"a ^ self b", "b ^ 1"});
    auto before = reachable_methods("a", t).selectors;
    t.add_method(compile_front({"Slang", "", "z ^ self a"}));
    EXPECT_EQ(reachable_methods("a", t).selectors, before);
}

TEST(Reachability, MatchesTransitiveClosureOnRandomGraphs) {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2 + rng() % 10;
        std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
        MethodTable t;
        for (std::size_t i = 0; i < n; ++i) {
            std::string body = "m" + std::to_string(i) + " ^ 0";
            for (std::size_t j = 0; j < n; ++j)
                if (rng() % 4 == 0) {
                    adj[i][j] = true;
                    body += " + self m" + std::to_string(j);
                }
            t.add_method(compile_front({"Slang", "", body}));
        }
        auto reach = oracle::closure(adj);
        for (std::size_t entry = 0; entry < n; ++entry) {
            std::set<std::string> expected{"m" + std::to_string(entry)};
            for (std::size_t j = 0; j < n; ++j)
                if (reach[entry][j]) expected.insert("m" + std::to_string(j));
            auto got = reachable_methods("m" + std::to_string(entry), t).selectors;
            EXPECT_EQ(as_set(got), expected);
            EXPECT_EQ(got.size(), expected.size()) << "duplicates in result";
            EXPECT_EQ(got.front(), "m" + std::to_string(entry));
        }
    }
}

TEST(MethodTable, TemplatesAndMethodsDisjoint) {
    auto t = table_of({"+ x ^ x"});
    EXPECT_THROW(t.check_disjoint(), Error);
}
