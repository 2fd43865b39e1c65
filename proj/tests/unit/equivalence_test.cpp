#include <gtest/gtest.h>

#include "oracles.hpp"

TEST(Equivalence, CorpusHasEnoughMethods) { EXPECT_GE(oracle::equivalence_corpus().size(), 30u); }

TEST(Equivalence, AllBackendsAgree) {
    auto report = oracle::run_equivalence(100, false);
    EXPECT_GE(report.methods, 30u);
    EXPECT_GE(report.tuples, report.methods * 100);
    // Failures must agree too, but a corpus that mostly fails proves little.
    EXPECT_LT(report.failures_agreed, report.tuples / 20);
    for (const auto& m : report.mismatches) ADD_FAILURE() << m.selector << ": " << m.detail;
}

TEST(Equivalence, AllBackendsAgreeUnderGcTorture) {
    auto report = oracle::run_equivalence(20, true, 7);
    EXPECT_GT(report.collections, 100u);
    for (const auto& m : report.mismatches) ADD_FAILURE() << m.selector << ": " << m.detail;
}
