#include <gtest/gtest.h>

#include <cmath>

#include "cascade/bench.hpp"
#include "json.hpp"

using namespace cascade;

TEST(BenchConfig, Validation) {
    BenchConfig c;
    c.runs = 1;
    EXPECT_THROW(validate(c), BenchConfigError);
    c.runs = 2;
    c.points = {10, 0};
    EXPECT_THROW(validate(c), BenchConfigError);
    c.points = {-1};
    c.experiment = "fileplugin";
    EXPECT_THROW(validate(c), BenchConfigError);
    c.points = {0};
    EXPECT_NO_THROW(validate(c));
    c.configs = {"unmodified"};
    EXPECT_THROW(validate(c), BenchConfigError);
    c.experiment = "sorting";
    EXPECT_THROW(validate(c), BenchConfigError);
}

TEST(BenchConfig, Defaults) {
    BenchConfig c = validate(BenchConfig{});
    ASSERT_EQ(c.points.size(), 10u);
    EXPECT_EQ(c.points.front(), 100);
    EXPECT_EQ(c.points.back(), 1000);
    EXPECT_EQ(c.configs, basicnew_configs());
    EXPECT_EQ(c.configs.size(), 5u);
}

TEST(BenchStats, SampleStandardDeviation) {
    Stats s = summarize({2, 4, 4, 4, 5, 5, 7, 9});
    EXPECT_DOUBLE_EQ(s.mean, 5.0);
    EXPECT_NEAR(s.stddev, std::sqrt(32.0 / 7.0), 1e-12);
}

TEST(BenchOutput, CsvHeaderIsStable) {
    std::string csv = to_csv({});
    EXPECT_EQ(csv, "config,point,mean_ms,stddev_ms,relative,first_call_ms,note\n");
    BenchRow r{"direct", 5, 1.5, 0.25, 1.0, 2.0, "io-error: x, y"};
    csv = to_csv({r});
    EXPECT_NE(csv.find("direct,5,1.500000,0.250000,1.0000,2.000000,\"io-error: x, y\""), std::string::npos);
}

TEST(BenchRun, BasicNewRowsPerConfigAndPoint) {
    BenchConfig c;
    c.points = {20, 40};
    c.runs = 3;
    auto rows = run_bench(c);
    ASSERT_EQ(rows.size(), 10u);
    EXPECT_EQ(rows[0].config, kUnmodified);
    EXPECT_EQ(rows[0].point, 20);
    EXPECT_EQ(rows[1].point, 40);
    for (const auto& r : rows) {
        EXPECT_TRUE(r.note.empty()) << r.note;
        EXPECT_GE(r.mean_ms, 0.0);
        if (r.config == kUnmodified) EXPECT_DOUBLE_EQ(r.relative, 1.0);
    }
}

TEST(BenchRun, FilePluginZeroPointStillReported) {
    BenchConfig c;
    c.experiment = "fileplugin";
    c.points = {0, 5};
    c.runs = 2;
    c.in_memory = true;
    auto rows = run_bench(c);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0].config, "direct");
    EXPECT_EQ(rows[0].point, 0);
    for (const auto& r : rows) EXPECT_TRUE(r.note.empty()) << r.note;
}

TEST(BenchRun, HostFilePluginOnTempRoot) {
    BenchConfig c;
    c.experiment = "fileplugin";
    c.points = {10};
    c.runs = 2;
    auto rows = run_bench(c);
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& r : rows) EXPECT_TRUE(r.note.empty()) << r.note;
}

TEST(BenchRun, UnwritableRootGivesNotes) {
    BenchConfig c;
    c.experiment = "fileplugin";
    c.points = {3};
    c.runs = 2;
    c.root = "/proc/cascade-nope";
    auto rows = run_bench(c);
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& r : rows) EXPECT_EQ(r.note.rfind("io-error: ", 0), 0u) << r.note;
}

TEST(BenchOutput, JsonRecords) {
    BenchRow ok{"unmodified", 100, 1.0, 0.1, 1.0, 1.2, ""};
    BenchRow bad{"direct", 3, 0, 0, std::nan(""), 0, "io-error: boom"};
    auto j = nlohmann::json::parse(to_json({ok, bad}));
    ASSERT_EQ(j.size(), 2u);
    EXPECT_EQ(j[0]["config"], "unmodified");
    EXPECT_EQ(j[0]["point"], 100);
    EXPECT_FALSE(j[0].contains("note"));
    EXPECT_TRUE(j[1]["relative"].is_null());
    EXPECT_EQ(j[1]["note"], "io-error: boom");
}
