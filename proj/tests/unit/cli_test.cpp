#include <gtest/gtest.h>

#include <cstdio>
#include <sys/wait.h>

#include "oracles.hpp"

namespace {

struct Result {
    int status = -1;
    std::string out;
};

Result cli(const std::string& args) {
    std::string cmd = std::string(CASCADE_CLI_PATH) + " " + args + " 2>&1";
    Result r;
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[512];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
    int raw = ::pclose(p);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

std::string example() { return (oracle::corpus_root() / "examples" / "add.slang").string(); }

}  // namespace

TEST(Cli, RunPrintsResult) {
    auto r = cli("run " + example() + " add:with: 2 3 --backend=ir");
    EXPECT_EQ(r.status, 0) << r.out;
    EXPECT_EQ(r.out, "5\n");
}

TEST(Cli, BackendsAgree) {
    auto native = cli("run " + example() + " sumTo: 100");
    auto ast = cli("run " + example() + " sumTo: 100 --backend ast");
    EXPECT_EQ(native.status, 0);
    EXPECT_EQ(native.out, "5050\n");
    EXPECT_EQ(native.out, ast.out);
}

TEST(Cli, UnknownSubcommandShowsUsage) {
    auto r = cli("frobnicate");
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.out.find("Subcommands"), std::string::npos) << r.out;
}

TEST(Cli, UserErrorsExitOne) {
    EXPECT_EQ(cli("run /nonexistent/x.slang f").status, 1);
    EXPECT_EQ(cli("run " + example() + " add:with: 2").status, 1);
    EXPECT_EQ(cli("run " + example() + " nothere: 2").status, 1);
    EXPECT_EQ(cli("run " + example() + " add:with: 2 x").status, 1);
    EXPECT_EQ(cli("run " + example() + " add:with: 2 3 --backend jit").status, 1);
}

TEST(Cli, DumpCommands) {
    auto parse = cli("parse " + example());
    EXPECT_EQ(parse.status, 0);
    EXPECT_NE(parse.out.find("sumTo:"), std::string::npos);
    auto ir = cli("dump-ir " + example() + " double: --ssa");
    EXPECT_EQ(ir.status, 0);
    EXPECT_NE(ir.out.find("ret"), std::string::npos) << ir.out;
    auto as = cli("dump-asm " + example() + " double:");
    EXPECT_EQ(as.status, 0);
    EXPECT_NE(as.out.find("ret"), std::string::npos);
    auto reach = cli("dump-reachable " + example() + " double:");
    EXPECT_EQ(reach.status, 0);
    EXPECT_EQ(reach.out.rfind("double:", 0), 0u) << reach.out;
}

TEST(Cli, SwapDemo) {
    auto r = cli("swap-demo");
    EXPECT_EQ(r.status, 0) << r.out;
    EXPECT_NE(r.out.find("answer -> 42"), std::string::npos);
    EXPECT_NE(r.out.find("sibling artifact unchanged"), std::string::npos);
}

TEST(Cli, BenchCsv) {
    auto r = cli("bench basicnew --points 10 --runs 2 --configs unmodified");
    EXPECT_EQ(r.status, 0) << r.out;
    EXPECT_EQ(r.out.rfind("config,point,mean_ms,stddev_ms,relative,first_call_ms,note\nunmodified,10,", 0), 0u) << r.out;
    EXPECT_EQ(cli("bench basicnew --runs 1").status, 1);
}
