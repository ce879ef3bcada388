#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "oracles.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

Result run(const std::string& args, const TempDir& dir) {
    const auto out = dir / "stdout.txt";
    const auto err = dir / "stderr.txt";
    const std::string cmd = std::string("SOURCE_DATE_EPOCH=1700000000 '") + NULLAUDIT_CLI_PATH + "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, StatsSpearmanOnIdenticalColumns) {
    TempDir dir;
    spit(dir / "xy.csv", "x,y\n1,1\n2,2\n3,3\n4,4\n5,5\n");
    const auto r = run("stats spearman --input " + quoted(dir / "xy.csv"), dir);
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("rho=1.0\n"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("n=5\n"), std::string::npos);
}

TEST(Cli, StatsZeroVarianceExitsWithUsageCode) {
    TempDir dir;
    spit(dir / "xy.csv", "1,2\n1,3\n1,4\n");
    const auto r = run("stats pearson --input " + quoted(dir / "xy.csv"), dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(r.out.empty());
    EXPECT_NE(r.err.find("ZeroVariance"), std::string::npos) << r.err;
}

TEST(Cli, StatsCoxAgreesWithGridSearch) {
    TempDir dir;
    const std::vector<double> t = {1, 2, 2, 3, 4, 5};
    const std::vector<int> e = {1, 1, 1, 0, 1, 0};
    const std::vector<double> x = {0.5, 1.2, -0.3, 0.8, -1.0, 0.1};
    std::string csv = "time,event,score\n";
    for (std::size_t i = 0; i < t.size(); ++i)
        csv += std::to_string(t[i]) + "," + std::to_string(e[i]) + "," + std::to_string(x[i]) + "\n";
    spit(dir / "cox.csv", csv);
    const auto r = run("stats cox --input " + quoted(dir / "cox.csv"), dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto pos = r.out.find("beta=");
    ASSERT_NE(pos, std::string::npos);
    const double beta = std::stod(r.out.substr(pos + 5));
    EXPECT_NEAR(beta, oracle::grid_search_beta(t, e, x), 1e-3);

    const auto c = run("stats cindex --input " + quoted(dir / "cox.csv"), dir);
    ASSERT_EQ(c.code, 0) << c.err;
    const auto pairs = oracle::concordance_pairs(t, e, x);
    EXPECT_NE(c.out.find("comparable=" + std::to_string(pairs.comparable) + "\n"), std::string::npos) << c.out;
}

TEST(Cli, UsageErrors) {
    TempDir dir;
    auto r = run("", dir);
    EXPECT_EQ(r.code, 2);
    r = run("stats kendall --input x", dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(r.out.empty());
    r = run("audit --config " + quoted(dir / "missing.json") + " --out " + quoted(dir / "o"), dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(r.out.empty());
    EXPECT_NE(r.err.find("UnreadableConfig"), std::string::npos);
}

TEST(Cli, AuditAndReplay) {
    TempDir dir;
    const auto config = synthetic::write_audit(dir / "in");
    auto r = run("audit --config " + quoted(config) + " --out " + quoted(dir / "a"), dir);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(r.out.empty());
    EXPECT_TRUE(fs::exists(dir / "a" / "audit_report.json"));

    r = run("audit --config " + quoted(config) + " --out " + quoted(dir / "s1") + " --seed 42", dir);
    ASSERT_EQ(r.code, 0) << r.err;
    r = run("audit --config " + quoted(config) + " --out " + quoted(dir / "s2") + " --seed 42 --workers 4", dir);
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* id : {"h1", "h2.OGT", "h3"}) {
        const auto a = slurp(dir / "s1" / id / "null_samples.csv");
        EXPECT_EQ(a, slurp(dir / "s2" / id / "null_samples.csv")) << id;
        EXPECT_NE(a.find("seed=42 "), std::string::npos);
    }

    for (const char* workers : {"1", "4", "8"}) {
        r = run("replay " + quoted(dir / "a" / "h2.CDO1") + " --out " + quoted(dir / (std::string("r") + workers)) +
                    " --workers " + workers,
                dir);
        EXPECT_EQ(r.code, 0) << r.err;
    }

    auto report = nlohmann::json::parse(slurp(dir / "a" / "h3" / "report.json"));
    report["config"]["claims"][0]["null"]["seed"] = 1234;
    spit(dir / "edited.json", report.dump(1));
    r = run("replay " + quoted(dir / "edited.json") + " --out " + quoted(dir / "re"), dir);
    EXPECT_EQ(r.code, 5);
    EXPECT_TRUE(r.out.empty());
    EXPECT_NE(r.err.find("h3"), std::string::npos) << r.err;
}

TEST(Cli, UnknownConfigKeyIsNamed) {
    TempDir dir;
    const auto config = synthetic::write_audit(dir / "in");
    auto doc = nlohmann::json::parse(slurp(config));
    doc["claims"][1]["modules"]["linkage"] = "complete";
    spit(config, doc.dump());
    const auto r = run("audit --config " + quoted(config) + " --out " + quoted(dir / "a"), dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(r.out.empty());
    EXPECT_NE(r.err.find("'linkage'"), std::string::npos) << r.err;
}

TEST(Cli, DataErrorsExitThree) {
    TempDir dir;
    const auto config = synthetic::write_audit(dir / "in");
    auto doc = nlohmann::json::parse(slurp(config));
    doc["gene_sets"]["p53"].push_back("NO_SUCH_GENE");
    spit(config, doc.dump());
    const auto r = run("audit --config " + quoted(config) + " --out " + quoted(dir / "a"), dir);
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("MissingGene"), std::string::npos) << r.err;
}

TEST(Cli, IngestWritesGeneTable) {
    TempDir dir;
    const std::string fixtures = NULLAUDIT_FIXTURES;
    const auto r = run("ingest --series " + fixtures + "/mini_series_matrix.txt.gz --platform " + fixtures +
                           "/mini_platform.tsv --symbol-column 'Gene Symbol' --out " + quoted(dir / "g"),
                       dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto table = slurp(dir / "g" / "expression.tsv");
    EXPECT_NE(table.find("TP53"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "g" / "samples.tsv"));
    const auto report = nlohmann::json::parse(slurp(dir / "g" / "ingest_report.json"));
    EXPECT_EQ(report.at("probes_total"), 6);
}
