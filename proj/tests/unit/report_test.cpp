#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "nullaudit/error.hpp"
#include "nullaudit/report.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace nullaudit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct FixedClock {
    FixedClock() { setenv(kTimestampEnv, "1700000000", 1); }
    ~FixedClock() { unsetenv(kTimestampEnv); }
};

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
    return files;
}

}  // namespace

TEST(Report, TimestampHonorsSourceDateEpoch) {
    FixedClock clock;
    EXPECT_EQ(report_timestamp(), "2023-11-14T22:13:20Z");
}

TEST(Report, NullSamplesCsvHeader) {
    NullDistribution a, b;
    a.statistic_name = "c_index";
    a.samples = {0.5, 0.25};
    a.config.seed = 42;
    a.config.n_iterations = 2;
    b.statistic_name = "abs_log_hr";
    b.samples = {1.5, 0.125};
    b.config = a.config;
    EXPECT_EQ(null_samples_csv({a, b}),
              "c_index[seed=42 n_iterations=2],abs_log_hr[seed=42 n_iterations=2]\n0.5,1.5\n0.25,0.125\n");
}

TEST(Report, EmitsLayoutAndIsByteIdenticalAcrossWorkers) {
    FixedClock clock;
    TempDir dir;
    const auto config = load_audit_config(synthetic::write_audit(dir / "in"));
    std::map<std::string, std::string> first;
    for (std::size_t workers : {1, 4, 8}) {
        const auto run = run_audit(config, {workers, 100});
        const auto out = dir / ("out" + std::to_string(workers));
        const auto emitted = emit_report(run, out);
        EXPECT_EQ(emitted.claim_dirs.size(), 4u);
        auto files = tree(out);
        if (first.empty()) {
            first = files;
            continue;
        }
        ASSERT_EQ(files.size(), first.size());
        for (const auto& [name, text] : first) EXPECT_EQ(files.at(name), text) << name << " workers=" << workers;
    }
    for (const char* name : {"audit_report.json", "summary.txt", "h1/report.json", "h1/null_samples.csv",
                             "h1/figure.svg", "h2.CDO1/modules.tsv", "h2.OGT/report.json", "h3/null_samples.csv"})
        EXPECT_TRUE(first.contains(name)) << name;
    EXPECT_FALSE(first.contains("h1/modules.tsv"));

    const auto report = json::parse(first.at("h3/report.json"));
    EXPECT_EQ(report.at("format"), kReportFormat);
    EXPECT_EQ(report.at("generated_at"), "2023-11-14T22:13:20Z");
    EXPECT_EQ(report.at("null").at("statistics").size(), 2u);
    EXPECT_EQ(report.at("null").at("statistics")[0].at("samples").size(), 200u);
    EXPECT_EQ(report.at("config").at("claims").size(), 1u);
    EXPECT_EQ(report.at("config").at("datasets").size(), 1u);
    EXPECT_TRUE(report.contains("cox"));
    // the figure is drawn from the report alone
    EXPECT_EQ(render_figure_svg(report), first.at("h3/figure.svg"));
    EXPECT_NE(first.at("h1/figure.svg").find("<svg"), std::string::npos);
    EXPECT_NE(first.at("summary.txt").find("h2.CDO1"), std::string::npos);
}

TEST(Report, ReplayMatchesAndDetectsEditedSeed) {
    FixedClock clock;
    TempDir dir;
    const auto config = load_audit_config(synthetic::write_audit(dir / "in"));
    emit_report(run_audit(config, {}), dir / "out");
    for (const char* id : {"h1", "h2.CDO1", "h3"}) {
        for (std::size_t workers : {1, 4, 8}) {
            const auto r = replay_report(dir / "out" / id / "report.json", dir / ("replay" + std::to_string(workers)), workers);
            EXPECT_TRUE(r.matches) << id << ": " << r.divergence;
            EXPECT_EQ(r.claim_id, id);
        }
    }
    EXPECT_EQ(slurp(dir / "out" / "h1" / "null_samples.csv"), slurp(dir / "replay4" / "h1" / "null_samples.csv"));

    auto report = json::parse(slurp(dir / "out" / "h1" / "report.json"));
    report["config"]["claims"][0]["null"]["seed"] = 8;
    fs::create_directories(dir / "edited");
    spit(dir / "edited" / "report.json", report.dump());
    const auto r = replay_report(dir / "edited" / "report.json", dir / "replay_edited", 1);
    EXPECT_FALSE(r.matches);
    EXPECT_EQ(r.claim_id, "h1");
    EXPECT_FALSE(r.divergence.empty());
}

TEST(Report, ReplayDetectsChangedData) {
    FixedClock clock;
    TempDir dir;
    const auto config = load_audit_config(synthetic::write_audit(dir / "in"));
    emit_report(run_audit(config, {}), dir / "out");
    spit(dir / "in" / "cohort" / "clinical.tsv", slurp(dir / "in" / "cohort" / "clinical.tsv") + "\n");
    const auto r = replay_report(dir / "out" / "h3" / "report.json", dir / "replay", 1);
    EXPECT_FALSE(r.matches);
    EXPECT_NE(r.divergence.find("changed"), std::string::npos);
}

TEST(Report, MalformedReportIsAConfigError) {
    TempDir dir;
    spit(dir / "r.json", "{\"format\": \"something else\"}");
    EXPECT_THROW(replay_report(dir / "r.json", dir / "o", 1), ConfigError);
    spit(dir / "r.json", "[1,");
    EXPECT_THROW(replay_report(dir / "r.json", dir / "o", 1), ConfigError);
}
