#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "nullaudit/audit.hpp"
#include "nullaudit/error.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace nullaudit;

namespace {

// Paired panel built gene by gene: baseline (control) and fold change per group.
struct Panel {
    std::vector<std::string> genes;
    std::vector<std::vector<double>> base, fc;
    std::size_t groups = 0;

    void add(const std::string& name, std::vector<double> b, std::vector<double> f) {
        genes.push_back(name);
        base.push_back(std::move(b));
        fc.push_back(std::move(f));
    }

    ExpressionMatrix matrix() const {
        std::vector<std::string> samples;
        for (std::size_t j = 0; j < groups; ++j) {
            samples.push_back("G" + std::to_string(j) + "_C");
            samples.push_back("G" + std::to_string(j) + "_T");
        }
        std::vector<double> v;
        for (std::size_t g = 0; g < genes.size(); ++g) {
            for (std::size_t j = 0; j < groups; ++j) {
                v.push_back(base[g][j]);
                v.push_back(base[g][j] + fc[g][j]);
            }
        }
        return ExpressionMatrix::checked(genes, samples, v);
    }

    std::vector<SampleAnnotation> annotations() const {
        std::vector<SampleAnnotation> out;
        for (std::size_t j = 0; j < groups; ++j) {
            SampleAnnotation c, t;
            c.sample_id = "G" + std::to_string(j) + "_C";
            t.sample_id = "G" + std::to_string(j) + "_T";
            c.group_id = t.group_id = "G" + std::to_string(j);
            c.dose = 0.0;
            t.dose = 4.0;
            out.push_back(c);
            out.push_back(t);
        }
        return out;
    }
};

ContrastSpec irradiated() {
    ContrastSpec c;
    c.name = "irradiated";
    c.treated.dose = 4.0;
    c.control.dose = 0.0;
    return c;
}

std::vector<double> noise(std::mt19937_64& rng, std::size_t n, double mean, double sd) {
    std::normal_distribution<double> z(mean, sd);
    std::vector<double> v(n);
    for (auto& x : v) x = z(rng);
    return v;
}

const AuditRun& synthetic_run() {
    static TempDir dir;
    static const AuditRun run = [] {
        const auto config = load_audit_config(synthetic::write_audit(dir.path()));
        return run_audit(config, {});
    }();
    return run;
}

const AuditVerdict& find_verdict(const AuditRun& run, const std::string& id) {
    for (const auto& c : run.claims) {
        for (const auto& v : c.verdicts) {
            if (v.claim_id == id) return v;
        }
    }
    throw std::runtime_error("no verdict " + id);
}

std::vector<double> as_vector(const nlohmann::json& j) { return j.get<std::vector<double>>(); }

}  // namespace

TEST(Crossgroup, MonotoneSyntheticIsSupported) {
    std::mt19937_64 rng(11);
    Panel p;
    p.groups = 9;
    std::vector<double> baseline;
    for (std::size_t j = 0; j < p.groups; ++j) baseline.push_back(5.0 + 0.5 * static_cast<double>(j));
    std::vector<double> change;
    for (double b : baseline) change.push_back(std::exp(b - 5.0) - 1.0);
    p.add("DRIVER", baseline, change);
    for (int i = 0; i < 200; ++i) p.add("BG" + std::to_string(i), noise(rng, p.groups, 8, 1), noise(rng, p.groups, 0, 0.3));

    ClaimSpec spec;
    spec.config.id = "mono";
    spec.config.kind = ClaimKind::crossgroup_correlation;
    spec.config.null.n_iterations = 400;
    spec.config.null.seed = 3;
    spec.score_set = GeneSet("s", {"DRIVER"});
    spec.response_set = GeneSet("s", {"DRIVER"});
    spec.contrast = irradiated();
    const auto v = run_crossgroup_correlation(spec, p.matrix(), p.annotations());
    ASSERT_EQ(v.outcomes.size(), 1u);
    EXPECT_EQ(v.outcomes[0].observed, 1.0);
    EXPECT_LT(v.outcomes[0].empirical.p, 0.05);
    EXPECT_EQ(v.verdict, Verdict::supported);
    EXPECT_EQ(v.nulls[0].samples.size(), 400u);
}

TEST(Crossgroup, TwoGroupsIsAnError) {
    Panel p;
    p.groups = 2;
    p.add("A", {1, 2}, {0.1, 0.2});
    p.add("B", {3, 1}, {0.3, 0.1});
    ClaimSpec spec;
    spec.config.id = "tiny";
    spec.config.kind = ClaimKind::crossgroup_correlation;
    spec.score_set = GeneSet("a", {"A"});
    spec.response_set = GeneSet("b", {"B"});
    spec.contrast = irradiated();
    try {
        run_crossgroup_correlation(spec, p.matrix(), p.annotations());
        FAIL();
    } catch (const DataError& e) {
        EXPECT_EQ(e.code(), "InsufficientData");
    }
}

TEST(Regulator, CandidateTrackingModuleHasUnitCorrelation) {
    std::mt19937_64 rng(5);
    Panel p;
    p.groups = 10;
    const auto h = noise(rng, p.groups, 0, 1);
    const auto f = noise(rng, p.groups, 0, 1);
    for (int i = 0; i < 10; ++i) {
        std::vector<double> up, down;
        for (std::size_t j = 0; j < p.groups; ++j) {
            up.push_back(2.0 + h[j] + 0.1 * i);
            down.push_back(-2.0 - f[j] - 0.1 * i);
        }
        p.add("IND" + std::to_string(i), noise(rng, p.groups, 8, 1), up);
        p.add("REP" + std::to_string(i), noise(rng, p.groups, 8, 1), down);
    }
    std::vector<double> cand;
    for (double x : h) cand.push_back(6.0 + 0.5 * x);
    p.add("CAND", cand, noise(rng, p.groups, 0, 0.01));
    for (int i = 0; i < 60; ++i) p.add("BG" + std::to_string(i), noise(rng, p.groups, 8, 1), noise(rng, p.groups, 0, 0.05));

    ClaimSpec spec;
    spec.config.id = "reg";
    spec.config.kind = ClaimKind::regulator_correlation;
    spec.config.method = CorrelationMethod::pearson;
    spec.config.candidates = {{"CAND", ModuleLabel::induced}};
    spec.config.top_k = 20;
    spec.config.clusters = 2;
    spec.config.null.n_iterations = 300;
    spec.config.null.seed = 9;
    spec.config.null.exclude_claim_genes = true;
    spec.contrast = irradiated();
    const auto verdicts = run_regulator_correlation(spec, p.matrix(), p.annotations());
    ASSERT_EQ(verdicts.size(), 1u);
    const auto& v = verdicts[0];
    EXPECT_EQ(v.claim_id, "reg.CAND");
    EXPECT_NEAR(v.outcomes[0].observed, 1.0, 1e-12);
    EXPECT_EQ(v.verdict, Verdict::supported);
    const auto induced = v.details.at("modules").at("induced_genes").get<std::vector<std::string>>();
    EXPECT_EQ(induced.size(), 10u);
    EXPECT_TRUE(std::all_of(induced.begin(), induced.end(), [](const std::string& g) { return g.starts_with("IND"); }));
    EXPECT_EQ(v.nulls[0].config.exclusions, std::vector<std::string>{"CAND"});
}

TEST(Survival, RiskOrderedCohortIsSupported) {
    std::mt19937_64 rng(17);
    const std::size_t n = 60;
    const auto risk = noise(rng, n, 0, 1);
    std::vector<std::string> genes = {"S1", "S2", "S3"};
    for (int i = 0; i < 80; ++i) genes.push_back("BG" + std::to_string(i));
    std::vector<std::string> subjects;
    ClinicalTable clinical;
    for (std::size_t s = 0; s < n; ++s) {
        subjects.push_back("P" + std::to_string(s));
        // event time is a decreasing function of the latent risk
        clinical.rows.push_back({subjects.back(), 50.0 * std::exp(-risk[s]), 1, {}});
    }
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> values;
    for (std::size_t g = 0; g < genes.size(); ++g) {
        for (std::size_t s = 0; s < n; ++s) values.push_back(g < 3 ? 8.0 + risk[s] + 0.4 * z(rng) : 8.0 + z(rng));
    }
    const auto matrix = ExpressionMatrix::checked(genes, subjects, values);

    ClaimSpec spec;
    spec.config.id = "surv";
    spec.config.kind = ClaimKind::survival_signature;
    spec.config.metrics = {"c_index", "abs_log_hr"};
    spec.config.null.n_iterations = 300;
    spec.config.null.seed = 1;
    spec.config.null.exclude_claim_genes = true;
    spec.signature = GeneSet("sig", {"S1", "S2", "S3"});
    const auto v = run_survival_signature(spec, matrix, clinical);
    ASSERT_EQ(v.outcomes.size(), 2u);
    EXPECT_GT(v.outcomes[0].observed, 0.8);
    EXPECT_EQ(v.outcomes[0].empirical.tail, Tail::upper);
    EXPECT_EQ(v.outcomes[1].empirical.tail, Tail::upper_abs);
    EXPECT_TRUE(v.outcomes[0].significant);
    EXPECT_TRUE(v.outcomes[1].significant);
    EXPECT_EQ(v.verdict, Verdict::supported);
    EXPECT_EQ(v.nulls[0].config.exclusions, (std::vector<std::string>{"S1", "S2", "S3"}));
    EXPECT_EQ(v.nulls[0].config.set_size, 3u);

    // observed statistics agree with the independent definitions
    std::vector<double> t, x;
    std::vector<int> e;
    for (std::size_t s = 0; s < n; ++s) {
        t.push_back(clinical.rows[s].time);
        e.push_back(1);
        x.push_back(v.data.x[s]);
    }
    EXPECT_DOUBLE_EQ(v.outcomes[0].observed, oracle::concordance_pairs(t, e, x).c());
    EXPECT_NEAR(v.outcomes[1].observed, std::abs(oracle::grid_search_beta(t, e, x, -15.0, 15.0)), 1e-3);
}

TEST(Survival, ConstantSignatureIsDegenerate) {
    std::vector<std::string> subjects = {"a", "b", "c", "d"};
    ClinicalTable clinical;
    for (std::size_t s = 0; s < 4; ++s) clinical.rows.push_back({subjects[s], 1.0 + s, 1, {}});
    const auto matrix = ExpressionMatrix::checked({"S1", "B1", "B2"}, subjects,
                                                  {5, 5, 5, 5, 1, 2, 3, 4, 4, 1, 3, 2});
    ClaimSpec spec;
    spec.config.id = "flat";
    spec.config.kind = ClaimKind::survival_signature;
    spec.config.metrics = {"c_index"};
    spec.signature = GeneSet("sig", {"S1"});
    try {
        run_survival_signature(spec, matrix, clinical);
        FAIL();
    } catch (const StatError& e) {
        EXPECT_EQ(e.code(), "DegenerateCovariate");
    }
}

TEST(Verdict, ReportedOutcomes) {
    auto outcome = [](double p) {
        MetricOutcome o;
        o.empirical.p = p;
        o.significant = p < 0.05;
        return o;
    };
    std::vector<MetricOutcome> h1 = {outcome(0.756)};
    std::vector<MetricOutcome> h2 = {outcome(0.0039)};
    std::vector<MetricOutcome> h3 = {outcome(0.0166), outcome(0.3738)};
    EXPECT_EQ(classify_verdict(h1), Verdict::refuted);
    EXPECT_EQ(classify_verdict(h2), Verdict::supported);
    EXPECT_EQ(classify_verdict(h3), Verdict::inconclusive);
}

TEST(Verdict, ExhaustiveUpToFourMetrics) {
    for (std::size_t n = 1; n <= 4; ++n) {
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
            bool arr[4];
            for (std::size_t i = 0; i < n; ++i) arr[i] = (mask >> i) & 1u;
            const auto v = classify_verdict(std::span<const bool>(arr, n));
            const unsigned all = (1u << n) - 1;
            const Verdict expected = mask == all ? Verdict::supported : mask == 0 ? Verdict::refuted : Verdict::inconclusive;
            EXPECT_EQ(v, expected) << n << " " << mask;
        }
    }
    EXPECT_THROW(classify_verdict(std::span<const bool>()), DataError);
}

TEST(Audit, SyntheticRunMatchesOracles) {
    const auto& run = synthetic_run();
    ASSERT_EQ(run.claims.size(), 3u);
    const auto& h1 = find_verdict(run, "h1");
    const auto baseline = as_vector(h1.details.at("baseline_scores"));
    const auto response = as_vector(h1.details.at("responses"));
    EXPECT_EQ(baseline.size(), 12u);
    EXPECT_NEAR(h1.outcomes[0].observed, oracle::spearman(baseline, response), 1e-12);

    const auto& cdo1 = find_verdict(run, "h2.CDO1");
    const auto& ogt = find_verdict(run, "h2.OGT");
    EXPECT_NEAR(cdo1.outcomes[0].observed,
                oracle::pearson(as_vector(cdo1.details.at("baseline_expression")),
                                as_vector(cdo1.details.at("module_scores"))),
                1e-12);
    EXPECT_EQ(cdo1.verdict, Verdict::supported);
    EXPECT_GT(cdo1.outcomes[0].observed, 0.6);
    EXPECT_EQ(ogt.nulls[0].config.exclusions, (std::vector<std::string>{"OGT", "CDO1"}));

    const auto& h3 = find_verdict(run, "h3");
    EXPECT_EQ(h3.outcomes.size(), 2u);
    EXPECT_GT(h3.outcomes[0].observed, 0.6);
    EXPECT_EQ(h3.details.at("n_subjects"), 80);
}

TEST(Audit, ClaimErrorsNameTheClaim) {
    TempDir dir;
    auto doc = synthetic::config_json({});
    synthetic::write_audit(dir.path());
    doc["gene_sets"]["ddr"] = {"ATM", "NOT_A_GENE"};
    const auto config = parse_audit_config(doc, dir.path());
    try {
        run_audit(config, {});
        FAIL();
    } catch (const DataError& e) {
        EXPECT_EQ(e.code(), "MissingGene");
        EXPECT_NE(std::string(e.what()).find("claim h1"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("NOT_A_GENE"), std::string::npos);
    }
}
