#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "nullaudit/error.hpp"
#include "nullaudit/expression.hpp"

using namespace nullaudit;

namespace {

ExpressionMatrix random_matrix(std::size_t genes, std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(8.0, 2.0);
    std::vector<std::string> g, s;
    for (std::size_t i = 0; i < genes; ++i) g.push_back("G" + std::to_string(i));
    for (std::size_t j = 0; j < samples; ++j) s.push_back("S" + std::to_string(j));
    std::vector<double> v(genes * samples);
    for (auto& x : v) x = z(rng);
    return ExpressionMatrix::checked(g, s, v);
}

template <class F>
std::string error_code(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

SampleAnnotation ann(std::string id, std::string group, double dose) {
    SampleAnnotation a;
    a.sample_id = std::move(id);
    a.group_id = std::move(group);
    a.dose = dose;
    return a;
}

}  // namespace

TEST(GeneSetScore, MatchesSubmatrixColumnMeans) {
    const auto m = random_matrix(12, 4, 3);
    const std::vector<std::string> genes = {"G1", "G4", "G5", "G9", "G11"};
    const std::vector<std::string> samples = {"S0", "S1", "S2", "S3"};
    const auto scores = gene_set_score(m, GeneSet("five", genes), samples);
    ASSERT_EQ(scores.scores.size(), 4u);
    for (std::size_t j = 0; j < 4; ++j) {
        long double sum = 0;
        for (const auto& g : genes) sum += m.at(*m.gene_index(g), j);
        EXPECT_NEAR(scores.scores[j], static_cast<double>(sum / 5), 1e-12);
    }
}

TEST(GeneSetScore, SingletonIsTheGeneRow) {
    const auto m = random_matrix(5, 6, 4);
    const std::vector<std::string> samples = {"S5", "S0", "S3"};
    const auto scores = gene_set_score(m, GeneSet("one", {"g2"}), samples);
    EXPECT_EQ(scores.scores[0], m.at(2, 5));
    EXPECT_EQ(scores.scores[1], m.at(2, 0));
    EXPECT_EQ(scores.scores[2], m.at(2, 3));
}

TEST(GeneSetScore, MissingGeneIsAnErrorUnlessAllowed) {
    const auto m = random_matrix(5, 3, 5);
    const std::vector<std::string> samples = {"S0", "S1", "S2"};
    GeneSet set("s", {"G0", "NOPE", "G1"});
    EXPECT_EQ(error_code([&] { gene_set_score(m, set, samples); }), "MissingGene");
    const auto scores = gene_set_score(m, set, samples, ScoreOptions{true});
    ASSERT_EQ(scores.skipped_genes, std::vector<std::string>{"NOPE"});
    EXPECT_NEAR(scores.scores[1], (m.at(0, 1) + m.at(1, 1)) / 2, 1e-12);
}

TEST(GeneSetScore, UnknownSample) {
    const auto m = random_matrix(5, 3, 5);
    const std::vector<std::string> samples = {"S0", "S9"};
    EXPECT_EQ(error_code([&] { gene_set_score(m, GeneSet("s", {"G0"}), samples); }), "MissingSample");
}

TEST(GeneSet, RejectsEmptyAndDuplicates) {
    EXPECT_EQ(error_code([] { GeneSet("e", {}); }), "InvalidGeneSet");
    EXPECT_EQ(error_code([] { GeneSet("d", {"tp53", "TP53"}); }), "InvalidGeneSet");
    GeneSet s("ok", {"tp53", "Mdm2"});
    EXPECT_TRUE(s.contains("TP53"));
    EXPECT_TRUE(s.contains("mdm2"));
}

TEST(ExpressionMatrix, ValidationReportsEveryViolationKind) {
    ExpressionMatrix bad({"A", "A"}, {"S1", "S1"}, {1.0, std::numeric_limits<double>::quiet_NaN(), 2.0, 3.0});
    std::set<std::string> kinds;
    for (const auto& v : validate_matrix(bad)) kinds.insert(v.kind);
    EXPECT_TRUE(kinds.count("duplicate gene id"));
    EXPECT_TRUE(kinds.count("duplicate sample id"));
    EXPECT_TRUE(kinds.count("non-finite value"));

    ExpressionMatrix short_values({"A", "B"}, {"S1"}, {1.0});
    ASSERT_FALSE(validate_matrix(short_values).empty());
    EXPECT_EQ(validate_matrix(short_values).front().kind, "dimension mismatch");
    EXPECT_EQ(error_code([] { ExpressionMatrix::checked({"A"}, {"S"}, {INFINITY}); }), "InvalidMatrix");
    EXPECT_TRUE(validate_matrix(random_matrix(3, 3, 1)).empty());
}

TEST(ExpressionMatrix, GeneLookupIgnoresCase) {
    const auto m = ExpressionMatrix::checked({"Tp53", "MDM2"}, {"S"}, {1.0, 2.0});
    EXPECT_EQ(m.gene_index("TP53"), 0u);
    EXPECT_EQ(m.gene_index("mdm2"), 1u);
    EXPECT_FALSE(m.gene_index("ATM"));
}

TEST(FoldChanges, HandBuiltThreeGenesTwoGroups) {
    // columns: A ctrl, A irr, B ctrl, B irr
    const auto m = ExpressionMatrix::checked({"X", "Y", "Z"}, {"a0", "a4", "b0", "b4"},
                                             {1.0, 3.5, 2.0, 2.0,     //
                                              5.0, 4.0, 7.25, 9.0,    //
                                              0.5, 0.5, -1.0, 1.0});
    const std::vector<SampleAnnotation> a = {ann("a0", "A", 0), ann("a4", "A", 4), ann("b4", "B", 4), ann("b0", "B", 0)};
    ContrastSpec c;
    c.name = "irr";
    c.treated.dose = 4;
    c.control.dose = 0;
    const auto fc = fold_changes(m, a, c);
    ASSERT_EQ(fc.group_ids(), (std::vector<std::string>{"A", "B"}));
    const double expected[3][2] = {{2.5, 0.0}, {-1.0, 1.75}, {0.0, 2.0}};
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(fc.at(i, j), expected[i][j]);
    }
}

TEST(FoldChanges, AmbiguousWhenAGroupHasTwoTreatedSamples) {
    const std::vector<SampleAnnotation> a = {ann("a0", "A", 0), ann("a4", "A", 4), ann("a4b", "A", 4)};
    ContrastSpec c;
    c.name = "irr";
    c.treated.dose = 4;
    c.control.dose = 0;
    EXPECT_EQ(error_code([&] { resolve_contrast(a, c); }), "AmbiguousContrast");
    c.groups = {"A", "Q"};
    EXPECT_EQ(error_code([&] { resolve_contrast(a, c); }), "AmbiguousContrast");
}

TEST(FoldChanges, PairingKeyCanBeAnExtraColumn) {
    auto a0 = ann("s1", "x", 0), a1 = ann("s2", "y", 4);
    a0.extra["line"] = "MCF7";
    a1.extra["line"] = "MCF7";
    ContrastSpec c;
    c.name = "irr";
    c.treated.dose = 4;
    c.control.dose = 0;
    c.pairing_key = "line";
    const auto pairs = resolve_contrast({a0, a1}, c);
    ASSERT_EQ(pairs.size(), 1u);
    EXPECT_EQ(pairs[0].group_id, "MCF7");
    EXPECT_EQ(pairs[0].treated_sample, "s2");
    EXPECT_EQ(pairs[0].control_sample, "s1");
}
