#include "nullaudit/audit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nullaudit/digest.hpp"
#include "nullaudit/error.hpp"
#include "nullaudit/modules.hpp"
#include "nullaudit/stats.hpp"
#include "nullaudit/survival.hpp"
#include "nullaudit/text_table.hpp"

namespace nullaudit {

using nlohmann::json;

std::string_view to_string(Verdict verdict) noexcept {
    switch (verdict) {
        case Verdict::supported: return "Supported";
        case Verdict::refuted: return "Refuted";
        case Verdict::inconclusive: return "Inconclusive";
    }
    return "unknown";
}

namespace {

Verdict classify_counts(std::size_t hits, std::size_t total) {
    if (total == 0) throw DataError("NoMetrics", "cannot classify a claim without metrics");
    if (hits == total) return Verdict::supported;
    if (hits == 0) return Verdict::refuted;
    return Verdict::inconclusive;
}

}  // namespace

Verdict classify_verdict(std::span<const bool> significant) {
    const auto hits = std::count(significant.begin(), significant.end(), true);
    return classify_counts(static_cast<std::size_t>(hits), significant.size());
}

Verdict classify_verdict(std::span<const MetricOutcome> outcomes) {
    const auto hits = std::count_if(outcomes.begin(), outcomes.end(),
                                    [](const MetricOutcome& o) { return o.significant; });
    return classify_counts(static_cast<std::size_t>(hits), outcomes.size());
}

ClaimSpec resolve_claim(const AuditConfig& config, const ClaimConfig& claim) {
    ClaimSpec spec;
    spec.config = claim;
    auto set = [&](const std::string& name) -> std::optional<GeneSet> {
        if (name.empty()) return std::nullopt;
        auto it = config.gene_sets.find(name);
        if (it == config.gene_sets.end())
            throw ConfigError("InvalidConfig", "claims." + claim.id + ": unknown gene set '" + name + "'");
        return GeneSet(name, it->second);
    };
    spec.score_set = set(claim.score_set);
    spec.response_set = set(claim.response_set);
    spec.signature = set(claim.signature);
    if (!claim.contrast.empty()) {
        auto it = config.contrasts.find(claim.contrast);
        if (it == config.contrasts.end())
            throw ConfigError("InvalidConfig", "claims." + claim.id + ": unknown contrast '" + claim.contrast + "'");
        spec.contrast = it->second;
    }
    return spec;
}

namespace {

double correlation_coefficient(CorrelationMethod method, std::span<const double> x, std::span<const double> y) {
    if (method == CorrelationMethod::pearson) return pearson_coefficient(x, y);
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson_coefficient(rx, ry);
}

std::string statistic_name(CorrelationMethod method) {
    return method == CorrelationMethod::spearman ? "spearman_rho" : "pearson_r";
}

MetricOutcome make_outcome(std::string metric, std::string statistic, double observed, const NullDistribution& null,
                           Tail tail, const ClaimConfig& claim) {
    MetricOutcome o;
    o.metric = std::move(metric);
    o.statistic = std::move(statistic);
    o.observed = observed;
    o.empirical = empirical_p(observed, null, tail);
    const double p = claim.p_value == PValueMode::plain ? o.empirical.p : o.empirical.p_smoothed;
    o.significant = p < claim.alpha;
    return o;
}

NullConfig null_config(const ClaimConfig& claim, std::size_t set_size, const std::vector<std::string>& claim_genes) {
    NullConfig cfg;
    cfg.n_iterations = claim.null.n_iterations;
    cfg.seed = claim.null.seed;
    cfg.set_size = set_size;
    cfg.exclusions = claim.null.exclusions;
    if (claim.null.exclude_claim_genes) {
        for (const auto& g : claim_genes) {
            if (std::find(cfg.exclusions.begin(), cfg.exclusions.end(), g) == cfg.exclusions.end())
                cfg.exclusions.push_back(g);
        }
    }
    return cfg;
}

EngineOptions engine_options(const RunOptions& options) {
    EngineOptions e;
    e.workers = options.workers;
    e.max_resamples_per_draw = options.max_resamples_per_draw;
    return e;
}

struct PairColumns {
    std::vector<std::string> groups;
    std::vector<std::size_t> treated;
    std::vector<std::size_t> control;
    std::vector<std::string> control_samples;
};

PairColumns resolve_pairs(const ExpressionMatrix& matrix, const std::vector<SampleAnnotation>& annotations,
                          const ContrastSpec& contrast, const std::string& claim_id) {
    PairColumns out;
    for (const auto& p : resolve_contrast(annotations, contrast)) {
        std::string ids[] = {p.treated_sample, p.control_sample};
        auto cols = resolve_samples(matrix, ids);
        out.groups.push_back(p.group_id);
        out.treated.push_back(cols[0]);
        out.control.push_back(cols[1]);
        out.control_samples.push_back(p.control_sample);
    }
    if (out.groups.size() < 3)
        throw DataError("InsufficientData", "claim " + claim_id + ": correlation across groups needs >= 3 groups, got " +
                                                std::to_string(out.groups.size()));
    return out;
}

json null_summary(const NullDistribution& null) {
    return {{"resamples", null.resamples}};
}

}  // namespace

AuditVerdict run_crossgroup_correlation(const ClaimSpec& claim, const ExpressionMatrix& matrix,
                                        const std::vector<SampleAnnotation>& annotations,
                                        const RunOptions& options) {
    const auto& cfg = claim.config;
    if (cfg.kind != ClaimKind::crossgroup_correlation || !claim.score_set || !claim.response_set || !claim.contrast)
        throw ConfigError("InvalidClaim", "claim " + cfg.id + " is not a complete crossgroup_correlation claim");

    const auto pairs = resolve_pairs(matrix, annotations, *claim.contrast, cfg.id);
    const ScoreOptions score_options{cfg.allow_missing_genes};
    std::vector<std::string> skipped_score, skipped_response;
    const auto score_rows = resolve_genes(matrix, *claim.score_set, score_options, &skipped_score);
    const auto response_rows = resolve_genes(matrix, *claim.response_set, score_options, &skipped_response);

    const std::size_t n = pairs.groups.size();
    std::vector<double> baseline(n);
    score_columns(matrix, score_rows, pairs.control, baseline);

    std::vector<double> response(n);
    for (std::size_t j = 0; j < n; ++j) {
        double sum = 0.0;
        for (auto r : response_rows) sum += matrix.at(r, pairs.treated[j]) - matrix.at(r, pairs.control[j]);
        response[j] = sum / static_cast<double>(response_rows.size());
    }

    const auto observed = correlate(cfg.method, baseline, response);

    std::vector<std::string> score_genes;
    for (auto r : score_rows) score_genes.push_back(normalize_symbol(matrix.gene_ids()[r]));
    const auto ncfg = null_config(cfg, score_rows.size(), score_genes);

    const auto method = cfg.method;
    const auto& control = pairs.control;
    auto statistic = [&matrix, &control, &response, method](std::span<const std::size_t> rows) {
        std::vector<double> scores(control.size());
        score_columns(matrix, rows, control, scores);
        return correlation_coefficient(method, scores, response);
    };
    auto null = null_distribution(statistic_name(method), statistic, matrix.gene_ids(), ncfg, engine_options(options));
    null.observed = observed.r;

    // The null randomizes only the score set; the observed value must be untouched.
    std::vector<double> recheck(n);
    score_columns(matrix, score_rows, pairs.control, recheck);
    if (correlation_coefficient(method, recheck, response) != observed.r)
        throw StatError("InternalInconsistency", "claim " + cfg.id + ": observed statistic changed during null generation");

    AuditVerdict v;
    v.claim_id = cfg.id;
    v.kind = cfg.kind;
    v.alpha = cfg.alpha;
    auto outcome = make_outcome("correlation", statistic_name(method), observed.r, null, Tail::two_sided, cfg);
    outcome.asymptotic_p = observed.asymptotic_p;
    v.outcomes.push_back(outcome);
    v.nulls.push_back(std::move(null));
    v.verdict = classify_verdict(v.outcomes);

    v.data.x_label = "baseline score (" + claim.score_set->name() + ")";
    v.data.y_label = "response (" + claim.response_set->name() + ", mean log2 FC)";
    v.data.labels = pairs.groups;
    v.data.x = baseline;
    v.data.y = response;

    v.details = {{"groups", pairs.groups},
                 {"baseline_scores", baseline},
                 {"responses", response},
                 {"score_genes_used", score_genes},
                 {"skipped_score_genes", skipped_score},
                 {"skipped_response_genes", skipped_response},
                 {"n_groups", n},
                 {"null", null_summary(v.nulls.front())}};
    return v;
}

std::vector<AuditVerdict> run_regulator_correlation(const ClaimSpec& claim, const ExpressionMatrix& matrix,
                                                    const std::vector<SampleAnnotation>& annotations,
                                                    const RunOptions& options) {
    const auto& cfg = claim.config;
    if (cfg.kind != ClaimKind::regulator_correlation || !claim.contrast || cfg.candidates.empty())
        throw ConfigError("InvalidClaim", "claim " + cfg.id + " is not a complete regulator_correlation claim");

    const auto pairs = resolve_pairs(matrix, annotations, *claim.contrast, cfg.id);
    const auto fc = fold_changes(matrix, annotations, *claim.contrast);
    const auto model = discover_modules(fc, cfg.top_k, cfg.clusters);

    std::vector<std::string> candidate_genes;
    for (const auto& c : cfg.candidates) candidate_genes.push_back(c.gene);
    const auto ncfg = null_config(cfg, 1, candidate_genes);

    std::vector<std::size_t> cluster_sizes(model.k, 0);
    for (auto a : model.assignments) ++cluster_sizes[a - 1];
    const json module_json = {{"top_k", cfg.top_k},
                              {"clusters", cfg.clusters},
                              {"cluster_sizes", cluster_sizes},
                              {"cluster_means", model.cluster_means},
                              {"repressed_cluster", model.repressed},
                              {"induced_cluster", model.induced},
                              {"repressed_genes", model.members(model.repressed)},
                              {"induced_genes", model.members(model.induced)},
                              {"table", cluster_table(model)}};

    std::vector<AuditVerdict> out;
    for (const auto& cand : cfg.candidates) {
        const auto row = matrix.gene_index(cand.gene);
        if (!row) throw DataError("MissingGene", "claim " + cfg.id + ": candidate " + cand.gene + " is not in the matrix");
        std::vector<double> baseline(pairs.control.size());
        for (std::size_t j = 0; j < baseline.size(); ++j) baseline[j] = matrix.at(*row, pairs.control[j]);
        const auto module_scores = module_response_scores(fc, model, cand.module);
        const auto observed = correlate(cfg.method, baseline, module_scores);

        const auto method = cfg.method;
        const auto& control = pairs.control;
        auto statistic = [&matrix, &control, &module_scores, method](std::span<const std::size_t> rows) {
            std::vector<double> x(control.size());
            for (std::size_t j = 0; j < x.size(); ++j) x[j] = matrix.at(rows[0], control[j]);
            return correlation_coefficient(method, x, module_scores);
        };
        auto null = null_distribution(statistic_name(method), statistic, matrix.gene_ids(), ncfg, engine_options(options));
        null.observed = observed.r;

        AuditVerdict v;
        v.claim_id = cfg.id + "." + cand.gene;
        v.kind = cfg.kind;
        v.alpha = cfg.alpha;
        auto outcome = make_outcome("correlation", statistic_name(method), observed.r, null, Tail::two_sided, cfg);
        outcome.asymptotic_p = observed.asymptotic_p;
        v.outcomes.push_back(outcome);
        v.nulls.push_back(std::move(null));
        v.verdict = classify_verdict(v.outcomes);

        v.data.x_label = "baseline " + cand.gene + " (log2)";
        v.data.y_label = std::string(to_string(cand.module)) + " module score (mean log2 FC)";
        v.data.labels = pairs.groups;
        v.data.x = baseline;
        v.data.y = module_scores;

        v.details = {{"candidate", cand.gene},
                     {"module", std::string(to_string(cand.module))},
                     {"groups", pairs.groups},
                     {"baseline_expression", baseline},
                     {"module_scores", module_scores},
                     {"modules", module_json},
                     {"n_groups", pairs.groups.size()},
                     {"null", null_summary(v.nulls.front())}};
        out.push_back(std::move(v));
    }
    return out;
}

AuditVerdict run_survival_signature(const ClaimSpec& claim, const ExpressionMatrix& matrix,
                                    const ClinicalTable& clinical, const RunOptions& options) {
    const auto& cfg = claim.config;
    if (cfg.kind != ClaimKind::survival_signature || !claim.signature)
        throw ConfigError("InvalidClaim", "claim " + cfg.id + " is not a complete survival_signature claim");

    const ScoreOptions score_options{cfg.allow_missing_genes};
    std::vector<std::string> skipped;
    const auto rows = resolve_genes(matrix, *claim.signature, score_options, &skipped);
    const auto data = signature_dataset(matrix, *claim.signature, clinical, score_options);
    const auto columns = resolve_samples(matrix, data.subject_ids);

    const auto fit = cox_fit(data);
    const auto concordance = concordance_index(data);

    std::vector<std::string> signature_genes;
    for (auto r : rows) signature_genes.push_back(normalize_symbol(matrix.gene_ids()[r]));
    // Exclude every listed signature gene, including ones absent from the matrix.
    std::vector<std::string> claim_genes = claim.signature->genes();
    const auto ncfg = null_config(cfg, rows.size(), claim_genes);

    const auto& times = data.times;
    const auto& events = data.events;
    auto statistic = [&matrix, &columns, &times, &events](std::span<const std::size_t> set, std::span<double> out) {
        std::vector<double> scores(columns.size());
        score_columns(matrix, set, columns, scores);
        const auto f = cox_fit(times, events, scores);
        const auto c = concordance_index(times, events, scores);
        out[0] = c.c_index;
        out[1] = std::abs(f.beta);
    };
    auto nulls = null_distributions({"c_index", "abs_log_hr"}, statistic, matrix.gene_ids(), ncfg, engine_options(options));
    nulls[0].observed = concordance.c_index;
    nulls[1].observed = std::abs(fit.beta);

    AuditVerdict v;
    v.claim_id = cfg.id;
    v.kind = cfg.kind;
    v.alpha = cfg.alpha;
    for (const auto& metric : cfg.metrics) {
        if (metric == "c_index") {
            v.outcomes.push_back(make_outcome("c_index", "c_index", concordance.c_index, nulls[0], Tail::upper, cfg));
            v.nulls.push_back(nulls[0]);
        } else {
            auto o = make_outcome("abs_log_hr", "abs_log_hr", std::abs(fit.beta), nulls[1], Tail::upper_abs, cfg);
            o.asymptotic_p = fit.wald_p;
            v.outcomes.push_back(o);
            v.nulls.push_back(nulls[1]);
        }
    }
    v.verdict = classify_verdict(v.outcomes);

    v.data.x_label = "signature score (" + claim.signature->name() + ")";
    v.data.y_label = "time to event";
    v.data.labels = data.subject_ids;
    v.data.x = data.scores;
    v.data.y = data.times;
    v.data.events = data.events;

    const auto n_events = std::count(events.begin(), events.end(), 1);
    v.details = {{"n_subjects", data.size()},
                 {"n_events", n_events},
                 {"dropped_incomplete", clinical.dropped_incomplete},
                 {"signature_genes_used", signature_genes},
                 {"skipped_signature_genes", skipped},
                 {"cox",
                  {{"ties", "efron"},
                   {"beta", fit.beta},
                   {"se", fit.se},
                   {"hazard_ratio", fit.hazard_ratio()},
                   {"wald_z", fit.wald_z},
                   {"wald_p", fit.wald_p},
                   {"log_partial_likelihood", fit.log_partial_likelihood},
                   {"iterations", fit.n_iterations}}},
                 {"concordance",
                  {{"c_index", concordance.c_index},
                   {"concordant", concordance.n_concordant},
                   {"discordant", concordance.n_discordant},
                   {"tied_score", concordance.n_tied_score},
                   {"comparable", concordance.n_comparable}}},
                 {"null", null_summary(nulls[0])}};
    return v;
}

LoadedDataset load_dataset(const DatasetConfig& dataset) {
    LoadedDataset out;
    out.name = dataset.name;
    out.accession = dataset.accession;
    auto record = [&out](std::string role, const std::string& path) {
        out.files.push_back({std::move(role), path, sha256_file(path)});
    };

    if (!dataset.series_matrix.empty()) {
        std::istringstream text(read_text_file(dataset.series_matrix));
        const auto doc = parse_series_matrix(text);
        record("series_matrix", dataset.series_matrix);
        std::optional<PlatformAnnotation> platform;
        if (!dataset.platform.empty()) {
            std::istringstream ptext(read_text_file(dataset.platform));
            platform = parse_platform_annotation(ptext, dataset.platform_probe_column, dataset.platform_symbol_column);
            record("platform", dataset.platform);
        }
        CollapseReport report;
        CollapseOptions options{dataset.probe_policy, dataset.already_log2};
        out.matrix = collapse_probes(doc, platform ? &*platform : nullptr, options, &report);
        if (out.accession.empty()) {
            auto acc = doc.series_values("geo_accession");
            if (!acc.empty()) out.accession = acc.front();
        }
        out.ingest = {{"probe_policy", std::string(to_string(dataset.probe_policy))},
                      {"already_log2", dataset.already_log2},
                      {"probes_total", report.probes_total},
                      {"probes_unannotated", report.probes_unannotated},
                      {"probes_ambiguous", report.probes_ambiguous},
                      {"genes_dropped_missing", report.genes_with_missing}};
    } else {
        std::istringstream text(read_text_file(dataset.expression));
        out.matrix = parse_expression_table(text);
        record("expression", dataset.expression);
        out.ingest = {{"probe_policy", "none (gene-level input)"}, {"already_log2", dataset.already_log2}};
        if (!dataset.already_log2) {
            std::vector<double> values(out.matrix.values().begin(), out.matrix.values().end());
            for (auto& v : values) {
                if (!(v > -1.0)) throw DataError("InvalidIntensity", "value " + format_real(v) + " cannot be log2(x+1) transformed");
                v = std::log2(v + 1.0);
            }
            out.matrix = ExpressionMatrix::checked(out.matrix.gene_ids(), out.matrix.sample_ids(), std::move(values));
        }
    }
    out.ingest["n_genes"] = out.matrix.n_genes();
    out.ingest["n_samples"] = out.matrix.n_samples();

    if (!dataset.annotations.empty()) {
        std::istringstream text(read_text_file(dataset.annotations));
        out.annotations = parse_sample_annotations(text);
        record("annotations", dataset.annotations);
        for (const auto& a : out.annotations) {
            if (!out.matrix.sample_index(a.sample_id))
                throw DataError("MissingSample", "annotated sample " + a.sample_id + " is not a matrix column");
        }
    }
    if (dataset.clinical) {
        std::istringstream text(read_text_file(dataset.clinical->path));
        out.clinical = parse_clinical_table(text, dataset.clinical->columns);
        record("clinical", dataset.clinical->path);
        out.ingest["clinical_rows"] = out.clinical->rows.size();
        out.ingest["clinical_dropped_incomplete"] = out.clinical->dropped_incomplete;
    }
    return out;
}

AuditRun run_audit(const AuditConfig& config, const RunOptions& options) {
    AuditRun run;
    run.config = config;
    for (const auto& claim : config.claims) {
        if (!run.datasets.contains(claim.dataset))
            run.datasets.emplace(claim.dataset, load_dataset(config.datasets.at(claim.dataset)));
    }
    for (const auto& claim : config.claims) {
        const auto spec = resolve_claim(config, claim);
        const auto& data = run.datasets.at(claim.dataset);
        ClaimRun result;
        result.claim = claim;
        try {
            switch (claim.kind) {
                case ClaimKind::crossgroup_correlation:
                    result.verdicts.push_back(run_crossgroup_correlation(spec, data.matrix, data.annotations, options));
                    break;
                case ClaimKind::regulator_correlation:
                    result.verdicts = run_regulator_correlation(spec, data.matrix, data.annotations, options);
                    break;
                case ClaimKind::survival_signature:
                    result.verdicts.push_back(run_survival_signature(spec, data.matrix, *data.clinical, options));
                    break;
            }
        } catch (const Error& e) {
            std::rethrow_exception(e.with_context("claim " + claim.id));
        }
        run.claims.push_back(std::move(result));
    }
    return run;
}

}  // namespace nullaudit
