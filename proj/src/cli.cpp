#include "nullaudit/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nullaudit/audit.hpp"
#include "nullaudit/config.hpp"
#include "nullaudit/error.hpp"
#include "nullaudit/geo.hpp"
#include "nullaudit/report.hpp"
#include "nullaudit/stats.hpp"
#include "nullaudit/survival.hpp"
#include "nullaudit/text_table.hpp"

namespace nullaudit {

namespace fs = std::filesystem;

namespace {

int exit_code_for(const Error& e) {
    switch (e.category()) {
        case ErrorCategory::config: return kExitConfig;
        case ErrorCategory::data: return kExitData;
        case ErrorCategory::statistical: return kExitStatistical;
        case ErrorCategory::io: return kExitData;
    }
    return kExitData;
}

void report_error(const Error& e) {
    std::string_view message = e.what();
    if (message.starts_with(e.code() + ": ")) message.remove_prefix(e.code().size() + 2);
    std::cerr << "nullaudit: " << to_string(e.category()) << " error [" << e.code() << "]: " << message << '\n';
}

void make_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("OutputIOError", "cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();
    if (!out) throw IoError("OutputIOError", "cannot write " + path.string());
}

// numeric CSV with an optional header row
std::vector<std::vector<double>> read_numeric_columns(const std::string& path, std::size_t arity) {
    std::istringstream in(read_text_file(path));
    std::vector<std::vector<double>> columns(arity);
    std::string line;
    std::size_t line_no = 0;
    char delimiter = 0;
    bool first = true;
    while (read_line(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        if (!delimiter) delimiter = sniff_delimiter(line);
        const auto fields = split_delimited(line, delimiter);
        if (fields.size() != arity)
            throw ConfigError("MalformedInput", path + ":" + std::to_string(line_no) + ": expected " +
                                                    std::to_string(arity) + " columns, found " +
                                                    std::to_string(fields.size()));
        std::vector<double> row;
        for (const auto& f : fields) {
            auto v = parse_real(trim(unquote(f)));
            if (!v) break;
            row.push_back(*v);
        }
        if (row.size() != arity) {
            if (first) {
                first = false;
                continue;  // header
            }
            throw ConfigError("MalformedInput", path + ":" + std::to_string(line_no) + ": non-numeric value");
        }
        first = false;
        for (std::size_t c = 0; c < arity; ++c) columns[c].push_back(row[c]);
    }
    if (columns.front().empty()) throw ConfigError("MalformedInput", path + ": no data rows");
    return columns;
}

std::vector<int> as_events(const std::vector<double>& column) {
    std::vector<int> events;
    for (double v : column) {
        if (v != 0.0 && v != 1.0)
            throw ConfigError("MalformedInput", "event column must hold 0 or 1, found " + format_real(v));
        events.push_back(static_cast<int>(v));
    }
    return events;
}

int cmd_stats(const std::string& statistic, const std::string& input) {
    try {
        if (statistic == "spearman" || statistic == "pearson") {
            const auto cols = read_numeric_columns(input, 2);
            const auto r = correlate(parse_correlation_method(statistic), cols[0], cols[1]);
            std::cout << (statistic == "spearman" ? "rho=" : "r=") << format_real(r.r) << '\n';
            std::cout << "n=" << r.n << '\n';
            if (r.asymptotic_p) std::cout << "p_asymptotic=" << format_real(*r.asymptotic_p) << '\n';
        } else {
            // columns: time, event, score
            const auto cols = read_numeric_columns(input, 3);
            const auto events = as_events(cols[1]);
            if (statistic == "cox") {
                const auto fit = cox_fit(cols[0], events, cols[2]);
                std::cout << "beta=" << format_real(fit.beta) << '\n'
                          << "se=" << format_real(fit.se) << '\n'
                          << "z=" << format_real(fit.wald_z) << '\n'
                          << "p=" << format_real(fit.wald_p) << '\n'
                          << "hr=" << format_real(fit.hazard_ratio()) << '\n'
                          << "loglik=" << format_real(fit.log_partial_likelihood) << '\n'
                          << "iterations=" << fit.n_iterations << '\n'
                          << "n=" << cols[0].size() << '\n';
            } else {
                const auto c = concordance_index(cols[0], events, cols[2]);
                std::cout << "c_index=" << format_real(c.c_index) << '\n'
                          << "comparable=" << c.n_comparable << '\n'
                          << "concordant=" << c.n_concordant << '\n'
                          << "discordant=" << c.n_discordant << '\n'
                          << "tied_score=" << c.n_tied_score << '\n';
            }
        }
    } catch (const Error& e) {
        // any failure of a one-off statistic is a problem with its input
        report_error(e);
        return kExitUsage;
    }
    return kExitOk;
}

int cmd_fetch(const std::vector<std::string>& accessions, const fs::path& out) {
    make_out_dir(out);
    for (const auto& acc : accessions) {
        const auto path = fetch_series_matrix(acc, out.string());
        std::cerr << acc << " -> " << path << '\n';
    }
    return kExitOk;
}

int cmd_ingest(const std::string& series, const std::string& platform, const std::string& policy, bool raw,
               const std::string& probe_col, const std::string& symbol_col, const fs::path& out) {
    std::istringstream series_in(read_text_file(series));
    const auto doc = parse_series_matrix(series_in);
    std::optional<PlatformAnnotation> annotation;
    if (!platform.empty()) {
        std::istringstream platform_in(read_text_file(platform));
        annotation = parse_platform_annotation(platform_in, probe_col, symbol_col);
    }
    CollapseOptions options;
    options.policy = parse_collapse_policy(policy);
    options.already_log2 = !raw;
    CollapseReport report;
    const auto matrix = collapse_probes(doc, annotation ? &*annotation : nullptr, options, &report);

    make_out_dir(out);
    std::ostringstream expr, sheet;
    write_expression_table(expr, matrix);
    write_sample_sheet(sheet, doc);
    write_text(out / "expression.tsv", expr.str());
    write_text(out / "samples.tsv", sheet.str());
    nlohmann::json summary = {{"series_matrix", fs::absolute(series).string()},
                              {"policy", std::string(to_string(options.policy))},
                              {"already_log2", options.already_log2},
                              {"probes_total", report.probes_total},
                              {"probes_unannotated", report.probes_unannotated},
                              {"probes_ambiguous", report.probes_ambiguous},
                              {"genes_with_missing", report.genes_with_missing},
                              {"dropped_genes", report.dropped_genes},
                              {"genes", matrix.n_genes()},
                              {"samples", matrix.n_samples()}};
    if (!platform.empty()) summary["platform"] = fs::absolute(platform).string();
    write_text(out / "ingest_report.json", summary.dump(2) + "\n");
    std::cerr << "ingested " << matrix.n_genes() << " genes x " << matrix.n_samples() << " samples\n";
    return kExitOk;
}

int cmd_audit(const fs::path& config_path, const fs::path& out, std::optional<std::uint64_t> seed,
              std::optional<std::size_t> workers) {
    auto config = load_audit_config(config_path);
    if (seed) {
        for (auto& claim : config.claims) claim.null.seed = *seed;
    }
    if (workers) config.settings.workers = *workers;
    RunOptions options;
    options.workers = config.settings.workers;
    options.max_resamples_per_draw = config.settings.max_resamples_per_draw;
    const auto run = run_audit(config, options);
    const auto emitted = emit_report(run, out);
    for (const auto& v : emitted.audit_report.at("verdicts"))
        std::cerr << v.at("claim_id").get<std::string>() << ": " << v.at("verdict").get<std::string>() << '\n';
    return kExitOk;
}

int cmd_replay(fs::path report, const fs::path& out, std::size_t workers) {
    if (fs::is_directory(report)) report /= "report.json";
    const auto result = replay_report(report, out, workers);
    if (!result.matches) {
        std::cerr << "nullaudit: replay mismatch in claim " << result.claim_id << ": " << result.divergence << '\n';
        return kExitReplayMismatch;
    }
    std::cerr << "replay of " << result.claim_id << " matches\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"nullaudit: audit gene-expression claims against seeded empirical nulls"};
    app.require_subcommand(1, 1);

    auto* fetch = app.add_subcommand("fetch", "download GEO series-matrix files");
    std::vector<std::string> accessions;
    std::string fetch_out;
    fetch->add_option("accessions", accessions, "GSE accessions")->required();
    fetch->add_option("--out", fetch_out, "destination directory")->required();

    auto* ingest = app.add_subcommand("ingest", "collapse a series matrix to a gene-level table");
    std::string series, platform, probe_col, symbol_col, policy = "max_mean_probe", ingest_out;
    bool raw = false;
    ingest->add_option("--series", series, "series-matrix file (.txt or .txt.gz)")->required();
    ingest->add_option("--platform", platform, "platform annotation table");
    ingest->add_option("--probe-column", probe_col, "probe id column of the platform table");
    ingest->add_option("--symbol-column", symbol_col, "gene symbol column of the platform table");
    ingest->add_option("--policy", policy, "max_mean_probe or mean_of_probes");
    ingest->add_flag("--raw-intensity", raw, "values are not log2; apply log2(x + 1)");
    ingest->add_option("--out", ingest_out, "output directory")->required();

    auto* audit = app.add_subcommand("audit", "run every claim of an audit config");
    std::string config_path, audit_out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    audit->add_option("--config", config_path, "audit config (JSON)")->required();
    audit->add_option("--out", audit_out, "output directory")->required();
    audit->add_option("--seed", seed, "override every claim's null seed");
    audit->add_option("--workers", workers, "null-draw worker threads")->check(CLI::PositiveNumber);

    auto* stats = app.add_subcommand("stats", "compute one statistic from a CSV");
    std::string statistic, input;
    stats->add_option("statistic", statistic, "spearman, pearson, cox or cindex")
        ->required()
        ->check(CLI::IsMember({"spearman", "pearson", "cox", "cindex"}));
    stats->add_option("--input", input, "CSV: x,y for correlations; time,event,score for cox/cindex")->required();

    auto* replay = app.add_subcommand("replay", "re-run a verdict report and compare bit-for-bit");
    std::string report_path, replay_out;
    std::size_t replay_workers = 1;
    replay->add_option("report", report_path, "report.json or its directory")->required();
    replay->add_option("--out", replay_out, "output directory")->required();
    replay->add_option("--workers", replay_workers, "null-draw worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e, std::cerr, std::cerr);
        return kExitUsage;
    }

    try {
        if (*fetch) return cmd_fetch(accessions, fetch_out);
        if (*ingest) return cmd_ingest(series, platform, policy, raw, probe_col, symbol_col, ingest_out);
        if (*audit) return cmd_audit(config_path, audit_out, seed, workers);
        if (*stats) return cmd_stats(statistic, input);
        if (*replay) return cmd_replay(report_path, replay_out, replay_workers);
    } catch (const Error& e) {
        report_error(e);
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "nullaudit: internal error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace nullaudit
