#include "nullaudit/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "nullaudit/digest.hpp"
#include "nullaudit/error.hpp"
#include "nullaudit/random.hpp"
#include "nullaudit/text_table.hpp"

namespace nullaudit {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kHistogramBins = 40;

json histogram(const NullDistribution& null) {
    double lo = null.observed, hi = null.observed;
    for (double s : null.samples) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    std::vector<std::size_t> counts(kHistogramBins, 0);
    const double width = (hi - lo) / static_cast<double>(kHistogramBins);
    for (double s : null.samples) {
        auto bin = static_cast<std::size_t>((s - lo) / width);
        ++counts[std::min(bin, kHistogramBins - 1)];
    }
    return {{"lo", lo}, {"hi", hi}, {"counts", counts}};
}

json trend_line(const ObservedData& data) {
    if (data.x.size() < 2) return nullptr;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
        mx += data.x[i];
        my += data.y[i];
    }
    mx /= static_cast<double>(data.x.size());
    my /= static_cast<double>(data.y.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
        sxy += (data.x[i] - mx) * (data.y[i] - my);
        sxx += (data.x[i] - mx) * (data.x[i] - mx);
    }
    if (sxx == 0.0) return nullptr;
    const double slope = sxy / sxx;
    return {{"slope", slope}, {"intercept", my - slope * mx}};
}

json metric_json(const MetricOutcome& o) {
    json m = {{"metric", o.metric},
              {"statistic", o.statistic},
              {"observed", o.observed},
              {"tail", std::string(to_string(o.empirical.tail))},
              {"p", o.empirical.p},
              {"p_smoothed", o.empirical.p_smoothed},
              {"n_as_extreme", o.empirical.n_as_extreme},
              {"n_iterations", o.empirical.n_iterations},
              {"significant", o.significant}};
    if (o.asymptotic_p) m["asymptotic_p"] = *o.asymptotic_p;
    return m;
}

json dataset_json(const LoadedDataset& d) {
    json files = json::array();
    for (const auto& f : d.files) files.push_back({{"role", f.role}, {"path", f.path}, {"sha256", f.sha256}});
    return {{"name", d.name}, {"accession", d.accession}, {"files", files}, {"ingest", d.ingest}};
}

// Regulator claims keep every candidate: the candidates are excluded from
// each other's nulls, so dropping one would change the replayed draws.
AuditConfig verdict_config(const AuditRun& run, const ClaimRun& claim) {
    return restrict_to_claim(run.config, claim.claim);
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    out.close();
    if (!out) throw IoError("OutputIOError", "cannot write " + path.string());
}

std::string svg_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fixed(double v, int digits = 3) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

}  // namespace

std::string report_timestamp() {
    std::time_t t = std::time(nullptr);
    if (const char* env = std::getenv(kTimestampEnv); env && *env) t = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

json verdict_report(const AuditRun& run, const ClaimRun& claim, const AuditVerdict& verdict,
                    const std::string& generated_at) {
    const auto config = verdict_config(run, claim);
    const json config_json = to_json(config);

    json metrics = json::array();
    for (const auto& o : verdict.outcomes) metrics.push_back(metric_json(o));

    json null_stats = json::array();
    for (const auto& n : verdict.nulls)
        null_stats.push_back({{"name", n.statistic_name}, {"observed", n.observed}, {"histogram", histogram(n)},
                              {"samples", n.samples}});
    const auto& first = verdict.nulls.front();

    json observed = {{"x_label", verdict.data.x_label},
                     {"y_label", verdict.data.y_label},
                     {"labels", verdict.data.labels},
                     {"x", verdict.data.x},
                     {"y", verdict.data.y}};
    if (!verdict.data.events.empty()) observed["events"] = verdict.data.events;
    if (verdict.kind != ClaimKind::survival_signature) observed["trend"] = trend_line(verdict.data);

    json report = {{"format", std::string(kReportFormat)},
                   {"artifact_version", std::string(kArtifactVersion)},
                   {"generated_at", generated_at},
                   {"rng", std::string(kRngIdentifier)},
                   {"config", config_json},
                   {"config_digest", sha256_hex(config_json.dump())},
                   {"dataset", dataset_json(run.datasets.at(claim.claim.dataset))},
                   {"claim_id", verdict.claim_id},
                   {"kind", std::string(to_string(verdict.kind))},
                   {"verdict", std::string(to_string(verdict.verdict))},
                   {"alpha", verdict.alpha},
                   {"p_value_mode", claim.claim.p_value == PValueMode::plain ? "plain" : "smoothed"},
                   {"metrics", metrics},
                   {"details", verdict.details},
                   {"observed_data", observed},
                   {"null",
                    {{"seed", first.config.seed},
                     {"n_iterations", first.config.n_iterations},
                     {"set_size", first.config.set_size},
                     {"exclusions", first.config.exclusions},
                     {"resamples", first.resamples},
                     {"statistics", null_stats}}}};
    if (verdict.kind == ClaimKind::regulator_correlation) {
        report["clustering"] = {{"linkage", "average (UPGMA)"},
                                {"distance", "1 - pearson correlation of fold-change profiles"},
                                {"gene_selection", "top variance of fold change (n - 1 denominator)"},
                                {"tie_break", "equal costs merge the cluster pair whose (smaller, larger) minimum member indices are lexicographically smallest"},
                                {"top_k", claim.claim.top_k},
                                {"clusters", claim.claim.clusters}};
    }
    if (verdict.kind == ClaimKind::survival_signature)
        report["cox"] = {{"ties", "efron"}, {"covariate", "raw mean expression"}, {"risk_direction", "higher score = higher risk"}};
    return report;
}

std::string null_samples_csv(const std::vector<NullDistribution>& nulls) {
    std::ostringstream out;
    for (std::size_t k = 0; k < nulls.size(); ++k) {
        if (k) out << ',';
        out << nulls[k].statistic_name << "[seed=" << nulls[k].config.seed
            << " n_iterations=" << nulls[k].config.n_iterations << "]";
    }
    out << '\n';
    const std::size_t n = nulls.empty() ? 0 : nulls.front().samples.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < nulls.size(); ++k) {
            if (k) out << ',';
            out << format_real(nulls[k].samples[i]);
        }
        out << '\n';
    }
    return out.str();
}

std::string render_figure_svg(const json& report) {
    constexpr double panel_w = 340, panel_h = 260, margin = 50;
    const auto& stats = report.at("null").at("statistics");
    const std::size_t panels = 1 + stats.size();
    const double width = static_cast<double>(panels) * (panel_w + margin) + margin;
    const double height = panel_h + 2 * margin + 20;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << margin << "\" y=\"20\" font-size=\"14\">" << svg_escape(report.at("claim_id").get<std::string>())
        << " : " << svg_escape(report.at("verdict").get<std::string>()) << "</text>\n";

    auto frame = [&](double x0, double y0, const std::string& xlabel, const std::string& ylabel, double xlo, double xhi,
                     double ylo, double yhi) {
        svg << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << panel_w << "\" height=\"" << panel_h
            << "\" fill=\"none\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << x0 + panel_w / 2 << "\" y=\"" << y0 + panel_h + 30 << "\" text-anchor=\"middle\">"
            << svg_escape(xlabel) << "</text>\n";
        svg << "<text x=\"" << x0 - 35 << "\" y=\"" << y0 + panel_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 "
            << x0 - 35 << ' ' << y0 + panel_h / 2 << ")\">" << svg_escape(ylabel) << "</text>\n";
        svg << "<text x=\"" << x0 << "\" y=\"" << y0 + panel_h + 14 << "\">" << fixed(xlo) << "</text>\n";
        svg << "<text x=\"" << x0 + panel_w << "\" y=\"" << y0 + panel_h + 14 << "\" text-anchor=\"end\">" << fixed(xhi)
            << "</text>\n";
        svg << "<text x=\"" << x0 - 4 << "\" y=\"" << y0 + panel_h << "\" text-anchor=\"end\">" << fixed(ylo) << "</text>\n";
        svg << "<text x=\"" << x0 - 4 << "\" y=\"" << y0 + 10 << "\" text-anchor=\"end\">" << fixed(yhi) << "</text>\n";
    };

    // scatter of the observed data
    {
        const auto& obs = report.at("observed_data");
        const auto x = obs.at("x").get<std::vector<double>>();
        const auto y = obs.at("y").get<std::vector<double>>();
        const auto labels = obs.at("labels").get<std::vector<std::string>>();
        const std::vector<int> events = obs.contains("events") ? obs.at("events").get<std::vector<int>>() : std::vector<int>{};
        double xlo = *std::min_element(x.begin(), x.end()), xhi = *std::max_element(x.begin(), x.end());
        double ylo = *std::min_element(y.begin(), y.end()), yhi = *std::max_element(y.begin(), y.end());
        if (xhi == xlo) { xlo -= 0.5; xhi += 0.5; }
        if (yhi == ylo) { ylo -= 0.5; yhi += 0.5; }
        const double x0 = margin, y0 = margin;
        frame(x0, y0, obs.at("x_label").get<std::string>(), obs.at("y_label").get<std::string>(), xlo, xhi, ylo, yhi);
        auto px = [&](double v) { return x0 + 10 + (v - xlo) / (xhi - xlo) * (panel_w - 20); };
        auto py = [&](double v) { return y0 + panel_h - 10 - (v - ylo) / (yhi - ylo) * (panel_h - 20); };
        if (obs.contains("trend") && !obs.at("trend").is_null()) {
            const double slope = obs.at("trend").at("slope").get<double>();
            const double intercept = obs.at("trend").at("intercept").get<double>();
            svg << "<line x1=\"" << px(xlo) << "\" y1=\"" << py(intercept + slope * xlo) << "\" x2=\"" << px(xhi)
                << "\" y2=\"" << py(intercept + slope * xhi) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
        }
        const bool label_points = labels.size() <= 30;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const bool hollow = !events.empty() && events[i] == 0;
            svg << "<circle cx=\"" << px(x[i]) << "\" cy=\"" << py(y[i]) << "\" r=\"3\" "
                << (hollow ? "fill=\"none\" stroke=\"steelblue\"" : "fill=\"steelblue\"") << "/>\n";
            if (label_points)
                svg << "<text x=\"" << px(x[i]) + 5 << "\" y=\"" << py(y[i]) - 4 << "\" font-size=\"9\">"
                    << svg_escape(labels[i]) << "</text>\n";
        }
    }

    // null histograms with the observed value marked
    for (std::size_t k = 0; k < stats.size(); ++k) {
        const auto& s = stats[k];
        const auto& h = s.at("histogram");
        const double lo = h.at("lo").get<double>(), hi = h.at("hi").get<double>();
        const auto counts = h.at("counts").get<std::vector<std::size_t>>();
        const double peak = static_cast<double>(std::max<std::size_t>(1, *std::max_element(counts.begin(), counts.end())));
        const double x0 = margin + static_cast<double>(k + 1) * (panel_w + margin), y0 = margin;
        frame(x0, y0, s.at("name").get<std::string>() + " (null)", "count", lo, hi, 0.0, peak);
        const double bar_w = panel_w / static_cast<double>(counts.size());
        for (std::size_t b = 0; b < counts.size(); ++b) {
            const double bh = static_cast<double>(counts[b]) / peak * (panel_h - 10);
            svg << "<rect x=\"" << x0 + static_cast<double>(b) * bar_w << "\" y=\"" << y0 + panel_h - bh << "\" width=\""
                << bar_w << "\" height=\"" << bh << "\" fill=\"lightgray\" stroke=\"gray\" stroke-width=\"0.5\"/>\n";
        }
        const double observed = s.at("observed").get<double>();
        const double ox = x0 + (observed - lo) / (hi - lo) * panel_w;
        svg << "<line x1=\"" << ox << "\" y1=\"" << y0 << "\" x2=\"" << ox << "\" y2=\"" << y0 + panel_h
            << "\" stroke=\"red\" stroke-width=\"2\"/>\n";
        const auto& metric = report.at("metrics")[k];
        svg << "<text x=\"" << x0 + 4 << "\" y=\"" << y0 + 14 << "\" fill=\"red\">observed "
            << fixed(observed) << ", empirical p = " << format_real(metric.at("p").get<double>()) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string render_summary(const json& audit_report) {
    std::ostringstream out;
    out << "nullaudit " << audit_report.at("artifact_version").get<std::string>() << " audit report\n";
    out << "generated_at: " << audit_report.at("generated_at").get<std::string>() << '\n';
    out << "rng: " << audit_report.at("rng").get<std::string>() << '\n';
    out << "config_digest: " << audit_report.at("config_digest").get<std::string>() << "\n\n";
    for (const auto& d : audit_report.at("datasets")) {
        out << "dataset " << d.at("name").get<std::string>();
        if (!d.at("accession").get<std::string>().empty()) out << " (" << d.at("accession").get<std::string>() << ")";
        out << '\n';
        for (const auto& f : d.at("files"))
            out << "  " << f.at("role").get<std::string>() << ": " << f.at("path").get<std::string>() << " sha256="
                << f.at("sha256").get<std::string>() << '\n';
    }
    out << '\n';
    for (const auto& v : audit_report.at("verdicts")) {
        out << v.at("claim_id").get<std::string>() << " [" << v.at("kind").get<std::string>()
            << "]: " << v.at("verdict").get<std::string>() << " (alpha " << format_real(v.at("alpha").get<double>())
            << ", seed " << v.at("seed").get<std::uint64_t>() << ")\n";
        for (const auto& m : v.at("metrics")) {
            out << "  " << m.at("metric").get<std::string>() << ": " << m.at("statistic").get<std::string>() << " = "
                << format_real(m.at("observed").get<double>()) << ", empirical p = " << format_real(m.at("p").get<double>())
                << " (" << m.at("n_as_extreme").get<std::size_t>() << "/" << m.at("n_iterations").get<std::size_t>() << ", "
                << m.at("tail").get<std::string>() << ")"
                << (m.at("significant").get<bool>() ? " significant" : " not significant");
            if (m.contains("asymptotic_p")) out << "; asymptotic p = " << format_real(m.at("asymptotic_p").get<double>());
            out << '\n';
        }
    }
    return out.str();
}

EmittedReport emit_report(const AuditRun& run, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("OutputIOError", "cannot create " + out_dir.string() + ": " + ec.message());

    const auto generated_at = report_timestamp();
    const json config_json = to_json(run.config);
    EmittedReport emitted;
    json datasets = json::array();
    for (const auto& [name, d] : run.datasets) datasets.push_back(dataset_json(d));
    json verdicts = json::array();

    for (const auto& claim : run.claims) {
        for (const auto& verdict : claim.verdicts) {
            const auto report = verdict_report(run, claim, verdict, generated_at);
            const fs::path dir = out_dir / verdict.claim_id;
            fs::create_directories(dir, ec);
            if (ec) throw IoError("OutputIOError", "cannot create " + dir.string() + ": " + ec.message());
            write_file(dir / "report.json", report.dump(2) + "\n");
            write_file(dir / "null_samples.csv", null_samples_csv(verdict.nulls));
            write_file(dir / "figure.svg", render_figure_svg(report));
            if (verdict.details.contains("modules"))
                write_file(dir / "modules.tsv", verdict.details.at("modules").at("table").get<std::string>());
            emitted.claim_dirs.push_back(dir);
            verdicts.push_back({{"claim_id", report.at("claim_id")},
                                {"kind", report.at("kind")},
                                {"verdict", report.at("verdict")},
                                {"alpha", report.at("alpha")},
                                {"seed", report.at("null").at("seed")},
                                {"metrics", report.at("metrics")},
                                {"details", report.at("details")},
                                {"report", (fs::path(verdict.claim_id) / "report.json").string()}});
        }
    }
    emitted.audit_report = {{"format", std::string(kReportFormat)},
                            {"artifact_version", std::string(kArtifactVersion)},
                            {"generated_at", generated_at},
                            {"rng", std::string(kRngIdentifier)},
                            {"config", config_json},
                            {"config_digest", sha256_hex(config_json.dump())},
                            {"datasets", datasets},
                            {"verdicts", verdicts}};
    write_file(out_dir / "audit_report.json", emitted.audit_report.dump(2) + "\n");
    write_file(out_dir / "summary.txt", render_summary(emitted.audit_report));
    return emitted;
}

ReplayResult replay_report(const fs::path& report_path, const fs::path& out_dir, std::size_t workers) {
    json stored;
    try {
        stored = json::parse(read_text_file(report_path.string()));
    } catch (const json::exception& e) {
        throw ConfigError("MalformedReport", report_path.string() + ": " + e.what());
    } catch (const IoError& e) {
        throw ConfigError("UnreadableReport", e.what());
    }
    if (!stored.is_object() || stored.value("format", std::string()) != kReportFormat || !stored.contains("config") ||
        !stored.contains("claim_id"))
        throw ConfigError("MalformedReport", report_path.string() + " is not a nullaudit verdict report");

    ReplayResult result;
    result.claim_id = stored.at("claim_id").get<std::string>();
    auto diverge = [&](std::string what) {
        result.matches = false;
        result.divergence = std::move(what);
        return result;
    };

    if (stored.value("rng", std::string()) != kRngIdentifier)
        return diverge("report was produced with RNG '" + stored.value("rng", std::string()) + "'");

    const auto config = parse_audit_config(stored.at("config"), fs::absolute(report_path).parent_path());
    if (config.claims.size() != 1) throw ConfigError("MalformedReport", "report config must hold exactly one claim");

    for (const auto& f : stored.at("dataset").at("files")) {
        const auto path = f.at("path").get<std::string>();
        if (sha256_file(path) != f.at("sha256").get<std::string>()) return diverge("data file " + path + " changed");
    }

    RunOptions options;
    options.workers = workers;
    options.max_resamples_per_draw = config.settings.max_resamples_per_draw;
    const auto run = run_audit(config, options);
    emit_report(run, out_dir);

    const AuditVerdict* fresh = nullptr;
    for (const auto& claim : run.claims) {
        for (const auto& v : claim.verdicts) {
            if (v.claim_id == result.claim_id) fresh = &v;
        }
    }
    if (!fresh) return diverge("replayed config produced no verdict for " + result.claim_id);

    if (std::string(to_string(fresh->verdict)) != stored.at("verdict").get<std::string>())
        return diverge("verdict " + std::string(to_string(fresh->verdict)) + " != stored " +
                       stored.at("verdict").get<std::string>());
    const auto& metrics = stored.at("metrics");
    if (metrics.size() != fresh->outcomes.size()) return diverge("metric count differs");
    for (std::size_t k = 0; k < metrics.size(); ++k) {
        const auto& m = metrics[k];
        const auto& o = fresh->outcomes[k];
        const auto name = m.at("metric").get<std::string>();
        if (m.at("observed").get<double>() != o.observed)
            return diverge(name + ": observed " + format_real(o.observed) + " != stored " +
                           format_real(m.at("observed").get<double>()));
        if (m.at("n_as_extreme").get<std::size_t>() != o.empirical.n_as_extreme)
            return diverge(name + ": n_as_extreme " + std::to_string(o.empirical.n_as_extreme) + " != stored " +
                           std::to_string(m.at("n_as_extreme").get<std::size_t>()));
    }
    const auto& stats = stored.at("null").at("statistics");
    if (stats.size() != fresh->nulls.size()) return diverge("null statistic count differs");
    for (std::size_t k = 0; k < stats.size(); ++k) {
        const auto samples = stats[k].at("samples").get<std::vector<double>>();
        const auto& now = fresh->nulls[k].samples;
        if (samples.size() != now.size())
            return diverge(fresh->nulls[k].statistic_name + ": " + std::to_string(now.size()) + " null samples != stored " +
                           std::to_string(samples.size()));
        for (std::size_t i = 0; i < now.size(); ++i) {
            if (samples[i] != now[i])
                return diverge(fresh->nulls[k].statistic_name + ": null sample " + std::to_string(i) + " is " +
                               format_real(now[i]) + ", stored " + format_real(samples[i]));
        }
    }
    result.matches = true;
    return result;
}

}  // namespace nullaudit
