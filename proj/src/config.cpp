#include "nullaudit/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "nullaudit/error.hpp"
#include "nullaudit/text_table.hpp"

namespace nullaudit {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(ClaimKind kind) noexcept {
    switch (kind) {
        case ClaimKind::crossgroup_correlation: return "crossgroup_correlation";
        case ClaimKind::regulator_correlation: return "regulator_correlation";
        case ClaimKind::survival_signature: return "survival_signature";
    }
    return "unknown";
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError("InvalidConfig", path + ": " + message);
}

void check_keys(const json& node, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!node.is_object()) fail(path, "expected an object");
    for (const auto& [key, _] : node.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError("UnknownKey", "unknown key '" + key + "' at " + path);
    }
}

const json* child(const json& node, std::string_view key) {
    auto it = node.find(key);
    return it == node.end() ? nullptr : &*it;
}

std::string get_string(const json& node, const std::string& path, std::string_view key, bool required,
                       std::string fallback = {}) {
    const json* v = child(node, key);
    if (!v) {
        if (required) fail(path, "missing required key '" + std::string(key) + "'");
        return fallback;
    }
    if (!v->is_string()) fail(path + "." + std::string(key), "expected a string");
    return v->get<std::string>();
}

bool get_bool(const json& node, const std::string& path, std::string_view key, bool fallback) {
    const json* v = child(node, key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(path + "." + std::string(key), "expected true or false");
    return v->get<bool>();
}

std::uint64_t get_unsigned(const json& node, const std::string& path, std::string_view key,
                           std::uint64_t fallback, std::uint64_t minimum = 0) {
    const json* v = child(node, key);
    if (!v) return fallback;
    if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<std::int64_t>() < 0))
        fail(path + "." + std::string(key), "expected a nonnegative integer");
    const auto value = v->get<std::uint64_t>();
    if (value < minimum) fail(path + "." + std::string(key), "must be at least " + std::to_string(minimum));
    return value;
}

std::optional<double> get_number(const json& node, const std::string& path, std::string_view key) {
    const json* v = child(node, key);
    if (!v) return std::nullopt;
    if (!v->is_number()) fail(path + "." + std::string(key), "expected a number");
    return v->get<double>();
}

std::vector<std::string> get_string_list(const json& node, const std::string& path, std::string_view key) {
    const json* v = child(node, key);
    if (!v) return {};
    if (!v->is_array()) fail(path + "." + std::string(key), "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& item : *v) {
        if (!item.is_string()) fail(path + "." + std::string(key), "expected an array of strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

std::string resolve_path(const std::string& value, const fs::path& base_dir) {
    if (value.empty()) return value;
    fs::path p(value);
    if (p.is_relative()) p = base_dir / p;
    return fs::absolute(p).lexically_normal().string();
}

SampleSelector parse_selector(const json& node, const std::string& path) {
    check_keys(node, path, {"dose", "time", "extra"});
    SampleSelector s;
    s.dose = get_number(node, path, "dose");
    s.timepoint = get_number(node, path, "time");
    if (const json* extra = child(node, "extra")) {
        if (!extra->is_object()) fail(path + ".extra", "expected an object of strings");
        for (const auto& [k, v] : extra->items()) {
            if (!v.is_string()) fail(path + ".extra." + k, "expected a string");
            s.extra[k] = v.get<std::string>();
        }
    }
    return s;
}

json selector_json(const SampleSelector& s) {
    json out = json::object();
    if (s.dose) out["dose"] = *s.dose;
    if (s.timepoint) out["time"] = *s.timepoint;
    if (!s.extra.empty()) out["extra"] = s.extra;
    return out;
}

DatasetConfig parse_dataset(const std::string& name, const json& node, const fs::path& base_dir) {
    const std::string path = "datasets." + name;
    check_keys(node, path,
               {"accession", "series_matrix", "expression", "platform", "platform_columns", "probe_policy",
                "already_log2", "annotations", "clinical"});
    DatasetConfig d;
    d.name = name;
    d.accession = get_string(node, path, "accession", false);
    d.series_matrix = resolve_path(get_string(node, path, "series_matrix", false), base_dir);
    d.expression = resolve_path(get_string(node, path, "expression", false), base_dir);
    if (d.series_matrix.empty() == d.expression.empty())
        fail(path, "exactly one of 'series_matrix' or 'expression' is required");
    d.platform = resolve_path(get_string(node, path, "platform", false), base_dir);
    if (const json* cols = child(node, "platform_columns")) {
        check_keys(*cols, path + ".platform_columns", {"probe", "symbol"});
        d.platform_probe_column = get_string(*cols, path + ".platform_columns", "probe", false);
        d.platform_symbol_column = get_string(*cols, path + ".platform_columns", "symbol", false);
    }
    d.probe_policy = parse_collapse_policy(get_string(node, path, "probe_policy", false, "max_mean_probe"));
    d.already_log2 = get_bool(node, path, "already_log2", true);
    d.annotations = resolve_path(get_string(node, path, "annotations", false), base_dir);
    if (const json* c = child(node, "clinical")) {
        const std::string cpath = path + ".clinical";
        check_keys(*c, cpath, {"path", "subject", "time", "event", "event_map", "delimiter"});
        ClinicalSource src;
        src.path = resolve_path(get_string(*c, cpath, "path", true), base_dir);
        src.columns.subject = get_string(*c, cpath, "subject", true);
        src.columns.time = get_string(*c, cpath, "time", true);
        src.columns.event = get_string(*c, cpath, "event", true);
        if (const json* m = child(*c, "event_map")) {
            if (!m->is_object()) fail(cpath + ".event_map", "expected an object");
            for (const auto& [k, v] : m->items()) {
                if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1))
                    fail(cpath + ".event_map." + k, "must map to 0 or 1");
                src.columns.event_map[k] = v.get<int>();
            }
        }
        const auto delim = get_string(*c, cpath, "delimiter", false);
        if (delim.size() > 1 && delim != "\\t") fail(cpath + ".delimiter", "must be a single character");
        src.columns.delimiter = delim.empty() ? 0 : (delim == "\\t" ? '\t' : delim[0]);
        d.clinical = std::move(src);
    }
    return d;
}

ContrastSpec parse_contrast(const std::string& name, const json& node) {
    const std::string path = "contrasts." + name;
    check_keys(node, path, {"treated", "control", "pairing_key", "groups"});
    ContrastSpec c;
    c.name = name;
    const json* treated = child(node, "treated");
    const json* control = child(node, "control");
    if (!treated || !control) fail(path, "both 'treated' and 'control' selectors are required");
    c.treated = parse_selector(*treated, path + ".treated");
    c.control = parse_selector(*control, path + ".control");
    c.pairing_key = get_string(node, path, "pairing_key", false, "group_id");
    c.groups = get_string_list(node, path, "groups");
    return c;
}

ClaimKind parse_kind(const std::string& value, const std::string& path) {
    if (value == "crossgroup_correlation") return ClaimKind::crossgroup_correlation;
    if (value == "regulator_correlation") return ClaimKind::regulator_correlation;
    if (value == "survival_signature") return ClaimKind::survival_signature;
    fail(path, "unknown claim kind '" + value + "'");
}

ClaimConfig parse_claim(const json& node, std::size_t index, const AuditConfig& config) {
    std::string path = "claims[" + std::to_string(index) + "]";
    check_keys(node, path,
               {"id", "kind", "dataset", "contrast", "score_set", "response_set", "candidates", "modules",
                "signature", "method", "metrics", "null", "alpha", "allow_missing_genes", "p_value"});
    ClaimConfig c;
    c.id = get_string(node, path, "id", true);
    if (c.id.empty() || c.id.find_first_of("/\\") != std::string::npos || c.id == "." || c.id == "..")
        fail(path + ".id", "must be a nonempty name usable as a directory");
    path = "claims." + c.id;
    c.kind = parse_kind(get_string(node, path, "kind", true), path + ".kind");
    c.dataset = get_string(node, path, "dataset", true);
    if (!config.datasets.contains(c.dataset)) fail(path + ".dataset", "unknown dataset '" + c.dataset + "'");

    auto require_set = [&](std::string_view key) {
        auto name = get_string(node, path, key, true);
        if (!config.gene_sets.contains(name))
            fail(path + "." + std::string(key), "unknown gene set '" + name + "'");
        return name;
    };
    auto forbid = [&](std::initializer_list<std::string_view> keys) {
        for (auto k : keys) {
            if (child(node, k))
                throw ConfigError("UnknownKey", "key '" + std::string(k) + "' is not valid for " +
                                                    std::string(to_string(c.kind)) + " at " + path);
        }
    };
    const auto& dataset = config.datasets.at(c.dataset);

    std::set<std::string> allowed_metrics;
    std::vector<std::string> default_metrics;
    switch (c.kind) {
        case ClaimKind::crossgroup_correlation:
            forbid({"candidates", "modules", "signature"});
            c.score_set = require_set("score_set");
            c.response_set = require_set("response_set");
            c.method = parse_correlation_method(get_string(node, path, "method", false, "spearman"));
            allowed_metrics = {"correlation"};
            default_metrics = {"correlation"};
            c.null.exclude_claim_genes = false;
            break;
        case ClaimKind::regulator_correlation: {
            forbid({"score_set", "response_set", "signature"});
            c.method = parse_correlation_method(get_string(node, path, "method", false, "pearson"));
            const json* cands = child(node, "candidates");
            if (!cands || !cands->is_array() || cands->empty())
                fail(path + ".candidates", "expected a nonempty array");
            for (std::size_t i = 0; i < cands->size(); ++i) {
                const auto cpath = path + ".candidates[" + std::to_string(i) + "]";
                check_keys((*cands)[i], cpath, {"gene", "module"});
                Candidate cand;
                cand.gene = normalize_symbol(get_string((*cands)[i], cpath, "gene", true));
                cand.module = parse_module_label(get_string((*cands)[i], cpath, "module", true));
                for (const auto& other : c.candidates) {
                    if (other.gene == cand.gene) fail(cpath, "candidate " + cand.gene + " listed twice");
                }
                c.candidates.push_back(cand);
            }
            if (const json* m = child(node, "modules")) {
                check_keys(*m, path + ".modules", {"top_k", "clusters"});
                c.top_k = get_unsigned(*m, path + ".modules", "top_k", 250, 2);
                c.clusters = get_unsigned(*m, path + ".modules", "clusters", 3, 2);
                if (c.clusters > c.top_k) fail(path + ".modules", "clusters must not exceed top_k");
            }
            allowed_metrics = {"correlation"};
            default_metrics = {"correlation"};
            c.null.exclude_claim_genes = true;
            break;
        }
        case ClaimKind::survival_signature:
            forbid({"score_set", "response_set", "candidates", "modules", "contrast", "method"});
            c.signature = require_set("signature");
            if (!dataset.clinical) fail(path + ".dataset", "dataset '" + c.dataset + "' has no clinical table");
            allowed_metrics = {"c_index", "abs_log_hr"};
            default_metrics = {"c_index", "abs_log_hr"};
            c.null.exclude_claim_genes = true;
            c.null.n_iterations = 5000;
            break;
    }
    if (c.kind != ClaimKind::survival_signature) {
        c.contrast = get_string(node, path, "contrast", true);
        if (!config.contrasts.contains(c.contrast))
            fail(path + ".contrast", "unknown contrast '" + c.contrast + "'");
        if (dataset.annotations.empty())
            fail(path + ".dataset", "dataset '" + c.dataset + "' has no sample annotations");
    }

    c.metrics = get_string_list(node, path, "metrics");
    if (!child(node, "metrics")) c.metrics = default_metrics;
    if (c.metrics.empty()) fail(path + ".metrics", "must list at least one metric");
    for (const auto& m : c.metrics) {
        if (!allowed_metrics.contains(m))
            fail(path + ".metrics", "metric '" + m + "' is not valid for " + std::string(to_string(c.kind)));
    }
    {
        auto sorted = c.metrics;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            fail(path + ".metrics", "lists a metric twice");
    }

    if (const json* n = child(node, "null")) {
        const auto npath = path + ".null";
        check_keys(*n, npath, {"n_iterations", "seed", "exclusions", "exclude_claim_genes"});
        c.null.n_iterations = get_unsigned(*n, npath, "n_iterations", c.null.n_iterations, 1);
        c.null.seed = get_unsigned(*n, npath, "seed", 0);
        for (auto& g : get_string_list(*n, npath, "exclusions")) c.null.exclusions.push_back(normalize_symbol(g));
        c.null.exclude_claim_genes = get_bool(*n, npath, "exclude_claim_genes", c.null.exclude_claim_genes);
    }
    if (auto alpha = get_number(node, path, "alpha")) {
        if (!(*alpha > 0.0 && *alpha < 1.0)) fail(path + ".alpha", "must lie in (0, 1)");
        c.alpha = *alpha;
    }
    c.allow_missing_genes = get_bool(node, path, "allow_missing_genes", false);
    const auto pmode = get_string(node, path, "p_value", false, "plain");
    if (pmode == "plain")
        c.p_value = PValueMode::plain;
    else if (pmode == "smoothed")
        c.p_value = PValueMode::smoothed;
    else
        fail(path + ".p_value", "must be plain or smoothed");
    return c;
}

}  // namespace

AuditConfig parse_audit_config(const json& document, const fs::path& base_dir) {
    check_keys(document, "config", {"datasets", "gene_sets", "contrasts", "claims", "settings"});
    AuditConfig config;

    const json* datasets = child(document, "datasets");
    if (!datasets || !datasets->is_object() || datasets->empty())
        fail("config.datasets", "expected a nonempty object");
    for (const auto& [name, node] : datasets->items())
        config.datasets.emplace(name, parse_dataset(name, node, base_dir));

    if (const json* sets = child(document, "gene_sets")) {
        if (!sets->is_object()) fail("config.gene_sets", "expected an object");
        for (const auto& [name, node] : sets->items()) {
            auto genes = get_string_list(*sets, "gene_sets", name);
            try {
                GeneSet validated(name, genes);
                config.gene_sets.emplace(name, validated.genes());
            } catch (const DataError& e) {
                fail("gene_sets." + name, e.what());
            }
        }
    }
    if (const json* contrasts = child(document, "contrasts")) {
        if (!contrasts->is_object()) fail("config.contrasts", "expected an object");
        for (const auto& [name, node] : contrasts->items()) config.contrasts.emplace(name, parse_contrast(name, node));
    }
    if (const json* settings = child(document, "settings")) {
        check_keys(*settings, "settings", {"workers", "max_resamples_per_draw"});
        config.settings.workers = get_unsigned(*settings, "settings", "workers", 1, 1);
        config.settings.max_resamples_per_draw =
            get_unsigned(*settings, "settings", "max_resamples_per_draw", 100);
    }

    const json* claims = child(document, "claims");
    if (!claims || !claims->is_array() || claims->empty()) fail("config.claims", "expected a nonempty array");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < claims->size(); ++i) {
        auto claim = parse_claim((*claims)[i], i, config);
        if (!ids.insert(claim.id).second) fail("claims." + claim.id, "duplicate claim id");
        config.claims.push_back(std::move(claim));
    }
    return config;
}

AuditConfig load_audit_config(const fs::path& path) {
    std::string text;
    try {
        text = read_text_file(path.string());
    } catch (const IoError& e) {
        throw ConfigError("UnreadableConfig", e.what());
    }
    json document;
    try {
        document = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("MalformedConfig", path.string() + ": " + e.what());
    }
    return parse_audit_config(document, fs::absolute(path).parent_path());
}

json to_json(const DatasetConfig& d) {
    json out;
    if (!d.accession.empty()) out["accession"] = d.accession;
    if (!d.series_matrix.empty()) out["series_matrix"] = d.series_matrix;
    if (!d.expression.empty()) out["expression"] = d.expression;
    if (!d.platform.empty()) out["platform"] = d.platform;
    if (!d.platform_probe_column.empty() || !d.platform_symbol_column.empty()) {
        json cols = json::object();
        if (!d.platform_probe_column.empty()) cols["probe"] = d.platform_probe_column;
        if (!d.platform_symbol_column.empty()) cols["symbol"] = d.platform_symbol_column;
        out["platform_columns"] = cols;
    }
    out["probe_policy"] = std::string(to_string(d.probe_policy));
    out["already_log2"] = d.already_log2;
    if (!d.annotations.empty()) out["annotations"] = d.annotations;
    if (d.clinical) {
        json c;
        c["path"] = d.clinical->path;
        c["subject"] = d.clinical->columns.subject;
        c["time"] = d.clinical->columns.time;
        c["event"] = d.clinical->columns.event;
        if (!d.clinical->columns.event_map.empty()) c["event_map"] = d.clinical->columns.event_map;
        if (d.clinical->columns.delimiter)
            c["delimiter"] = d.clinical->columns.delimiter == '\t' ? std::string("\\t")
                                                                   : std::string(1, d.clinical->columns.delimiter);
        out["clinical"] = c;
    }
    return out;
}

json to_json(const ContrastSpec& c) {
    json out;
    out["treated"] = selector_json(c.treated);
    out["control"] = selector_json(c.control);
    out["pairing_key"] = c.pairing_key;
    if (!c.groups.empty()) out["groups"] = c.groups;
    return out;
}

json to_json(const ClaimConfig& c) {
    json out;
    out["id"] = c.id;
    out["kind"] = std::string(to_string(c.kind));
    out["dataset"] = c.dataset;
    switch (c.kind) {
        case ClaimKind::crossgroup_correlation:
            out["contrast"] = c.contrast;
            out["score_set"] = c.score_set;
            out["response_set"] = c.response_set;
            out["method"] = std::string(to_string(c.method));
            break;
        case ClaimKind::regulator_correlation: {
            out["contrast"] = c.contrast;
            json cands = json::array();
            for (const auto& cand : c.candidates)
                cands.push_back({{"gene", cand.gene}, {"module", std::string(to_string(cand.module))}});
            out["candidates"] = cands;
            out["modules"] = {{"top_k", c.top_k}, {"clusters", c.clusters}};
            out["method"] = std::string(to_string(c.method));
            break;
        }
        case ClaimKind::survival_signature:
            out["signature"] = c.signature;
            break;
    }
    out["metrics"] = c.metrics;
    out["null"] = {{"n_iterations", c.null.n_iterations},
                   {"seed", c.null.seed},
                   {"exclusions", c.null.exclusions},
                   {"exclude_claim_genes", c.null.exclude_claim_genes}};
    out["alpha"] = c.alpha;
    out["allow_missing_genes"] = c.allow_missing_genes;
    out["p_value"] = c.p_value == PValueMode::plain ? "plain" : "smoothed";
    return out;
}

json to_json(const AuditConfig& config) {
    json out;
    out["datasets"] = json::object();
    for (const auto& [name, d] : config.datasets) out["datasets"][name] = to_json(d);
    out["gene_sets"] = json::object();
    for (const auto& [name, genes] : config.gene_sets) out["gene_sets"][name] = genes;
    out["contrasts"] = json::object();
    for (const auto& [name, c] : config.contrasts) out["contrasts"][name] = to_json(c);
    out["claims"] = json::array();
    for (const auto& c : config.claims) out["claims"].push_back(to_json(c));
    out["settings"] = {{"max_resamples_per_draw", config.settings.max_resamples_per_draw}};
    return out;
}

AuditConfig restrict_to_claim(const AuditConfig& config, const ClaimConfig& claim) {
    AuditConfig out;
    out.settings = config.settings;
    out.datasets.emplace(claim.dataset, config.datasets.at(claim.dataset));
    for (const auto& name : {claim.score_set, claim.response_set, claim.signature}) {
        if (!name.empty()) out.gene_sets.emplace(name, config.gene_sets.at(name));
    }
    if (!claim.contrast.empty()) out.contrasts.emplace(claim.contrast, config.contrasts.at(claim.contrast));
    out.claims.push_back(claim);
    return out;
}

}  // namespace nullaudit
