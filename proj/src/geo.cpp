#include "nullaudit/geo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <regex>
#include <set>
#include <sstream>

#include <httplib.h>

#include "nullaudit/error.hpp"
#include "nullaudit/text_table.hpp"

namespace nullaudit {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string line_ref(std::size_t line_no) { return "line " + std::to_string(line_no); }

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.substr(0, prefix.size()) == prefix;
}

std::vector<std::string> unquoted_fields(std::string_view line) {
    auto fields = split_delimited(line, '\t');
    for (auto& f : fields) f = std::string(trim(f));
    return fields;
}

std::string quote(std::string_view s) { return "\"" + std::string(s) + "\""; }

}  // namespace

std::vector<std::string> SeriesMatrixDocument::series_values(std::string_view key) const {
    for (const auto& line : series_metadata) {
        if (line.key == key) return line.values;
    }
    return {};
}

std::vector<const MetadataLine*> SeriesMatrixDocument::sample_lines(std::string_view key) const {
    std::vector<const MetadataLine*> out;
    for (const auto& line : sample_metadata) {
        if (line.key == key) out.push_back(&line);
    }
    return out;
}

bool same_document(const SeriesMatrixDocument& a, const SeriesMatrixDocument& b) {
    if (a.series_metadata != b.series_metadata || a.sample_metadata != b.sample_metadata ||
        a.probe_ids != b.probe_ids || a.sample_ids != b.sample_ids || a.values.size() != b.values.size())
        return false;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const bool ma = std::isnan(a.values[i]);
        const bool mb = std::isnan(b.values[i]);
        if (ma != mb || (!ma && a.values[i] != b.values[i])) return false;
    }
    return true;
}

SeriesMatrixDocument parse_series_matrix(std::istream& in) {
    SeriesMatrixDocument doc;
    enum class State { header, table_header, table, after_table } state = State::header;
    std::set<std::string> probes;
    std::string line;
    std::size_t line_no = 0;
    bool saw_begin = false, saw_end = false;

    while (read_line(in, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (state == State::header) {
            if (view.empty()) continue;
            if (view == "!series_matrix_table_begin") {
                saw_begin = true;
                state = State::table_header;
                continue;
            }
            if (view == "!series_matrix_table_end") throw DataError("MissingTableDelimiters",
                                                                    "table end before begin at " + line_ref(line_no));
            auto fields = unquoted_fields(line);
            const std::string_view tag = fields.front();
            MetadataLine meta;
            meta.values.assign(fields.begin() + 1, fields.end());
            if (starts_with(tag, "!Series_") && tag.size() > 8) {
                meta.key = std::string(tag.substr(8));
                doc.series_metadata.push_back(std::move(meta));
            } else if (starts_with(tag, "!Sample_") && tag.size() > 8) {
                meta.key = std::string(tag.substr(8));
                doc.sample_metadata.push_back(std::move(meta));
            } else {
                throw DataError("MalformedLine", line_ref(line_no) + ": expected !Series_ or !Sample_ metadata");
            }
        } else if (state == State::table_header) {
            if (view.empty()) continue;
            if (view == "!series_matrix_table_end")
                throw DataError("MalformedLine", line_ref(line_no) + ": data table has no header row");
            auto fields = unquoted_fields(line);
            if (fields.size() < 2 || fields.front().empty() || fields.front()[0] == '!')
                throw DataError("MalformedLine", line_ref(line_no) + ": bad data table header");
            doc.sample_ids.assign(fields.begin() + 1, fields.end());
            std::set<std::string> unique(doc.sample_ids.begin(), doc.sample_ids.end());
            if (unique.size() != doc.sample_ids.size())
                throw DataError("MalformedLine", line_ref(line_no) + ": duplicate sample id in header");
            state = State::table;
        } else if (state == State::table) {
            if (view.empty()) continue;
            if (view == "!series_matrix_table_end") {
                saw_end = true;
                state = State::after_table;
                continue;
            }
            auto fields = unquoted_fields(line);
            if (fields.size() != doc.sample_ids.size() + 1)
                throw DataError("RaggedRow", line_ref(line_no) + ": " + std::to_string(fields.size() - 1) +
                                                 " values for " + std::to_string(doc.sample_ids.size()) +
                                                 " samples");
            if (fields.front().empty())
                throw DataError("MalformedLine", line_ref(line_no) + ": empty probe id");
            if (!probes.insert(fields.front()).second)
                throw DataError("DuplicateProbe", line_ref(line_no) + ": probe " + fields.front() + " repeats");
            doc.probe_ids.push_back(fields.front());
            for (std::size_t j = 1; j < fields.size(); ++j) {
                if (is_missing_token(fields[j])) {
                    doc.values.push_back(kMissing);
                    continue;
                }
                auto v = parse_real(fields[j]);
                if (!v || !std::isfinite(*v))
                    throw DataError("MalformedLine", line_ref(line_no) + ": '" + fields[j] + "' is not a number");
                doc.values.push_back(*v);
            }
        } else {
            if (!view.empty())
                throw DataError("MalformedLine", line_ref(line_no) + ": content after table end");
        }
    }
    if (!saw_begin || !saw_end)
        throw DataError("MissingTableDelimiters",
                        std::string("missing !series_matrix_table_") + (saw_begin ? "end" : "begin"));
    return doc;
}

void write_series_matrix(std::ostream& out, const SeriesMatrixDocument& doc) {
    auto write_meta = [&out](std::string_view prefix, const MetadataLine& m) {
        out << prefix << m.key;
        for (const auto& v : m.values) out << '\t' << quote(v);
        out << '\n';
    };
    for (const auto& m : doc.series_metadata) write_meta("!Series_", m);
    for (const auto& m : doc.sample_metadata) write_meta("!Sample_", m);
    out << "!series_matrix_table_begin\n" << quote("ID_REF");
    for (const auto& s : doc.sample_ids) out << '\t' << quote(s);
    out << '\n';
    for (std::size_t i = 0; i < doc.probe_ids.size(); ++i) {
        out << quote(doc.probe_ids[i]);
        for (std::size_t j = 0; j < doc.sample_ids.size(); ++j) {
            const double v = doc.at(i, j);
            out << '\t' << (std::isnan(v) ? std::string("null") : format_real(v));
        }
        out << '\n';
    }
    out << "!series_matrix_table_end\n";
}

PlatformAnnotation parse_platform_annotation(std::istream& in, std::string_view probe_column,
                                             std::string_view symbol_column) {
    PlatformAnnotation ann;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    char delimiter = '\t';
    std::size_t probe_col = 0, symbol_col = 1;
    while (read_line(in, line)) {
        ++line_no;
        if (trim(line).empty() || line[0] == '#' || line[0] == '!' || line[0] == '^') continue;
        if (header.empty()) {
            delimiter = sniff_delimiter(line);
            header = split_delimited(line, delimiter);
            for (auto& h : header) h = std::string(trim(h));
            auto find = [&](std::string_view name, std::size_t fallback) {
                if (name.empty()) return fallback;
                auto it = std::find(header.begin(), header.end(), name);
                if (it == header.end())
                    throw DataError("MissingColumn", "platform annotation has no column '" + std::string(name) + "'");
                return static_cast<std::size_t>(it - header.begin());
            };
            probe_col = find(probe_column, 0);
            symbol_col = find(symbol_column, 1);
            if (header.size() < 2)
                throw DataError("MissingColumn", "platform annotation needs at least two columns");
            continue;
        }
        auto fields = split_delimited(line, delimiter);
        if (fields.size() <= probe_col)
            throw DataError("RaggedRow", "platform annotation " + line_ref(line_no));
        const std::string probe(trim(fields[probe_col]));
        const std::string symbol =
            fields.size() > symbol_col ? normalize_symbol(trim(fields[symbol_col])) : std::string();
        if (!ann.symbol_of_probe.emplace(probe, symbol).second)
            throw DataError("DuplicateProbe", "platform annotation " + line_ref(line_no) + ": probe " + probe + " repeats");
    }
    if (header.empty()) throw DataError("MissingColumn", "platform annotation has no header");
    return ann;
}

std::string_view to_string(CollapsePolicy policy) noexcept {
    return policy == CollapsePolicy::max_mean_probe ? "max_mean_probe" : "mean_of_probes";
}

CollapsePolicy parse_collapse_policy(std::string_view name) {
    if (name == "max_mean_probe") return CollapsePolicy::max_mean_probe;
    if (name == "mean_of_probes") return CollapsePolicy::mean_of_probes;
    throw ConfigError("UnknownPolicy", "probe policy must be max_mean_probe or mean_of_probes, got '" +
                                           std::string(name) + "'");
}

ExpressionMatrix collapse_probes(const SeriesMatrixDocument& doc, const PlatformAnnotation* annotation,
                                 const CollapseOptions& options, CollapseReport* report) {
    CollapseReport local;
    CollapseReport& rep = report ? *report : local;
    rep = CollapseReport{};
    const std::size_t ns = doc.sample_ids.size();

    auto value = [&](std::size_t probe, std::size_t sample) {
        const double v = doc.at(probe, sample);
        if (options.already_log2 || std::isnan(v)) return v;
        if (!(v > -1.0))
            throw DataError("InvalidIntensity", "probe " + doc.probe_ids[probe] + " has value " +
                                                    format_real(v) + " (log2(x+1) undefined)");
        return std::log2(v + 1.0);
    };

    std::map<std::string, std::vector<std::size_t>> probes_of_gene;  // sorted by symbol
    rep.probes_total = doc.probe_ids.size();
    for (std::size_t p = 0; p < doc.probe_ids.size(); ++p) {
        std::string symbol;
        if (annotation) {
            auto it = annotation->symbol_of_probe.find(doc.probe_ids[p]);
            if (it != annotation->symbol_of_probe.end()) symbol = it->second;
        } else {
            symbol = normalize_symbol(doc.probe_ids[p]);
        }
        if (symbol.empty() || symbol == "---") {
            ++rep.probes_unannotated;
            continue;
        }
        if (symbol.find("///") != std::string::npos) {
            ++rep.probes_ambiguous;
            continue;
        }
        probes_of_gene[symbol].push_back(p);
    }
    if (probes_of_gene.empty())
        throw DataError("EmptyResult", "no probe maps to a gene symbol");

    std::vector<std::string> genes;
    std::vector<double> values;
    std::vector<double> row(ns);
    for (const auto& [symbol, probes] : probes_of_gene) {
        if (options.policy == CollapsePolicy::max_mean_probe) {
            std::size_t best = probes.front();
            double best_mean = -std::numeric_limits<double>::infinity();
            for (auto p : probes) {
                double sum = 0.0;
                std::size_t count = 0;
                for (std::size_t j = 0; j < ns; ++j) {
                    const double v = value(p, j);
                    if (!std::isnan(v)) {
                        sum += v;
                        ++count;
                    }
                }
                const double m = count ? sum / static_cast<double>(count)
                                       : -std::numeric_limits<double>::infinity();
                if (m > best_mean) {
                    best_mean = m;
                    best = p;
                }
            }
            for (std::size_t j = 0; j < ns; ++j) row[j] = value(best, j);
        } else {
            for (std::size_t j = 0; j < ns; ++j) {
                double sum = 0.0;
                for (auto p : probes) sum += value(p, j);  // NaN propagates
                row[j] = sum / static_cast<double>(probes.size());
            }
        }
        if (std::any_of(row.begin(), row.end(), [](double v) { return std::isnan(v); })) {
            ++rep.genes_with_missing;
            rep.dropped_genes.push_back(symbol);
            continue;
        }
        genes.push_back(symbol);
        values.insert(values.end(), row.begin(), row.end());
    }
    if (genes.empty()) throw DataError("EmptyResult", "every gene has missing values");
    return ExpressionMatrix::checked(std::move(genes), doc.sample_ids, std::move(values));
}

ClinicalTable parse_clinical_table(std::istream& in, const ClinicalColumns& columns) {
    ClinicalTable table;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    char delimiter = columns.delimiter;
    std::size_t subject_col = 0, time_col = 0, event_col = 0;
    std::set<std::string> subjects;

    while (read_line(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        if (header.empty()) {
            if (!delimiter) delimiter = sniff_delimiter(line);
            header = split_delimited(line, delimiter);
            for (auto& h : header) h = std::string(trim(h));
            auto find = [&](const std::string& name) {
                auto it = std::find(header.begin(), header.end(), name);
                if (name.empty() || it == header.end())
                    throw DataError("MissingColumn", "clinical table has no column '" + name + "'");
                return static_cast<std::size_t>(it - header.begin());
            };
            subject_col = find(columns.subject);
            time_col = find(columns.time);
            event_col = find(columns.event);
            continue;
        }
        auto fields = split_delimited(line, delimiter);
        if (fields.size() != header.size())
            throw DataError("RaggedRow", "clinical " + line_ref(line_no) + ": " +
                                             std::to_string(fields.size()) + " fields, header has " +
                                             std::to_string(header.size()));
        const auto time_cell = trim(fields[time_col]);
        const auto event_cell = trim(fields[event_col]);
        if (is_missing_token(time_cell) || is_missing_token(event_cell)) {
            ++table.dropped_incomplete;
            continue;
        }
        ClinicalRow row;
        row.subject_id = std::string(trim(fields[subject_col]));
        if (row.subject_id.empty())
            throw DataError("MalformedLine", "clinical " + line_ref(line_no) + ": empty subject id");
        auto time = parse_real(time_cell);
        if (!time || !std::isfinite(*time))
            throw DataError("MalformedLine", "clinical " + line_ref(line_no) + ": time '" +
                                                 std::string(time_cell) + "' is not a number");
        if (!(*time > 0.0))
            throw DataError("NonPositiveTime", "clinical " + line_ref(line_no) + ": time " +
                                                   std::string(time_cell));
        row.time = *time;

        if (auto it = columns.event_map.find(std::string(event_cell)); it != columns.event_map.end()) {
            row.event = it->second;
        } else {
            auto flag = parse_real(event_cell);
            if (!flag || (*flag != 0.0 && *flag != 1.0))
                throw DataError("BadEventFlag", "clinical " + line_ref(line_no) + ": event '" +
                                                    std::string(event_cell) + "'");
            row.event = static_cast<int>(*flag);
        }
        if (row.event != 0 && row.event != 1)
            throw DataError("BadEventFlag", "clinical " + line_ref(line_no) + ": event maps to " +
                                                std::to_string(row.event));
        if (!subjects.insert(row.subject_id).second)
            throw DataError("DuplicateSubject", "clinical " + line_ref(line_no) + ": subject " +
                                                    row.subject_id + " repeats");
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c != subject_col && c != time_col && c != event_col)
                row.covariates[header[c]] = std::string(trim(fields[c]));
        }
        table.rows.push_back(std::move(row));
    }
    if (header.empty()) throw DataError("MissingColumn", "clinical table has no header");
    return table;
}

ExpressionMatrix parse_expression_table(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> samples, genes;
    std::vector<double> values;
    char delimiter = '\t';
    while (read_line(in, line)) {
        ++line_no;
        if (trim(line).empty() || line[0] == '#') continue;
        if (samples.empty()) {
            delimiter = sniff_delimiter(line);
            auto fields = split_delimited(line, delimiter);
            if (fields.size() < 2)
                throw DataError("MalformedLine", "expression table header needs sample columns");
            for (std::size_t j = 1; j < fields.size(); ++j) samples.emplace_back(trim(fields[j]));
            continue;
        }
        auto fields = split_delimited(line, delimiter);
        if (fields.size() != samples.size() + 1)
            throw DataError("RaggedRow", "expression table " + line_ref(line_no));
        genes.push_back(normalize_symbol(trim(fields[0])));
        for (std::size_t j = 1; j < fields.size(); ++j) {
            auto v = parse_real(fields[j]);
            if (!v)
                throw DataError("MalformedLine", "expression table " + line_ref(line_no) + ": '" +
                                                     fields[j] + "' is not a number");
            values.push_back(*v);
        }
    }
    if (samples.empty()) throw DataError("MalformedLine", "expression table is empty");
    return ExpressionMatrix::checked(std::move(genes), std::move(samples), std::move(values));
}

void write_expression_table(std::ostream& out, const ExpressionMatrix& matrix) {
    out << "gene";
    for (const auto& s : matrix.sample_ids()) out << '\t' << s;
    out << '\n';
    for (std::size_t i = 0; i < matrix.n_genes(); ++i) {
        out << matrix.gene_ids()[i];
        for (std::size_t j = 0; j < matrix.n_samples(); ++j) out << '\t' << format_real(matrix.at(i, j));
        out << '\n';
    }
}

std::vector<SampleAnnotation> parse_sample_annotations(std::istream& in) {
    std::vector<SampleAnnotation> out;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    char delimiter = '\t';
    std::set<std::string> seen;
    while (read_line(in, line)) {
        ++line_no;
        if (trim(line).empty() || line[0] == '#') continue;
        if (header.empty()) {
            delimiter = sniff_delimiter(line);
            header = split_delimited(line, delimiter);
            for (auto& h : header) h = std::string(trim(h));
            for (const char* required : {"sample_id", "group_id"}) {
                if (std::find(header.begin(), header.end(), required) == header.end())
                    throw DataError("MissingColumn", std::string("annotation table has no column '") + required + "'");
            }
            continue;
        }
        auto fields = split_delimited(line, delimiter);
        if (fields.size() != header.size())
            throw DataError("RaggedRow", "annotation " + line_ref(line_no));
        SampleAnnotation a;
        for (std::size_t c = 0; c < header.size(); ++c) {
            const std::string cell(trim(fields[c]));
            const auto& name = header[c];
            if (name == "sample_id") {
                a.sample_id = cell;
            } else if (name == "group_id") {
                a.group_id = cell;
            } else if (name == "dose" || name == "time") {
                if (is_missing_token(cell)) continue;
                auto v = parse_real(cell);
                if (!v || *v < 0.0)
                    throw DataError("MalformedLine", "annotation " + line_ref(line_no) + ": " + name +
                                                         " '" + cell + "' must be a nonnegative number");
                (name == "dose" ? a.dose : a.timepoint) = *v;
            } else {
                a.extra[name] = cell;
            }
        }
        if (a.sample_id.empty())
            throw DataError("MalformedLine", "annotation " + line_ref(line_no) + ": empty sample_id");
        if (!seen.insert(a.sample_id).second)
            throw DataError("DuplicateSample", "annotation " + line_ref(line_no) + ": sample " + a.sample_id + " repeats");
        out.push_back(std::move(a));
    }
    if (header.empty()) throw DataError("MissingColumn", "annotation table has no header");
    return out;
}

void write_sample_sheet(std::ostream& out, const SeriesMatrixDocument& doc) {
    const std::size_t n = doc.sample_ids.size();
    auto single = [&](std::string_view key) {
        auto lines = doc.sample_lines(key);
        std::vector<std::string> values(n);
        if (!lines.empty()) {
            for (std::size_t j = 0; j < n && j < lines.front()->values.size(); ++j)
                values[j] = lines.front()->values[j];
        }
        return values;
    };
    const auto titles = single("title");
    const auto sources = single("source_name_ch1");

    std::vector<std::string> keys;
    std::vector<std::map<std::string, std::string>> characteristics(n);
    for (const auto* line : doc.sample_lines("characteristics_ch1")) {
        for (std::size_t j = 0; j < n && j < line->values.size(); ++j) {
            const auto& v = line->values[j];
            const auto colon = v.find(':');
            if (colon == std::string::npos) continue;
            std::string key(trim(std::string_view(v).substr(0, colon)));
            if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
            characteristics[j][key] = std::string(trim(std::string_view(v).substr(colon + 1)));
        }
    }
    auto clean = [](std::string s) {
        std::replace(s.begin(), s.end(), '\t', ' ');
        return s;
    };
    out << "sample_id\ttitle\tsource_name";
    for (const auto& k : keys) out << '\t' << clean(k);
    out << '\n';
    for (std::size_t j = 0; j < n; ++j) {
        out << doc.sample_ids[j] << '\t' << clean(titles[j]) << '\t' << clean(sources[j]);
        for (const auto& k : keys) {
            auto it = characteristics[j].find(k);
            out << '\t' << (it == characteristics[j].end() ? std::string() : clean(it->second));
        }
        out << '\n';
    }
}

std::string series_matrix_path(std::string_view accession) {
    static const std::regex pattern("GSE([0-9]+)");
    const std::string acc(accession);
    std::smatch m;
    if (!std::regex_match(acc, m, pattern))
        throw ConfigError("InvalidAccession", "accession '" + acc + "' does not match GSE<digits>");
    const std::string digits = m[1].str();
    const std::string stem = digits.size() > 3 ? digits.substr(0, digits.size() - 3) : std::string();
    return "/GSE" + stem + "nnn/" + acc + "/matrix/" + acc + "_series_matrix.txt.gz";
}

std::string fetch_series_matrix(std::string_view accession, const std::string& destination) {
    namespace fs = std::filesystem;
    const std::string remote_path = series_matrix_path(accession);
    const fs::path target = fs::path(destination) / fs::path(remote_path).filename();
    std::error_code ec;
    if (fs::exists(target, ec) && fs::is_regular_file(target, ec) && fs::file_size(target, ec) > 0)
        return target.string();

    std::string base(kGeoBaseUrl);
    if (const char* env = std::getenv(kGeoBaseUrlEnv); env && *env) base = env;
    while (!base.empty() && base.back() == '/') base.pop_back();
    static const std::regex url_pattern("(https?://[^/]+)(/.*)?");
    std::smatch m;
    if (!std::regex_match(base, m, url_pattern))
        throw ConfigError("InvalidUrl", "GEO base URL '" + base + "' is not an http(s) URL");
    const std::string host = m[1].str();
    const std::string path = m[2].str() + remote_path;

    httplib::Client client(host);
    client.set_follow_location(true);
    client.set_connection_timeout(30);
    client.set_read_timeout(300);
    auto response = client.Get(path);
    if (!response)
        throw IoError("NetworkError", "GET " + host + path + " failed: " + httplib::to_string(response.error()));
    if (response->status == 404)
        throw IoError("NotFound", std::string(accession) + " not found at " + host + path);
    if (response->status != 200)
        throw IoError("NetworkError", "GET " + host + path + " returned HTTP " + std::to_string(response->status));

    fs::create_directories(destination, ec);
    if (ec) throw IoError("OutputIOError", "cannot create " + destination + ": " + ec.message());
    const fs::path partial = target.string() + ".part";
    {
        std::ofstream out(partial, std::ios::binary);
        out.write(response->body.data(), static_cast<std::streamsize>(response->body.size()));
        if (!out) throw IoError("OutputIOError", "cannot write " + partial.string());
    }
    fs::rename(partial, target, ec);
    if (ec) throw IoError("OutputIOError", "cannot move download into " + target.string() + ": " + ec.message());
    return target.string();
}

}  // namespace nullaudit
