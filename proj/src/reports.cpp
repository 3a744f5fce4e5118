#include "osb/reports.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "osb/errors.hpp"
#include "osb/version.hpp"

namespace osb {

namespace {

using nlohmann::json;

json parse_doc(const std::string& text, const char* type) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("report: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("schema_version") ||
        !doc["schema_version"].is_number_integer())
        throw ParseError("report: missing schema_version");
    if (doc["schema_version"].get<int>() != kSchemaVersion)
        throw SchemaError("report: unsupported schema_version " +
                          doc["schema_version"].dump());
    if (!doc.contains("type") || doc["type"] != type)
        throw SchemaError(std::string("report: expected type ") + type);
    if (!doc.contains("body") || !doc["body"].is_object())
        throw ParseError("report: missing body");
    return doc;
}

std::string emit_doc(const char* type, json body, const ReportMeta& meta) {
    json config;
    try {
        config = json::parse(meta.config_json);
    } catch (const json::exception& e) {
        throw ParseError(std::string("report config: ") + e.what());
    }
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    doc["note"] = kAnchorCountNote;
    doc["config"] = std::move(config);
    doc["type"] = type;
    doc["body"] = std::move(body);
    return doc.dump(2) + "\n";
}

Kind parse_kind(const json& v) {
    if (v == "box") return Kind::box;
    if (v == "mask") return Kind::mask;
    throw ParseError("report: kind must be box or mask, got " + v.dump());
}

double require_num(const json& o, const char* field) {
    if (!o.contains(field) || !o[field].is_number())
        throw ParseError(std::string("report: missing number ") + field);
    return o[field].get<double>();
}

int require_int(const json& o, const char* field) {
    if (!o.contains(field) || !o[field].is_number_integer())
        throw ParseError(std::string("report: missing integer ") + field);
    return o[field].get<int>();
}

std::vector<double> num_list(const json& o, const char* field) {
    if (!o.contains(field) || !o[field].is_array())
        throw ParseError(std::string("report: missing list ") + field);
    std::vector<double> out;
    for (const auto& v : o[field]) {
        if (!v.is_number()) throw ParseError(std::string("report: ") + field + " holds a non-number");
        out.push_back(v.get<double>());
    }
    return out;
}

std::vector<int> int_list(const json& o, const char* field) {
    if (!o.contains(field) || !o[field].is_array())
        throw ParseError(std::string("report: missing list ") + field);
    std::vector<int> out;
    for (const auto& v : o[field]) {
        if (!v.is_number_integer())
            throw ParseError(std::string("report: ") + field + " holds a non-integer");
        out.push_back(v.get<int>());
    }
    return out;
}

std::string fmt(double v) { return json(v).dump(); }

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

// White for 0, saturated fill for 100, grey for absent.
std::string heat_color(double v) {
    if (v < 0) return "#d0d0d0";
    const int shade = std::clamp(static_cast<int>(std::lround(v * 2.0)), 0, 200);
    std::ostringstream c;
    c << "rgb(" << (255 - shade) << "," << (255 - shade / 2) << ",255)";
    return c.str();
}

}  // namespace

std::string emit_metrics(const MetricsReport& r, const ReportMeta& meta) {
    json m;
    m["AP"] = r.ap;
    m["AP50"] = r.ap50;
    m["AP75"] = r.ap75;
    m["APS"] = r.ap_s;
    m["APM"] = r.ap_m;
    m["APL"] = r.ap_l;
    m["AR1"] = r.ar_1;
    m["AR10"] = r.ar_10;
    m["AR100"] = r.ar_100;
    m["ARS"] = r.ar_s;
    m["ARM"] = r.ar_m;
    m["ARL"] = r.ar_l;
    json per_cat = json::array();
    for (const auto& [id, v] : r.per_category_ap50) per_cat.push_back({id, v});
    json body;
    body["kind"] = kind_name(r.kind);
    body["episodes"] = r.episode_count;
    body["metrics"] = std::move(m);
    body["per_category_ap50"] = std::move(per_cat);
    return emit_doc("metrics", std::move(body), meta);
}

MetricsReport parse_metrics(const std::string& text) {
    const json doc = parse_doc(text, "metrics");
    const json& body = doc["body"];
    if (!body.contains("kind") || !body.contains("metrics") ||
        !body["metrics"].is_object())
        throw ParseError("report: metrics body malformed");
    const json& m = body["metrics"];

    MetricsReport r;
    r.kind = parse_kind(body["kind"]);
    r.episode_count = require_int(body, "episodes");
    r.ap = require_num(m, "AP");
    r.ap50 = require_num(m, "AP50");
    r.ap75 = require_num(m, "AP75");
    r.ap_s = require_num(m, "APS");
    r.ap_m = require_num(m, "APM");
    r.ap_l = require_num(m, "APL");
    r.ar_1 = require_num(m, "AR1");
    r.ar_10 = require_num(m, "AR10");
    r.ar_100 = require_num(m, "AR100");
    r.ar_s = require_num(m, "ARS");
    r.ar_m = require_num(m, "ARM");
    r.ar_l = require_num(m, "ARL");
    if (!body.contains("per_category_ap50") || !body["per_category_ap50"].is_array())
        throw ParseError("report: missing per_category_ap50");
    for (const auto& e : body["per_category_ap50"]) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
            !e[1].is_number())
            throw ParseError("report: per_category_ap50 entries must be [id, value]");
        r.per_category_ap50.emplace_back(e[0].get<int>(), e[1].get<double>());
    }
    return r;
}

std::string emit_aggregate(const AggregateReport& r, const ReportMeta& meta) {
    json body;
    body["splits"] = r.split_indices;
    body["split_mean"] = r.split_mean;
    body["split_ci"] = r.split_ci;
    body["grand_mean"] = r.grand_mean;
    body["grand_ci"] = r.grand_ci;
    return emit_doc("aggregate", std::move(body), meta);
}

AggregateReport parse_aggregate(const std::string& text) {
    const json doc = parse_doc(text, "aggregate");
    const json& body = doc["body"];
    AggregateReport r;
    r.split_indices = int_list(body, "splits");
    r.split_mean = num_list(body, "split_mean");
    r.split_ci = num_list(body, "split_ci");
    r.grand_mean = require_num(body, "grand_mean");
    r.grand_ci = require_num(body, "grand_ci");
    if (r.split_mean.size() != r.split_indices.size() ||
        r.split_ci.size() != r.split_indices.size())
        throw ParseError("report: aggregate lists disagree in length");
    return r;
}

std::string emit_confusion(const ConfusionMatrix& r, const ReportMeta& meta) {
    json rows = json::array();
    for (const auto& row : r.ap50) rows.push_back(row);
    json body;
    body["category_ids"] = r.category_ids;
    body["ap50"] = std::move(rows);
    body["column_sum"] = r.column_sum;
    return emit_doc("confusion", std::move(body), meta);
}

ConfusionMatrix parse_confusion(const std::string& text) {
    const json doc = parse_doc(text, "confusion");
    const json& body = doc["body"];
    ConfusionMatrix r;
    r.category_ids = int_list(body, "category_ids");
    if (!body.contains("ap50") || !body["ap50"].is_array() ||
        body["ap50"].size() != r.category_ids.size())
        throw ParseError("report: confusion ap50 must be square");
    for (const auto& row : body["ap50"]) {
        if (!row.is_array() || row.size() != r.category_ids.size())
            throw ParseError("report: confusion ap50 must be square");
        std::vector<double> vals;
        for (const auto& v : row) {
            if (!v.is_number()) throw ParseError("report: confusion cell not a number");
            vals.push_back(v.get<double>());
        }
        r.ap50.push_back(std::move(vals));
    }
    r.column_sum = num_list(body, "column_sum");
    if (r.column_sum.size() != r.category_ids.size())
        throw ParseError("report: confusion column_sum length mismatch");
    return r;
}

std::string emit_clutter(const ClutterReport& r, const ReportMeta& meta) {
    json bins = json::array();
    for (const ClutterBin& b : r.bins)
        bins.push_back({{"lo", b.lo},
                        {"hi", b.hi},
                        {"images", b.images},
                        {"episodes", b.episodes},
                        {"map50", b.map50}});
    json body;
    body["kind"] = kind_name(r.kind);
    body["edges"] = r.edges;
    body["bins"] = std::move(bins);
    return emit_doc("clutter", std::move(body), meta);
}

ClutterReport parse_clutter(const std::string& text) {
    const json doc = parse_doc(text, "clutter");
    const json& body = doc["body"];
    ClutterReport r;
    if (!body.contains("kind")) throw ParseError("report: clutter body lacks kind");
    r.kind = parse_kind(body["kind"]);
    r.edges = int_list(body, "edges");
    if (!body.contains("bins") || !body["bins"].is_array())
        throw ParseError("report: clutter body lacks bins");
    for (const auto& jb : body["bins"]) {
        ClutterBin b;
        b.lo = require_int(jb, "lo");
        b.hi = require_int(jb, "hi");
        b.images = require_int(jb, "images");
        b.episodes = require_int(jb, "episodes");
        b.map50 = require_num(jb, "map50");
        r.bins.push_back(b);
    }
    return r;
}

std::string report_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("report: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("config"))
        throw ParseError("report: missing config");
    return doc["config"].dump();
}

std::string metrics_csv(const std::vector<CsvRow>& rows) {
    std::string out =
        "kind,split,run,AP,AP50,AP75,APS,APM,APL,AR1,AR10,AR100,ARS,ARM,ARL\n";
    for (const CsvRow& r : rows) {
        const MetricsReport& m = r.metrics;
        out += r.kind + ',' + std::to_string(r.split) + ',' + std::to_string(r.run);
        for (double v : {m.ap, m.ap50, m.ap75, m.ap_s, m.ap_m, m.ap_l, m.ar_1,
                         m.ar_10, m.ar_100, m.ar_s, m.ar_m, m.ar_l})
            out += ',' + fmt(v);
        out += '\n';
    }
    return out;
}

std::string confusion_svg(const ConfusionMatrix& cm,
                          const std::vector<std::string>& labels) {
    if (labels.size() != cm.category_ids.size())
        throw std::invalid_argument("confusion_svg: one label per category required");
    const int n = static_cast<int>(cm.category_ids.size());
    const int cell = 14, left = 150, top = 24;
    const int width = left + n * cell + 10;
    const int height = top + n * cell + 10;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"9\">\n";
    svg << "<text x=\"" << left << "\" y=\"14\">reference category (rows) vs "
           "scored category (columns), AP50</text>\n";
    for (int i = 0; i < n; ++i) {
        svg << "<text x=\"4\" y=\"" << (top + i * cell + cell - 4) << "\">"
            << xml_escape(labels[static_cast<std::size_t>(i)]) << "</text>\n";
        for (int j = 0; j < n; ++j) {
            const double v = cm.ap50[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            svg << "<rect x=\"" << (left + j * cell) << "\" y=\"" << (top + i * cell)
                << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
                << heat_color(v) << "\" stroke=\"#ffffff\"><title>"
                << xml_escape(labels[static_cast<std::size_t>(i)]) << " / "
                << xml_escape(labels[static_cast<std::size_t>(j)]) << ": "
                << (v < 0 ? std::string("n/a") : fmt(v)) << "</title></rect>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string clutter_svg(const ClutterReport& rep) {
    const int n = static_cast<int>(rep.bins.size());
    const int bar = 60, gap = 20, left = 40, top = 20, plot_h = 200;
    const int width = left + n * (bar + gap) + 10;
    const int height = top + plot_h + 50;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    svg << "<text x=\"" << left << "\" y=\"14\">mAP50 ("
        << kind_name(rep.kind) << ") by instances per image</text>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << (top + plot_h) << "\" x2=\""
        << (width - 10) << "\" y2=\"" << (top + plot_h)
        << "\" stroke=\"#000000\"/>\n";
    for (int i = 0; i < n; ++i) {
        const ClutterBin& b = rep.bins[static_cast<std::size_t>(i)];
        const int x = left + i * (bar + gap);
        const double v = std::max(b.map50, 0.0);
        const int h = static_cast<int>(std::lround(v / 100.0 * plot_h));
        svg << "<rect x=\"" << x << "\" y=\"" << (top + plot_h - h) << "\" width=\""
            << bar << "\" height=\"" << h << "\" fill=\""
            << (b.map50 < 0 ? "#d0d0d0" : "#4878a8") << "\"/>\n";
        svg << "<text x=\"" << x << "\" y=\"" << (top + plot_h - h - 4) << "\">"
            << (b.map50 < 0 ? std::string("n/a") : fmt(b.map50)) << "</text>\n";
        const std::string range =
            b.hi < 0 ? std::to_string(b.lo) + "+"
                     : std::to_string(b.lo) + "-" + std::to_string(b.hi);
        svg << "<text x=\"" << x << "\" y=\"" << (top + plot_h + 14) << "\">" << range
            << "</text>\n";
        svg << "<text x=\"" << x << "\" y=\"" << (top + plot_h + 28) << "\">"
            << b.episodes << " ep</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace osb
