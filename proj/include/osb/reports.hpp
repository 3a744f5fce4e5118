#pragma once

#include <string>
#include <vector>

#include "osb/evaluation.hpp"

namespace osb {

// Anchor accounting note embedded in every report header. The per-location
// contract yields (256^2 + 128^2 + 64^2 + 32^2 + 16^2) * 3 = 261,888 anchors
// for a 1024x1024 frame; descriptions quoting roughly one million anchors
// count all five scales at every pyramid level, which would give 1,309,440.
inline constexpr const char* kAnchorCountNote =
    "anchor grid: 261888 anchors at 1024x1024 (one scale per pyramid level, "
    "3 aspect ratios); quoting ~1M assumes all 5 scales at every level "
    "(1309440)";

// Header block shared by all report documents. `config_json` is embedded
// verbatim so a report carries the exact run configuration that produced it.
struct ReportMeta {
    std::string config_json = "{}";

    bool operator==(const ReportMeta&) const = default;
};

// Each emit produces a standalone JSON document:
//   {"schema_version":1, "tool":{...}, "note":..., "config":{...},
//    "type":..., "body":{...}}
// and parse(emit(r)) == r for the body. Parsers raise SchemaError on a
// version or type mismatch and ParseError on malformed content.
std::string emit_metrics(const MetricsReport& r, const ReportMeta& meta = {});
MetricsReport parse_metrics(const std::string& text);

std::string emit_aggregate(const AggregateReport& r, const ReportMeta& meta = {});
AggregateReport parse_aggregate(const std::string& text);

std::string emit_confusion(const ConfusionMatrix& r, const ReportMeta& meta = {});
ConfusionMatrix parse_confusion(const std::string& text);

std::string emit_clutter(const ClutterReport& r, const ReportMeta& meta = {});
ClutterReport parse_clutter(const std::string& text);

// Returns the embedded config document of any report emitted above.
std::string report_config(const std::string& text);

// One metrics row per (kind, split, run), preceded by the fixed header
// "kind,split,run,AP,AP50,AP75,APS,APM,APL,AR1,AR10,AR100,ARS,ARM,ARL".
struct CsvRow {
    std::string kind;
    int split = 0;
    int run = 0;
    MetricsReport metrics;
};
std::string metrics_csv(const std::vector<CsvRow>& rows);

// Static SVG figures: no scripting, fixed layout, deterministic markup.
std::string confusion_svg(const ConfusionMatrix& cm,
                          const std::vector<std::string>& labels);
std::string clutter_svg(const ClutterReport& rep);

}  // namespace osb
