#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "osb/episodes.hpp"
#include "osb/evaluation.hpp"
#include "osb/pipeline.hpp"
#include "osb/reports.hpp"

namespace osb {

// Everything a command run depends on. Serialized into each report so the
// output states the configuration that produced it. split == 0 means all
// four splits; per-split files then carry an _s<i> suffix.
struct RunConfig {
    std::string annotations;
    int split = 1;
    Partition partition = Partition::test;
    int shots = 1;
    int runs = 1;
    std::uint64_t seed = 0;
    bool exclude_same_image = false;
    std::array<float, 3> mean_rgb = kDefaultMeanRgb;
    PipelineConfig pipeline;
    std::vector<int> bins = kDefaultClutterEdges;
    std::string kind = "both";  // box | mask | both
    int threads = 1;

    std::string episodes_path;
    std::string predictions_path;
    std::string weights_path;
    std::string activations_dir;
    std::string out_dir;
};

std::string config_json(const RunConfig& cfg);

// "file.jsonl" -> "file_s3.jsonl"; used when one invocation covers all splits.
std::string split_path(const std::string& path, int split);

// The kinds an invocation evaluates, in fixed order (box before mask).
std::vector<Kind> kinds_of(const RunConfig& cfg);

// Splits named by cfg.split: {i} or {1,2,3,4}.
std::vector<int> splits_of(const RunConfig& cfg);

// Human-readable split listing: test categories with canonical positions.
std::string cmd_splits(int split = 0);

// Episode sampling to episodes_path (per split).
void cmd_episodes(const RunConfig& cfg);

// Ground-truth-shift baseline: writes episodes_path and predictions_path
// (per split). Returns the total forced-origin count.
int cmd_baseline(const RunConfig& cfg);

struct EvalKindOutcome {
    Kind kind = Kind::box;
    std::vector<std::vector<MetricsReport>> per_run;  // [split][run]
    std::vector<MetricsReport> pooled;                // [split], runs together
    AggregateReport ap50;                             // runs-by-split AP50
};

struct EvalOutcome {
    std::vector<int> splits;
    std::vector<std::vector<int>> runs;  // [split], ascending run labels
    std::vector<EvalKindOutcome> kinds;
};

// Evaluates predictions against episodes for every requested split and kind.
EvalOutcome run_eval(const Dataset& dataset, const RunConfig& cfg);

// run_eval plus report files under out_dir: metrics.csv with one row per
// (kind, split, run), metrics_s<i>_<kind>.json with all runs of a split
// evaluated together, aggregate_<kind>.json over per-run AP50.
EvalOutcome cmd_eval(const RunConfig& cfg);

// Category-by-category AP50 matrix for one split; JSON + SVG heatmap.
std::vector<ConfusionMatrix> cmd_confusion(const RunConfig& cfg);

// Per-clutter-bin mAP50 table for one split; JSON + SVG bars.
std::vector<ClutterReport> cmd_clutter(const RunConfig& cfg);

// Runs detection from stored backbone activations over the episodes file and
// writes predictions_path. Returns the number of episodes processed.
int cmd_infer(const RunConfig& cfg);

}  // namespace osb
