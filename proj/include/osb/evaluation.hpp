#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "osb/coco.hpp"
#include "osb/episodes.hpp"
#include "osb/geometry.hpp"
#include "osb/mask.hpp"

namespace osb {

enum class Kind { box, mask };

const char* kind_name(Kind k);

struct PredDetection {
    std::array<double, 4> bbox{};  // x, y, w, h
    double score = 0.0;
    std::optional<RleMask> mask;

    bool operator==(const PredDetection&) const = default;
};

struct PredictionRecord {
    std::string episode_id;
    std::vector<PredDetection> detections;

    bool operator==(const PredictionRecord&) const = default;
};

// All metric fields are percentages in [0,100]; -1 marks "no ground truth
// in range". Per-category entries are (category id, AP50 percent or -1).
struct MetricsReport {
    Kind kind = Kind::box;
    double ap = -1, ap50 = -1, ap75 = -1;
    double ap_s = -1, ap_m = -1, ap_l = -1;
    double ar_1 = -1, ar_10 = -1, ar_100 = -1;
    double ar_s = -1, ar_m = -1, ar_l = -1;
    std::vector<std::pair<int, double>> per_category_ap50;
    int episode_count = 0;

    bool operator==(const MetricsReport&) const = default;
};

struct ScoredBox {
    Box box;
    double score = 0.0;
};

// Greedy matching for one (image, category) unit, box kind, whole area range.
// Output rows follow score-descending order (stable on ties) after max_dets
// truncation; `order` maps each row to its input index.
struct MatchOutcome {
    std::vector<int> order;
    std::vector<int> det_matched_gt;  // index into gts, -1 when unmatched
    std::vector<bool> det_ignored;    // matched a crowd region
    std::vector<bool> gt_matched;
};

// A detection takes the yet-unmatched gt of highest IoU >= iou_thr; ties go
// to the later gt. Crowd regions (IoU computed over the detection's own
// area) never block each other, match repeatedly, and are only taken when no
// plain gt qualifies; such detections count neither TP nor FP.
MatchOutcome match_detections(const std::vector<ScoredBox>& dets,
                              const std::vector<Box>& gts,
                              const std::vector<Box>& crowd_gts,
                              double iou_thr, int max_dets);

// Average precision of one cumulative TP/FP sequence (detections already in
// global score order) against n_gt instances: precision envelope, sampled at
// the 101 recall thresholds {0.00, 0.01, ..., 1.00}. Returns -1 when
// n_gt == 0. `flags` holds +1 TP, 0 FP, -1 ignored.
double average_precision(const std::vector<int>& flags, int n_gt);

// Episodic, category-subset-restricted COCO-style metrics.
//
// Units are episodes: detections of episode (run, image, category) are
// scored against that image's ground truth of that category. AP averages
// IoU thresholds {0.50, 0.55, ..., 0.95}; size bins use the annotation
// `area` field with inclusive ranges [0,32^2], [32^2,96^2], [96^2,1e10];
// AP uses up to 100 detections per unit, AR_n the top n. Category means
// cover subset categories with ground truth present in range (-1 otherwise).
// With threads > 1 the per-unit matching runs concurrently; the reduction
// order is fixed, so results equal the serial run bit for bit.
MetricsReport evaluate(const std::vector<PredictionRecord>& predictions,
                       const std::vector<Episode>& episodes,
                       const Dataset& dataset,
                       const std::vector<int>& category_subset, Kind kind,
                       int threads = 1);

struct AggregateReport {
    std::vector<int> split_indices;
    std::vector<double> split_mean;
    std::vector<double> split_ci;  // 1.96 * sample sd / sqrt(runs)
    double grand_mean = -1;
    // CI over per-run grand means; -1 when splits have unequal run counts.
    double grand_ci = -1;

    bool operator==(const AggregateReport&) const = default;
};

// values[s][r] = metric of split s, run r. Runs with a single entry get a
// zero half-width. split_indices labels the rows (defaults to 1..n).
AggregateReport aggregate(const std::vector<std::vector<double>>& values,
                          std::vector<int> split_indices = {});

struct ConfusionMatrix {
    std::vector<int> category_ids;          // ascending dataset ids
    std::vector<std::vector<double>> ap50;  // [i][j], percent or -1
    std::vector<double> column_sum;         // absent entries contribute 0

    bool operator==(const ConfusionMatrix&) const = default;
};

// Entry (i,j): detections of reference category i, relabeled and scored
// against category-j ground truth on the same query images, AP50. Rows
// without episodes stay absent.
ConfusionMatrix confusion_matrix(const std::vector<PredictionRecord>& predictions,
                                 const std::vector<Episode>& episodes,
                                 const Dataset& dataset, Kind kind,
                                 int threads = 1);

struct ClutterBin {
    int lo = 1;
    int hi = -1;  // -1 = unbounded
    int images = 0;
    int episodes = 0;
    double map50 = -1;

    bool operator==(const ClutterBin&) const = default;
};

struct ClutterReport {
    Kind kind = Kind::box;
    std::vector<int> edges;
    std::vector<ClutterBin> bins;

    bool operator==(const ClutterReport&) const = default;
};

inline const std::vector<int> kDefaultClutterEdges = {1, 5, 9, 17, 33};

// Buckets query images by their total non-crowd annotation count (all
// categories), then reports mAP50 per bucket. Edges must rise strictly;
// edge list {a,b,...} makes bins [a,b-1], [b,...], last unbounded.
ClutterReport clutter_report(const std::vector<PredictionRecord>& predictions,
                             const std::vector<Episode>& episodes,
                             const Dataset& dataset, Kind kind,
                             const std::vector<int>& bin_edges = kDefaultClutterEdges,
                             int threads = 1);

struct BaselineResult {
    std::vector<PredictionRecord> records;  // one per episode, same order
    int forced_origin = 0;  // gt boxes too large to shift, pinned at origin
};

// Per episode: every non-crowd instance of the reference category is copied,
// translated by an integer offset drawn uniformly over all placements that
// keep the box inside the image, scored Uniform(0.8, 1), with the mask
// shifted rigidly along. Draws come from a stream keyed on
// (seed, run, image_id, category_id), so the result does not depend on the
// thread count.
BaselineResult random_baseline(const Dataset& dataset,
                               const std::vector<Episode>& episodes,
                               std::uint64_t seed, int threads = 1);

}  // namespace osb
