#include "osb/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "osb/errors.hpp"
#include "osb/rng.hpp"

namespace osb {

const char* kind_name(Kind k) {
    return k == Kind::box ? "box" : "mask";
}

namespace {

constexpr double kInfArea = 1e10;
// Inclusive area ranges: all, small, medium, large (32^2 and 96^2 bounds).
constexpr double kRanges[4][2] = {
    {0, kInfArea}, {0, 1024}, {1024, 9216}, {9216, kInfArea}};
constexpr int kThresholds = 10;
constexpr int kMaxDet = 100;

double thr_at(int i) {
    return (50 + 5 * i) / 100.0;
}

// Static chunking; results land in caller-indexed slots, so the outcome is
// identical to a serial loop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::future<void>> futures;
    for (std::size_t w = 0; w < workers; ++w)
        futures.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        }));
    for (auto& f : futures) f.get();
}

struct UnitGt {
    bool crowd = false;
    double area = 0;
    Box box;
    RleMask mask;
};

struct UnitDet {
    double score = 0;
    double area = 0;
    Box box;
    RleMask mask;
};

// Ground truth shared by all runs touching the same (image, category).
struct GtSet {
    std::vector<UnitGt> gts;  // annotation-id order
};

struct Unit {
    int run = 0;
    int image_id = 0;
    int gt_set = -1;
    std::vector<UnitDet> dets;  // score-descending, truncated to kMaxDet
};

struct UnitResult {
    std::array<int, 4> npig{};
    // [range][thr * nd + det]: +1 TP, 0 FP, -1 ignored
    std::array<std::vector<signed char>, 4> flags;
};

UnitResult compute_unit(const Unit& u, const GtSet& set, Kind kind) {
    const std::size_t nd = u.dets.size(), ng = set.gts.size();
    std::vector<double> iou(nd * ng);
    for (std::size_t d = 0; d < nd; ++d)
        for (std::size_t g = 0; g < ng; ++g) {
            const UnitGt& gt = set.gts[g];
            double v;
            if (kind == Kind::box)
                v = gt.crowd ? box_iou_crowd(u.dets[d].box, gt.box)
                             : box_iou(u.dets[d].box, gt.box);
            else
                v = gt.crowd ? mask_iou_crowd(u.dets[d].mask, gt.mask)
                             : mask_iou(u.dets[d].mask, gt.mask);
            iou[d * ng + g] = v;
        }

    UnitResult res;
    std::vector<char> gt_ig(ng);
    std::vector<int> order(ng);
    std::vector<int> gtm(ng);
    for (int r = 0; r < 4; ++r) {
        const double lo = kRanges[r][0], hi = kRanges[r][1];
        for (std::size_t g = 0; g < ng; ++g) {
            const UnitGt& gt = set.gts[g];
            gt_ig[g] = gt.crowd || gt.area < lo || gt.area > hi;
            if (!gt_ig[g]) ++res.npig[r];
        }
        // Ignored ground truth sorts last, otherwise stable.
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return gt_ig[static_cast<std::size_t>(a)] < gt_ig[static_cast<std::size_t>(b)];
        });

        res.flags[r].assign(kThresholds * nd, 0);
        for (int t = 0; t < kThresholds; ++t) {
            std::fill(gtm.begin(), gtm.end(), -1);
            for (std::size_t d = 0; d < nd; ++d) {
                double best = std::min(thr_at(t), 1.0 - 1e-10);
                int m = -1;
                for (int gi : order) {
                    const std::size_t g = static_cast<std::size_t>(gi);
                    if (gtm[g] != -1 && !set.gts[g].crowd) continue;
                    if (m != -1 && !gt_ig[static_cast<std::size_t>(m)] && gt_ig[g]) break;
                    if (iou[d * ng + g] < best) continue;
                    best = iou[d * ng + g];
                    m = gi;
                }
                signed char flag;
                if (m == -1) {
                    flag = (u.dets[d].area < lo || u.dets[d].area > hi) ? -1 : 0;
                } else {
                    gtm[static_cast<std::size_t>(m)] = static_cast<int>(d);
                    flag = gt_ig[static_cast<std::size_t>(m)] ? -1 : 1;
                }
                res.flags[r][static_cast<std::size_t>(t) * nd + d] = flag;
            }
        }
    }
    return res;
}

struct PredIndex {
    std::map<std::string, const PredictionRecord*> by_id;
};

PredIndex index_predictions(const std::vector<PredictionRecord>& predictions) {
    PredIndex idx;
    for (const PredictionRecord& p : predictions) {
        if (!idx.by_id.emplace(p.episode_id, &p).second)
            throw MismatchError("duplicate prediction record for episode " + p.episode_id);
    }
    return idx;
}

std::vector<UnitDet> build_dets(const PredictionRecord* rec, Kind kind) {
    std::vector<UnitDet> dets;
    if (rec == nullptr) return dets;
    std::vector<int> order(rec->detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return rec->detections[static_cast<std::size_t>(a)].score >
               rec->detections[static_cast<std::size_t>(b)].score;
    });
    for (int i : order) {
        if (dets.size() >= kMaxDet) break;
        const PredDetection& pd = rec->detections[static_cast<std::size_t>(i)];
        if (pd.score < 0.0 || pd.score > 1.0)
            throw MismatchError("detection score outside [0,1] in episode " +
                                rec->episode_id);
        UnitDet d;
        d.score = pd.score;
        d.box = box_from_xywh(pd.bbox[0], pd.bbox[1], pd.bbox[2], pd.bbox[3]);
        if (kind == Kind::mask) {
            if (!pd.mask.has_value())
                throw MismatchError("mask evaluation requested but episode " +
                                    rec->episode_id + " has a detection without a mask");
            d.mask = *pd.mask;
            d.area = static_cast<double>(rle_area(d.mask));
        } else {
            d.area = pd.bbox[2] * pd.bbox[3];
        }
        dets.push_back(std::move(d));
    }
    return dets;
}

GtSet build_gt_set(const Dataset& dataset, int image_id, int category_id, Kind kind) {
    GtSet set;
    const ImageRecord& img = dataset.image(image_id);
    const auto it = dataset.annotations_by_image.find(image_id);
    if (it == dataset.annotations_by_image.end()) return set;
    for (int idx : it->second) {
        const AnnotationRecord& ann = dataset.annotations[static_cast<std::size_t>(idx)];
        if (ann.category_id != category_id) continue;
        UnitGt g;
        g.crowd = ann.iscrowd;
        g.area = ann.area;
        g.box = box_from_xywh(ann.bbox[0], ann.bbox[1], ann.bbox[2], ann.bbox[3]);
        if (kind == Kind::mask) g.mask = rle_encode(mask_of(ann, img));
        set.gts.push_back(std::move(g));
    }
    return set;
}

double subset_mean(const std::vector<double>& vals) {
    double acc = 0;
    int n = 0;
    for (double v : vals)
        if (v > -1) {
            acc += v;
            ++n;
        }
    return n == 0 ? -1 : acc / n;
}

double pct(double fraction) {
    return fraction < 0 ? -1 : fraction * 100.0;
}

// Per-category metric block computed from unit results in fixed unit order.
struct CategoryMetrics {
    double ap = -1, ap50 = -1, ap75 = -1, ap_s = -1, ap_m = -1, ap_l = -1;
    double ar1 = -1, ar10 = -1, ar100 = -1, ar_s = -1, ar_m = -1, ar_l = -1;
};

struct PooledOrder {
    // (unit index, det index) pairs in global descending-score order.
    std::vector<std::pair<int, int>> entries;
};

PooledOrder pool_order(const std::vector<const Unit*>& units, int max_det) {
    PooledOrder p;
    std::vector<double> scores;
    for (std::size_t u = 0; u < units.size(); ++u) {
        const std::size_t n =
            std::min<std::size_t>(units[u]->dets.size(), static_cast<std::size_t>(max_det));
        for (std::size_t d = 0; d < n; ++d) {
            p.entries.emplace_back(static_cast<int>(u), static_cast<int>(d));
            scores.push_back(units[u]->dets[d].score);
        }
    }
    std::vector<int> order(p.entries.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    PooledOrder sorted;
    sorted.entries.reserve(p.entries.size());
    for (int i : order) sorted.entries.push_back(p.entries[static_cast<std::size_t>(i)]);
    return sorted;
}

std::vector<int> pooled_flags(const PooledOrder& pooled,
                              const std::vector<const Unit*>& units,
                              const std::vector<const UnitResult*>& results,
                              int range, int thr) {
    std::vector<int> flags;
    flags.reserve(pooled.entries.size());
    for (const auto& [u, d] : pooled.entries) {
        const std::size_t nd = units[static_cast<std::size_t>(u)]->dets.size();
        flags.push_back(results[static_cast<std::size_t>(u)]
                            ->flags[static_cast<std::size_t>(range)]
                                   [static_cast<std::size_t>(thr) * nd +
                                    static_cast<std::size_t>(d)]);
    }
    return flags;
}

double pooled_recall(const std::vector<int>& flags, int npig) {
    if (npig == 0) return -1;
    int tp = 0;
    for (int f : flags)
        if (f == 1) ++tp;
    return static_cast<double>(tp) / npig;
}

CategoryMetrics category_metrics(const std::vector<const Unit*>& units,
                                 const std::vector<const UnitResult*>& results) {
    std::array<int, 4> npig{};
    for (const UnitResult* r : results)
        for (int i = 0; i < 4; ++i) npig[static_cast<std::size_t>(i)] += r->npig[static_cast<std::size_t>(i)];

    const PooledOrder pool100 = pool_order(units, 100);

    auto ap_at = [&](int range, int thr) {
        return average_precision(pooled_flags(pool100, units, results, range, thr),
                                 npig[static_cast<std::size_t>(range)]);
    };
    auto ap_mean = [&](int range) {
        double acc = 0;
        for (int t = 0; t < kThresholds; ++t) {
            const double v = ap_at(range, t);
            if (v < 0) return -1.0;
            acc += v;
        }
        return acc / kThresholds;
    };
    auto ar_mean = [&](const PooledOrder& pooled, int range) {
        double acc = 0;
        for (int t = 0; t < kThresholds; ++t) {
            const double v = pooled_recall(pooled_flags(pooled, units, results, range, t),
                                           npig[static_cast<std::size_t>(range)]);
            if (v < 0) return -1.0;
            acc += v;
        }
        return acc / kThresholds;
    };

    CategoryMetrics m;
    m.ap = ap_mean(0);
    m.ap50 = ap_at(0, 0);
    m.ap75 = ap_at(0, 5);
    m.ap_s = ap_mean(1);
    m.ap_m = ap_mean(2);
    m.ap_l = ap_mean(3);
    m.ar100 = ar_mean(pool100, 0);
    m.ar_s = ar_mean(pool100, 1);
    m.ar_m = ar_mean(pool100, 2);
    m.ar_l = ar_mean(pool100, 3);
    m.ar1 = ar_mean(pool_order(units, 1), 0);
    m.ar10 = ar_mean(pool_order(units, 10), 0);
    return m;
}

}  // namespace

MatchOutcome match_detections(const std::vector<ScoredBox>& dets,
                              const std::vector<Box>& gts,
                              const std::vector<Box>& crowd_gts, double iou_thr,
                              int max_dets) {
    Unit u;
    GtSet set;
    for (const Box& b : gts) set.gts.push_back(UnitGt{false, b.area(), b, {}});
    for (const Box& b : crowd_gts) set.gts.push_back(UnitGt{true, b.area(), b, {}});

    std::vector<int> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return dets[static_cast<std::size_t>(a)].score > dets[static_cast<std::size_t>(b)].score;
    });
    if (static_cast<int>(order.size()) > max_dets)
        order.resize(static_cast<std::size_t>(max_dets));

    MatchOutcome out;
    out.order = order;
    out.gt_matched.assign(gts.size(), false);
    const std::size_t ng = set.gts.size();
    std::vector<int> gtm(ng, -1);
    std::vector<char> gt_ig(ng, 0);
    for (std::size_t g = gts.size(); g < ng; ++g) gt_ig[g] = 1;  // crowds ignore

    // Same scan order as the engine: plain gts first, crowds after.
    for (std::size_t di = 0; di < order.size(); ++di) {
        const Box& det = dets[static_cast<std::size_t>(order[di])].box;
        double best = std::min(iou_thr, 1.0 - 1e-10);
        int m = -1;
        for (std::size_t g = 0; g < ng; ++g) {
            if (gtm[g] != -1 && !set.gts[g].crowd) continue;
            if (m != -1 && !gt_ig[static_cast<std::size_t>(m)] && gt_ig[g]) break;
            const double v = set.gts[g].crowd ? box_iou_crowd(det, set.gts[g].box)
                                              : box_iou(det, set.gts[g].box);
            if (v < best) continue;
            best = v;
            m = static_cast<int>(g);
        }
        if (m == -1) {
            out.det_matched_gt.push_back(-1);
            out.det_ignored.push_back(false);
        } else if (static_cast<std::size_t>(m) < gts.size()) {
            gtm[static_cast<std::size_t>(m)] = static_cast<int>(di);
            out.gt_matched[static_cast<std::size_t>(m)] = true;
            out.det_matched_gt.push_back(m);
            out.det_ignored.push_back(false);
        } else {
            gtm[static_cast<std::size_t>(m)] = static_cast<int>(di);
            out.det_matched_gt.push_back(-1);
            out.det_ignored.push_back(true);
        }
    }
    return out;
}

double average_precision(const std::vector<int>& flags, int n_gt) {
    if (n_gt < 0) throw std::invalid_argument("average_precision: negative gt count");
    if (n_gt == 0) return -1;

    std::vector<double> rc, pr;
    rc.reserve(flags.size());
    pr.reserve(flags.size());
    int tp = 0, fp = 0;
    for (int f : flags) {
        if (f != 1 && f != 0 && f != -1)
            throw std::invalid_argument("average_precision: flags must be +1, 0 or -1");
        if (f == 1) ++tp;
        else if (f == 0) ++fp;
        rc.push_back(static_cast<double>(tp) / n_gt);
        pr.push_back(tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0);
    }
    // Precision envelope: running max from the right.
    for (std::size_t i = pr.size(); i-- > 1;) pr[i - 1] = std::max(pr[i - 1], pr[i]);

    double total = 0;
    std::size_t idx = 0;
    for (int ri = 0; ri <= 100; ++ri) {
        const double r = ri / 100.0;
        while (idx < rc.size() && rc[idx] < r) ++idx;  // searchsorted, left side
        if (idx < rc.size()) total += pr[idx];
    }
    return total / 101.0;
}

MetricsReport evaluate(const std::vector<PredictionRecord>& predictions,
                       const std::vector<Episode>& episodes,
                       const Dataset& dataset,
                       const std::vector<int>& category_subset, Kind kind,
                       int threads) {
    std::map<std::string, const Episode*> episode_by_id;
    for (const Episode& e : episodes)
        if (!episode_by_id.emplace(e.episode_id, &e).second)
            throw MismatchError("duplicate episode id " + e.episode_id);

    const std::set<int> subset(category_subset.begin(), category_subset.end());
    const PredIndex preds = index_predictions(predictions);
    for (const PredictionRecord& p : predictions) {
        const auto it = episode_by_id.find(p.episode_id);
        if (it == episode_by_id.end())
            throw MismatchError("prediction references unknown episode " + p.episode_id);
        if (!subset.count(it->second->category_id))
            throw MismatchError("episode " + p.episode_id +
                                " has category outside the evaluated subset");
    }

    // Units grouped per category in (run, image) order; ground truth shared
    // across runs via (image, category) sets.
    std::vector<int> cats(subset.begin(), subset.end());
    std::map<std::pair<int, int>, int> gt_index;
    std::vector<GtSet> gt_sets;
    std::vector<Unit> units;
    std::vector<std::pair<int, std::size_t>> unit_of_cat;  // (category, unit idx)
    for (int cat : cats) {
        std::vector<const Episode*> eps;
        for (const Episode& e : episodes)
            if (e.category_id == cat) eps.push_back(&e);
        std::stable_sort(eps.begin(), eps.end(), [](const Episode* a, const Episode* b) {
            if (a->run != b->run) return a->run < b->run;
            return a->image_id < b->image_id;
        });
        for (const Episode* e : eps) {
            const auto key = std::make_pair(e->image_id, cat);
            auto it = gt_index.find(key);
            if (it == gt_index.end()) {
                gt_index.emplace(key, static_cast<int>(gt_sets.size()));
                gt_sets.push_back(build_gt_set(dataset, e->image_id, cat, kind));
                it = gt_index.find(key);
            }
            Unit u;
            u.run = e->run;
            u.image_id = e->image_id;
            u.gt_set = it->second;
            const auto pit = preds.by_id.find(e->episode_id);
            u.dets = build_dets(pit == preds.by_id.end() ? nullptr : pit->second, kind);
            unit_of_cat.emplace_back(cat, units.size());
            units.push_back(std::move(u));
        }
    }

    std::vector<UnitResult> results(units.size());
    parallel_for(units.size(), threads, [&](std::size_t i) {
        results[i] = compute_unit(units[i], gt_sets[static_cast<std::size_t>(units[i].gt_set)], kind);
    });

    MetricsReport report;
    report.kind = kind;
    report.episode_count = static_cast<int>(episodes.size());

    std::vector<double> ap, ap50, ap75, ap_s, ap_m, ap_l;
    std::vector<double> ar1, ar10, ar100, ar_s, ar_m, ar_l;
    std::size_t pos = 0;
    for (int cat : cats) {
        std::vector<const Unit*> cat_units;
        std::vector<const UnitResult*> cat_results;
        while (pos < unit_of_cat.size() && unit_of_cat[pos].first == cat) {
            cat_units.push_back(&units[unit_of_cat[pos].second]);
            cat_results.push_back(&results[unit_of_cat[pos].second]);
            ++pos;
        }
        const CategoryMetrics m = category_metrics(cat_units, cat_results);
        ap.push_back(m.ap);
        ap50.push_back(m.ap50);
        ap75.push_back(m.ap75);
        ap_s.push_back(m.ap_s);
        ap_m.push_back(m.ap_m);
        ap_l.push_back(m.ap_l);
        ar1.push_back(m.ar1);
        ar10.push_back(m.ar10);
        ar100.push_back(m.ar100);
        ar_s.push_back(m.ar_s);
        ar_m.push_back(m.ar_m);
        ar_l.push_back(m.ar_l);
        report.per_category_ap50.emplace_back(cat, pct(m.ap50));
    }

    report.ap = pct(subset_mean(ap));
    report.ap50 = pct(subset_mean(ap50));
    report.ap75 = pct(subset_mean(ap75));
    report.ap_s = pct(subset_mean(ap_s));
    report.ap_m = pct(subset_mean(ap_m));
    report.ap_l = pct(subset_mean(ap_l));
    report.ar_1 = pct(subset_mean(ar1));
    report.ar_10 = pct(subset_mean(ar10));
    report.ar_100 = pct(subset_mean(ar100));
    report.ar_s = pct(subset_mean(ar_s));
    report.ar_m = pct(subset_mean(ar_m));
    report.ar_l = pct(subset_mean(ar_l));
    return report;
}

AggregateReport aggregate(const std::vector<std::vector<double>>& values,
                          std::vector<int> split_indices) {
    if (values.empty()) throw std::invalid_argument("aggregate: no splits");
    if (split_indices.empty()) {
        for (std::size_t i = 0; i < values.size(); ++i)
            split_indices.push_back(static_cast<int>(i) + 1);
    }
    if (split_indices.size() != values.size())
        throw std::invalid_argument("aggregate: split label count mismatch");

    AggregateReport rep;
    rep.split_indices = std::move(split_indices);
    bool equal_runs = true;
    for (const auto& runs : values) {
        if (runs.empty()) throw std::invalid_argument("aggregate: split without runs");
        if (runs.size() != values[0].size()) equal_runs = false;
    }

    auto mean_of = [](const std::vector<double>& v) {
        double acc = 0;
        for (double x : v) acc += x;
        return acc / static_cast<double>(v.size());
    };
    auto ci_of = [&](const std::vector<double>& v) {
        if (v.size() < 2) return 0.0;
        const double m = mean_of(v);
        double ss = 0;
        for (double x : v) ss += (x - m) * (x - m);
        const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
        return 1.96 * sd / std::sqrt(static_cast<double>(v.size()));
    };

    for (const auto& runs : values) {
        rep.split_mean.push_back(mean_of(runs));
        rep.split_ci.push_back(ci_of(runs));
    }
    rep.grand_mean = mean_of(rep.split_mean);
    if (equal_runs) {
        std::vector<double> per_run;
        for (std::size_t r = 0; r < values[0].size(); ++r) {
            double acc = 0;
            for (const auto& runs : values) acc += runs[r];
            per_run.push_back(acc / static_cast<double>(values.size()));
        }
        rep.grand_ci = ci_of(per_run);
    }
    return rep;
}

ConfusionMatrix confusion_matrix(const std::vector<PredictionRecord>& predictions,
                                 const std::vector<Episode>& episodes,
                                 const Dataset& dataset, Kind kind, int threads) {
    std::map<std::string, const Episode*> episode_by_id;
    for (const Episode& e : episodes)
        if (!episode_by_id.emplace(e.episode_id, &e).second)
            throw MismatchError("duplicate episode id " + e.episode_id);
    const PredIndex preds = index_predictions(predictions);
    for (const PredictionRecord& p : predictions)
        if (!episode_by_id.count(p.episode_id))
            throw MismatchError("prediction references unknown episode " + p.episode_id);

    ConfusionMatrix cm;
    cm.category_ids = dataset.category_ids();
    const std::size_t n = cm.category_ids.size();
    cm.ap50.assign(n, std::vector<double>(n, -1));
    cm.column_sum.assign(n, 0.0);

    // Row data: units of reference category i with their detections.
    std::map<int, std::vector<const Episode*>> rows;
    for (const Episode& e : episodes) rows[e.category_id].push_back(&e);
    for (auto& [cat, eps] : rows)
        std::stable_sort(eps.begin(), eps.end(), [](const Episode* a, const Episode* b) {
            if (a->run != b->run) return a->run < b->run;
            return a->image_id < b->image_id;
        });

    // Ground truth per (image, column category), built once, serially.
    std::map<std::pair<int, int>, int> gt_index;
    std::vector<GtSet> gt_sets;
    std::set<int> row_images;
    for (const auto& [cat, eps] : rows)
        for (const Episode* e : eps) row_images.insert(e->image_id);
    for (int img : row_images)
        for (std::size_t j = 0; j < n; ++j) {
            gt_index.emplace(std::make_pair(img, cm.category_ids[j]),
                             static_cast<int>(gt_sets.size()));
            gt_sets.push_back(build_gt_set(dataset, img, cm.category_ids[j], kind));
        }

    struct Cell {
        std::size_t i, j;
    };
    std::vector<Cell> cells;
    std::map<int, std::size_t> row_of;
    for (std::size_t i = 0; i < n; ++i) row_of[cm.category_ids[i]] = i;
    for (const auto& [cat, eps] : rows)
        for (std::size_t j = 0; j < n; ++j) cells.push_back(Cell{row_of.at(cat), j});

    // Detections per row unit are shared across columns.
    std::map<int, std::vector<Unit>> row_units;
    for (const auto& [cat, eps] : rows) {
        std::vector<Unit>& us = row_units[cat];
        for (const Episode* e : eps) {
            Unit u;
            u.run = e->run;
            u.image_id = e->image_id;
            const auto pit = preds.by_id.find(e->episode_id);
            u.dets = build_dets(pit == preds.by_id.end() ? nullptr : pit->second, kind);
            us.push_back(std::move(u));
        }
    }

    std::vector<double> cell_value(cells.size(), -1);
    parallel_for(cells.size(), threads, [&](std::size_t ci) {
        const Cell& cell = cells[ci];
        const int row_cat = cm.category_ids[cell.i];
        const int col_cat = cm.category_ids[cell.j];
        const std::vector<Unit>& base_units = row_units.at(row_cat);

        std::vector<Unit> local = base_units;
        std::vector<const Unit*> ptrs;
        std::vector<UnitResult> results;
        for (Unit& u : local) {
            u.gt_set = gt_index.at(std::make_pair(u.image_id, col_cat));
            results.push_back(compute_unit(u, gt_sets[static_cast<std::size_t>(u.gt_set)], kind));
            ptrs.push_back(&u);
        }
        int npig = 0;
        for (const UnitResult& r : results) npig += r.npig[0];
        if (npig == 0) return;
        const PooledOrder pooled = pool_order(ptrs, 100);
        std::vector<const UnitResult*> rptrs;
        for (const UnitResult& r : results) rptrs.push_back(&r);
        cell_value[ci] =
            average_precision(pooled_flags(pooled, ptrs, rptrs, 0, 0), npig);
    });

    for (std::size_t ci = 0; ci < cells.size(); ++ci)
        cm.ap50[cells[ci].i][cells[ci].j] = pct(cell_value[ci]);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (cm.ap50[i][j] > -1) acc += cm.ap50[i][j];
        cm.column_sum[j] = acc;
    }
    return cm;
}

ClutterReport clutter_report(const std::vector<PredictionRecord>& predictions,
                             const std::vector<Episode>& episodes,
                             const Dataset& dataset, Kind kind,
                             const std::vector<int>& bin_edges, int threads) {
    if (bin_edges.empty())
        throw std::invalid_argument("clutter_report: no bin edges");
    for (std::size_t i = 1; i < bin_edges.size(); ++i)
        if (bin_edges[i] <= bin_edges[i - 1])
            throw std::invalid_argument("clutter_report: edges must rise strictly");

    // Non-crowd instance count per image, all categories.
    std::map<int, int> instance_count;
    for (const AnnotationRecord& ann : dataset.annotations)
        if (!ann.iscrowd) ++instance_count[ann.image_id];

    auto bin_of = [&](int count) {
        int b = -1;
        for (std::size_t i = 0; i < bin_edges.size(); ++i)
            if (count >= bin_edges[i]) b = static_cast<int>(i);
        return b;  // -1 = below the first edge
    };

    ClutterReport rep;
    rep.kind = kind;
    rep.edges = bin_edges;
    for (std::size_t i = 0; i < bin_edges.size(); ++i) {
        ClutterBin bin;
        bin.lo = bin_edges[i];
        bin.hi = i + 1 < bin_edges.size() ? bin_edges[i + 1] - 1 : -1;
        rep.bins.push_back(bin);
    }

    std::map<std::string, const PredictionRecord*> by_id;
    for (const PredictionRecord& p : predictions) by_id[p.episode_id] = &p;

    std::vector<std::vector<Episode>> bin_episodes(rep.bins.size());
    std::vector<std::vector<PredictionRecord>> bin_preds(rep.bins.size());
    std::vector<std::set<int>> bin_images(rep.bins.size());
    for (const Episode& e : episodes) {
        const auto it = instance_count.find(e.image_id);
        const int b = bin_of(it == instance_count.end() ? 0 : it->second);
        if (b < 0) continue;
        bin_episodes[static_cast<std::size_t>(b)].push_back(e);
        bin_images[static_cast<std::size_t>(b)].insert(e.image_id);
        if (const auto pit = by_id.find(e.episode_id); pit != by_id.end())
            bin_preds[static_cast<std::size_t>(b)].push_back(*pit->second);
    }

    for (std::size_t b = 0; b < rep.bins.size(); ++b) {
        rep.bins[b].episodes = static_cast<int>(bin_episodes[b].size());
        rep.bins[b].images = static_cast<int>(bin_images[b].size());
        if (bin_episodes[b].empty()) continue;
        std::set<int> cats;
        for (const Episode& e : bin_episodes[b]) cats.insert(e.category_id);
        const MetricsReport r =
            evaluate(bin_preds[b], bin_episodes[b], dataset,
                     std::vector<int>(cats.begin(), cats.end()), kind, threads);
        rep.bins[b].map50 = r.ap50;
    }
    return rep;
}

BaselineResult random_baseline(const Dataset& dataset,
                               const std::vector<Episode>& episodes,
                               std::uint64_t seed, int threads) {
    BaselineResult out;
    out.records.resize(episodes.size());
    std::vector<int> forced(episodes.size(), 0);

    parallel_for(episodes.size(), threads, [&](std::size_t i) {
        const Episode& e = episodes[i];
        const ImageRecord& img = dataset.image(e.image_id);
        PredictionRecord rec;
        rec.episode_id = e.episode_id;

        Rng rng = make_rng(seed, RngDomain::random_baseline,
                           {static_cast<std::uint64_t>(e.run),
                            static_cast<std::uint64_t>(e.image_id),
                            static_cast<std::uint64_t>(e.category_id)});

        const auto it = dataset.annotations_by_image.find(e.image_id);
        if (it != dataset.annotations_by_image.end()) {
            for (int idx : it->second) {
                const AnnotationRecord& ann =
                    dataset.annotations[static_cast<std::size_t>(idx)];
                if (ann.category_id != e.category_id || ann.iscrowd) continue;

                const double x = ann.bbox[0], y = ann.bbox[1];
                const double w = ann.bbox[2], h = ann.bbox[3];
                std::int64_t dx, dy;
                const std::int64_t x_lo = static_cast<std::int64_t>(std::ceil(-x));
                const std::int64_t x_hi = static_cast<std::int64_t>(std::floor(img.width - w - x));
                const std::int64_t y_lo = static_cast<std::int64_t>(std::ceil(-y));
                const std::int64_t y_hi = static_cast<std::int64_t>(std::floor(img.height - h - y));
                if (x_hi < x_lo || y_hi < y_lo) {
                    // Box cannot be placed inside the image; pin it at the origin.
                    dx = static_cast<std::int64_t>(std::llround(-x));
                    dy = static_cast<std::int64_t>(std::llround(-y));
                    ++forced[i];
                } else {
                    dx = rng.range(x_lo, x_hi);
                    dy = rng.range(y_lo, y_hi);
                }
                const double score = 0.8 + rng.uniform() * 0.2;

                PredDetection det;
                det.bbox = {x + static_cast<double>(dx), y + static_cast<double>(dy), w, h};
                det.score = score;
                det.mask = rle_encode(translate_mask(mask_of(ann, img),
                                                     static_cast<int>(dx),
                                                     static_cast<int>(dy)));
                rec.detections.push_back(std::move(det));
            }
        }
        out.records[i] = std::move(rec);
    });
    for (int f : forced) out.forced_origin += f;
    return out;
}

}  // namespace osb
