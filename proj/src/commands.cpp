#include "osb/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "osb/errors.hpp"
#include "osb/io.hpp"
#include "osb/matching.hpp"
#include "osb/version.hpp"

namespace osb {

namespace {

using nlohmann::json;

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

std::string path_for(const RunConfig& cfg, const std::string& base, int split) {
    return cfg.split == 0 ? split_path(base, split) : base;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw FileError("cannot write " + path);
}

std::string out_file(const RunConfig& cfg, const std::string& name) {
    require(!cfg.out_dir.empty(), "--out directory required");
    std::filesystem::create_directories(cfg.out_dir);
    return cfg.out_dir + "/" + name;
}

// Runs present in an episode list, ascending.
std::vector<int> runs_of(const std::vector<Episode>& episodes) {
    std::set<int> runs;
    for (const Episode& e : episodes) runs.insert(e.run);
    return {runs.begin(), runs.end()};
}

std::vector<std::string> category_labels(const Dataset& dataset,
                                         const std::vector<int>& ids) {
    std::vector<std::string> labels;
    for (int id : ids)
        labels.push_back(dataset.category(id).name + " (" + std::to_string(id) + ")");
    return labels;
}

}  // namespace

std::string config_json(const RunConfig& cfg) {
    json j;
    j["annotations"] = cfg.annotations;
    j["split"] = cfg.split;
    j["partition"] = cfg.partition == Partition::test ? "test" : "train";
    j["shots"] = cfg.shots;
    j["runs"] = cfg.runs;
    j["seed"] = cfg.seed;
    j["exclude_same_image"] = cfg.exclude_same_image;
    j["mean_rgb"] = cfg.mean_rgb;
    j["pipeline"] = {{"frame", cfg.pipeline.frame},
                     {"pre_nms", cfg.pipeline.pre_nms},
                     {"rpn_nms", cfg.pipeline.rpn_nms},
                     {"post_nms", cfg.pipeline.post_nms},
                     {"score_threshold", cfg.pipeline.score_threshold},
                     {"final_nms", cfg.pipeline.final_nms},
                     {"max_detections", cfg.pipeline.max_detections},
                     {"mask_binarize", cfg.pipeline.mask_binarize}};
    j["bins"] = cfg.bins;
    j["kind"] = cfg.kind;
    j["threads"] = cfg.threads;
    j["tool_version"] = kToolVersion;
    return j.dump();
}

std::string split_path(const std::string& path, int split) {
    const std::size_t dot = path.find_last_of('.');
    const std::size_t slash = path.find_last_of('/');
    const std::string tag = "_s" + std::to_string(split);
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return path + tag;
    return path.substr(0, dot) + tag + path.substr(dot);
}

std::vector<Kind> kinds_of(const RunConfig& cfg) {
    if (cfg.kind == "box") return {Kind::box};
    if (cfg.kind == "mask") return {Kind::mask};
    if (cfg.kind == "both") return {Kind::box, Kind::mask};
    throw std::invalid_argument("--kind must be box, mask or both");
}

std::vector<int> splits_of(const RunConfig& cfg) {
    if (cfg.split == 0) return {1, 2, 3, 4};
    require(cfg.split >= 1 && cfg.split <= 4, "--split must be in 0..4");
    return {cfg.split};
}

std::string cmd_splits(int split) {
    require(split >= 0 && split <= 4, "--split must be in 0..4");
    const auto& names = canonical_categories();
    std::ostringstream out;
    for (int i = 1; i <= 4; ++i) {
        if (split != 0 && split != i) continue;
        const SplitSpec s = make_split(i);
        out << "S" << i << " test:";
        for (std::size_t k = 0; k < s.test_ids.size(); ++k)
            out << (k ? ", " : " ") << names[static_cast<std::size_t>(s.test_ids[k] - 1)]
                << "(" << s.test_ids[k] << ")";
        out << "\n";
        out << "S" << i << " train:";
        for (std::size_t k = 0; k < s.train_ids.size(); ++k)
            out << (k ? ", " : " ") << names[static_cast<std::size_t>(s.train_ids[k] - 1)]
                << "(" << s.train_ids[k] << ")";
        out << "\n";
    }
    return out.str();
}

void cmd_episodes(const RunConfig& cfg) {
    require(!cfg.annotations.empty(), "--annotations required");
    require(!cfg.episodes_path.empty(), "--episodes output path required");
    const Dataset dataset = load_dataset(cfg.annotations);
    for (int s : splits_of(cfg)) {
        const std::vector<Episode> episodes =
            sample_episodes(dataset, make_split(s), cfg.partition, cfg.shots,
                            cfg.runs, cfg.seed, cfg.exclude_same_image);
        write_episodes(path_for(cfg, cfg.episodes_path, s), episodes);
    }
}

int cmd_baseline(const RunConfig& cfg) {
    require(!cfg.annotations.empty(), "--annotations required");
    require(!cfg.episodes_path.empty(), "--episodes output path required");
    require(!cfg.predictions_path.empty(), "--predictions output path required");
    const Dataset dataset = load_dataset(cfg.annotations);
    int forced = 0;
    for (int s : splits_of(cfg)) {
        const std::vector<Episode> episodes =
            sample_episodes(dataset, make_split(s), cfg.partition, cfg.shots,
                            cfg.runs, cfg.seed, cfg.exclude_same_image);
        const BaselineResult base =
            random_baseline(dataset, episodes, cfg.seed, cfg.threads);
        write_episodes(path_for(cfg, cfg.episodes_path, s), episodes);
        write_predictions(path_for(cfg, cfg.predictions_path, s), base.records);
        forced += base.forced_origin;
    }
    return forced;
}

EvalOutcome run_eval(const Dataset& dataset, const RunConfig& cfg) {
    require(!cfg.episodes_path.empty(), "--episodes required");
    require(!cfg.predictions_path.empty(), "--predictions required");

    EvalOutcome out;
    out.splits = splits_of(cfg);

    struct SplitData {
        std::vector<Episode> episodes;
        std::vector<PredictionRecord> predictions;
        std::vector<int> subset;
        std::vector<int> runs;
    };
    std::vector<SplitData> data;
    for (int s : out.splits) {
        SplitData d;
        d.episodes = read_episodes(path_for(cfg, cfg.episodes_path, s));
        d.predictions = read_predictions(path_for(cfg, cfg.predictions_path, s));
        d.subset = split_category_ids(dataset, make_split(s), cfg.partition);
        d.runs = runs_of(d.episodes);
        out.runs.push_back(d.runs);
        data.push_back(std::move(d));
    }

    for (Kind kind : kinds_of(cfg)) {
        EvalKindOutcome ko;
        ko.kind = kind;
        std::vector<std::vector<double>> ap50_values;
        for (const SplitData& d : data) {
            std::vector<MetricsReport> run_reports;
            std::vector<double> ap50_runs;
            for (int run : d.runs) {
                std::vector<Episode> eps;
                std::set<std::string> ids;
                for (const Episode& e : d.episodes)
                    if (e.run == run) {
                        eps.push_back(e);
                        ids.insert(e.episode_id);
                    }
                std::vector<PredictionRecord> preds;
                for (const PredictionRecord& p : d.predictions)
                    if (ids.count(p.episode_id)) preds.push_back(p);
                MetricsReport r =
                    evaluate(preds, eps, dataset, d.subset, kind, cfg.threads);
                ap50_runs.push_back(r.ap50);
                run_reports.push_back(std::move(r));
            }
            ko.pooled.push_back(evaluate(d.predictions, d.episodes, dataset,
                                         d.subset, kind, cfg.threads));
            ko.per_run.push_back(std::move(run_reports));
            ap50_values.push_back(std::move(ap50_runs));
        }
        ko.ap50 = aggregate(ap50_values, out.splits);
        out.kinds.push_back(std::move(ko));
    }
    return out;
}

EvalOutcome cmd_eval(const RunConfig& cfg) {
    require(!cfg.annotations.empty(), "--annotations required");
    const Dataset dataset = load_dataset(cfg.annotations);
    const EvalOutcome out = run_eval(dataset, cfg);

    const ReportMeta meta{config_json(cfg)};
    std::vector<CsvRow> rows;
    for (const EvalKindOutcome& ko : out.kinds) {
        for (std::size_t si = 0; si < out.splits.size(); ++si) {
            for (std::size_t ri = 0; ri < ko.per_run[si].size(); ++ri)
                rows.push_back(CsvRow{kind_name(ko.kind), out.splits[si],
                                      out.runs[si][ri], ko.per_run[si][ri]});
            write_text(out_file(cfg, "metrics_s" + std::to_string(out.splits[si]) +
                                         "_" + kind_name(ko.kind) + ".json"),
                       emit_metrics(ko.pooled[si], meta));
        }
        write_text(out_file(cfg, std::string("aggregate_") + kind_name(ko.kind) + ".json"),
                   emit_aggregate(ko.ap50, meta));
    }
    write_text(out_file(cfg, "metrics.csv"), metrics_csv(rows));
    return out;
}

std::vector<ConfusionMatrix> cmd_confusion(const RunConfig& cfg) {
    require(!cfg.annotations.empty(), "--annotations required");
    require(cfg.split != 0, "--split must pick one split");
    const Dataset dataset = load_dataset(cfg.annotations);
    const std::vector<Episode> episodes = read_episodes(cfg.episodes_path);
    const std::vector<PredictionRecord> predictions =
        read_predictions(cfg.predictions_path);

    const ReportMeta meta{config_json(cfg)};
    std::vector<ConfusionMatrix> out;
    for (Kind kind : kinds_of(cfg)) {
        ConfusionMatrix cm =
            confusion_matrix(predictions, episodes, dataset, kind, cfg.threads);
        write_text(out_file(cfg, std::string("confusion_") + kind_name(kind) + ".json"),
                   emit_confusion(cm, meta));
        write_text(out_file(cfg, std::string("confusion_") + kind_name(kind) + ".svg"),
                   confusion_svg(cm, category_labels(dataset, cm.category_ids)));
        out.push_back(std::move(cm));
    }
    return out;
}

std::vector<ClutterReport> cmd_clutter(const RunConfig& cfg) {
    require(!cfg.annotations.empty(), "--annotations required");
    require(cfg.split != 0, "--split must pick one split");
    const Dataset dataset = load_dataset(cfg.annotations);
    const std::vector<Episode> episodes = read_episodes(cfg.episodes_path);
    const std::vector<PredictionRecord> predictions =
        read_predictions(cfg.predictions_path);

    const ReportMeta meta{config_json(cfg)};
    std::vector<ClutterReport> out;
    for (Kind kind : kinds_of(cfg)) {
        ClutterReport rep = clutter_report(predictions, episodes, dataset, kind,
                                           cfg.bins, cfg.threads);
        write_text(out_file(cfg, std::string("clutter_") + kind_name(kind) + ".json"),
                   emit_clutter(rep, meta));
        write_text(out_file(cfg, std::string("clutter_") + kind_name(kind) + ".svg"),
                   clutter_svg(rep));
        out.push_back(std::move(rep));
    }
    return out;
}

int cmd_infer(const RunConfig& cfg) {
    require(!cfg.annotations.empty(), "--annotations required");
    require(!cfg.episodes_path.empty(), "--episodes required");
    require(!cfg.predictions_path.empty(), "--predictions output path required");
    require(!cfg.weights_path.empty(), "--weights required");
    require(!cfg.activations_dir.empty(), "--activations required");

    const Dataset dataset = load_dataset(cfg.annotations);
    const WeightBundle weights = read_weights(cfg.weights_path);
    const ActivationStore store{cfg.activations_dir};

    int total = 0;
    for (int s : splits_of(cfg)) {
        const std::vector<Episode> episodes =
            read_episodes(path_for(cfg, cfg.episodes_path, s));
        std::vector<PredictionRecord> records(episodes.size());

        const auto one = [&](std::size_t i) {
            const Episode& e = episodes[i];
            const ImageRecord& img = dataset.image(e.image_id);
            const BackboneFeatures query = store.load_image(e.image_id);
            std::vector<BackboneFeatures> refs;
            for (int ann_id : e.reference_ann_ids)
                refs.push_back(store.load_reference(ann_id));
            const FrameTransform t =
                compute_frame_transform(img.height, img.width, cfg.pipeline.frame);
            const std::vector<Detection> dets =
                detect(query, refs, weights, cfg.pipeline, t);

            PredictionRecord rec;
            rec.episode_id = e.episode_id;
            for (const Detection& d : dets) {
                PredDetection pd;
                pd.bbox = {d.box.x1, d.box.y1, d.box.width(), d.box.height()};
                pd.score = d.score;
                pd.mask = d.mask;
                rec.detections.push_back(std::move(pd));
            }
            records[i] = std::move(rec);
        };
        if (cfg.threads <= 1 || episodes.size() <= 1) {
            for (std::size_t i = 0; i < episodes.size(); ++i) one(i);
        } else {
            const std::size_t workers =
                std::min<std::size_t>(static_cast<std::size_t>(cfg.threads),
                                      episodes.size());
            std::vector<std::future<void>> futures;
            for (std::size_t w = 0; w < workers; ++w)
                futures.push_back(std::async(std::launch::async, [&, w] {
                    for (std::size_t i = w; i < episodes.size(); i += workers) one(i);
                }));
            for (auto& f : futures) f.get();
        }
        write_predictions(path_for(cfg, cfg.predictions_path, s), records);
        total += static_cast<int>(episodes.size());
    }
    return total;
}

}  // namespace osb
