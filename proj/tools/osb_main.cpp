#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "osb/commands.hpp"
#include "osb/errors.hpp"
#include "osb/version.hpp"

namespace {

// Exit codes: 0 success, 2 missing file, 3 malformed content, 4 schema
// version mismatch, 5 episodes/predictions/dataset disagreement, 1 anything
// else (including bad flags).
int run(int argc, char** argv) {
    CLI::App app{"one-shot instance segmentation benchmark tools"};
    app.set_version_flag("--version", std::string(osb::kToolName) + " " + osb::kToolVersion);
    app.require_subcommand(1);

    osb::RunConfig cfg;
    cfg.threads = 1;
    std::string partition = "test";

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--annotations", cfg.annotations, "COCO annotation JSON");
        cmd->add_option("--split", cfg.split, "split index 1..4, 0 = all four");
        cmd->add_option("--partition", partition, "test or train")
            ->check(CLI::IsMember({"test", "train"}));
        cmd->add_option("--shots", cfg.shots, "references per episode");
        cmd->add_option("--runs", cfg.runs, "independent runs");
        cmd->add_option("--seed", cfg.seed, "RNG seed");
        cmd->add_option("--episodes", cfg.episodes_path, "episodes JSONL path");
        cmd->add_option("--predictions", cfg.predictions_path, "predictions JSONL path");
        cmd->add_option("--weights", cfg.weights_path, "weight container");
        cmd->add_option("--activations", cfg.activations_dir, "backbone activation dir");
        cmd->add_option("--out", cfg.out_dir, "report output dir");
        cmd->add_option("--bins", cfg.bins, "clutter bin edges")->delimiter(',');
        cmd->add_flag("--exclude-same-image", cfg.exclude_same_image,
                      "drop reference candidates from the query image");
        cmd->add_option("--kind", cfg.kind, "box, mask or both")
            ->check(CLI::IsMember({"box", "mask", "both"}));
        cmd->add_option("--threads", cfg.threads, "worker threads");
    };

    CLI::App* splits = app.add_subcommand("splits", "list category splits");
    add_common(splits);
    CLI::App* episodes = app.add_subcommand("episodes", "sample episodes");
    add_common(episodes);
    CLI::App* baseline = app.add_subcommand("baseline", "random-shift baseline predictions");
    add_common(baseline);
    CLI::App* eval = app.add_subcommand("eval", "evaluate predictions");
    add_common(eval);
    CLI::App* confusion = app.add_subcommand("confusion", "category confusion matrix");
    add_common(confusion);
    CLI::App* clutter = app.add_subcommand("clutter", "metrics by image clutter");
    add_common(clutter);
    CLI::App* infer = app.add_subcommand("infer", "detect from stored activations");
    add_common(infer);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    cfg.partition = partition == "train" ? osb::Partition::train : osb::Partition::test;

    try {
        if (splits->parsed()) {
            std::fputs(osb::cmd_splits(cfg.split == 1 && splits->count("--split") == 0
                                           ? 0
                                           : cfg.split)
                           .c_str(),
                       stdout);
        } else if (episodes->parsed()) {
            osb::cmd_episodes(cfg);
        } else if (baseline->parsed()) {
            const int forced = osb::cmd_baseline(cfg);
            std::printf("baseline written; %d forced-origin placements\n", forced);
        } else if (eval->parsed()) {
            const osb::EvalOutcome out = osb::cmd_eval(cfg);
            for (const osb::EvalKindOutcome& ko : out.kinds)
                std::printf("%s grand mean AP50 %.3f (ci %.3f)\n",
                            osb::kind_name(ko.kind), ko.ap50.grand_mean,
                            ko.ap50.grand_ci);
        } else if (confusion->parsed()) {
            osb::cmd_confusion(cfg);
        } else if (clutter->parsed()) {
            osb::cmd_clutter(cfg);
        } else if (infer->parsed()) {
            const int n = osb::cmd_infer(cfg);
            std::printf("predictions written for %d episodes\n", n);
        }
    } catch (const osb::FileError& e) {
        std::fprintf(stderr, "file error: %s\n", e.what());
        return 2;
    } catch (const osb::ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return 3;
    } catch (const osb::SchemaError& e) {
        std::fprintf(stderr, "schema error: %s\n", e.what());
        return 4;
    } catch (const osb::MismatchError& e) {
        std::fprintf(stderr, "mismatch error: %s\n", e.what());
        return 5;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    return run(argc, argv);
}
