#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "osb/coco.hpp"

namespace osb {

// The 80 object categories in canonical order (ascending dataset id).
// Position p (1-based) in this list is the category's rank; real annotation
// files map position p to their p-th smallest category id, which absorbs the
// gaps in the historical id numbering.
const std::array<const char*, 80>& canonical_categories();

enum class Partition { test, train };

struct SplitSpec {
    int index = 0;                // 1..4
    std::vector<int> test_ids;    // canonical positions, 20 entries
    std::vector<int> train_ids;   // canonical positions, 60 entries
};

// Split i holds positions {i, i+4, i+8, ...} (1-based) as its test set; the
// remaining 60 positions train. The four test sets partition the categories.
SplitSpec make_split(int i);

// Dataset category ids for the chosen side of the split: canonical position
// p maps to the p-th smallest category id. Positions beyond the dataset's
// category count are skipped, so reduced toy datasets work unchanged.
std::vector<int> split_category_ids(const Dataset& dataset, const SplitSpec& split,
                                    Partition partition);

struct Episode {
    std::string episode_id;  // "r<run>-i<image_id>-c<category_id>"
    int run = 0;
    int image_id = 0;
    int category_id = 0;
    std::vector<int> reference_ann_ids;
};

std::string episode_key(int run, int image_id, int category_id);

// One episode per (run, image, present split category), references drawn
// uniformly from the category's non-crowd instances across the whole dataset
// (without replacement when at least k exist, with replacement otherwise).
// Presence means at least one non-crowd annotation. Each episode's draws come
// from an independent stream keyed on (seed, run, image_id, category_id), so
// the list is identical regardless of iteration order or threading.
//
// With exclude_same_image set, reference candidates from the query image are
// removed first; an episode whose pool empties out is skipped.
std::vector<Episode> sample_episodes(const Dataset& dataset, const SplitSpec& split,
                                     Partition partition, int k, int runs,
                                     std::uint64_t seed,
                                     bool exclude_same_image = false);

struct TrainingReference {
    int category_id = 0;
    int reference_ann_id = 0;
    std::vector<int> background_ann_ids;  // other-category annotations in the image
};

// Uniform category choice among training-split categories present in the
// image, then a uniform reference from that category's instances in *other*
// images. Errors when the chosen category exists nowhere else.
TrainingReference sample_training_reference(const Dataset& dataset, int image_id,
                                            const SplitSpec& split,
                                            std::uint64_t seed);

}  // namespace osb
