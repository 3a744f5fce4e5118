#include "osb/episodes.hpp"

#include <algorithm>
#include <stdexcept>

#include "osb/errors.hpp"
#include "osb/rng.hpp"

namespace osb {

const std::array<const char*, 80>& canonical_categories() {
    static const std::array<const char*, 80> names = {
        "person",        "bicycle",      "car",           "motorcycle",
        "airplane",      "bus",          "train",         "truck",
        "boat",          "traffic light", "fire hydrant",  "stop sign",
        "parking meter", "bench",        "bird",          "cat",
        "dog",           "horse",        "sheep",         "cow",
        "elephant",      "bear",         "zebra",         "giraffe",
        "backpack",      "umbrella",     "handbag",       "tie",
        "suitcase",      "frisbee",      "skis",          "snowboard",
        "sports ball",   "kite",         "baseball bat",  "baseball glove",
        "skateboard",    "surfboard",    "tennis racket", "bottle",
        "wine glass",    "cup",          "fork",          "knife",
        "spoon",         "bowl",         "banana",        "apple",
        "sandwich",      "orange",       "broccoli",      "carrot",
        "hot dog",       "pizza",        "donut",         "cake",
        "chair",         "couch",        "potted plant",  "bed",
        "dining table",  "toilet",       "tv",            "laptop",
        "mouse",         "remote",       "keyboard",      "cell phone",
        "microwave",     "oven",         "toaster",       "sink",
        "refrigerator",  "book",         "clock",         "vase",
        "scissors",      "teddy bear",   "hair drier",    "toothbrush"};
    return names;
}

SplitSpec make_split(int i) {
    if (i < 1 || i > 4)
        throw std::invalid_argument("make_split: index must be in 1..4, got " +
                                    std::to_string(i));
    SplitSpec s;
    s.index = i;
    std::array<bool, 81> is_test{};
    for (int p = i; p <= 80; p += 4) {
        s.test_ids.push_back(p);
        is_test[static_cast<std::size_t>(p)] = true;
    }
    for (int p = 1; p <= 80; ++p)
        if (!is_test[static_cast<std::size_t>(p)]) s.train_ids.push_back(p);
    return s;
}

std::vector<int> split_category_ids(const Dataset& dataset, const SplitSpec& split,
                                    Partition partition) {
    const std::vector<int> all = dataset.category_ids();
    const std::vector<int>& positions =
        partition == Partition::test ? split.test_ids : split.train_ids;
    std::vector<int> out;
    for (int p : positions)
        if (p >= 1 && p <= static_cast<int>(all.size()))
            out.push_back(all[static_cast<std::size_t>(p - 1)]);
    return out;
}

std::string episode_key(int run, int image_id, int category_id) {
    return "r" + std::to_string(run) + "-i" + std::to_string(image_id) + "-c" +
           std::to_string(category_id);
}

namespace {

std::vector<int> draw_references(const std::vector<std::pair<int, int>>& pool,
                                 int k, Rng& rng) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    if (pool.size() >= static_cast<std::size_t>(k)) {
        // Without replacement: partial Fisher-Yates over pool indices.
        std::vector<std::size_t> idx(pool.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (int i = 0; i < k; ++i) {
            const std::size_t j =
                static_cast<std::size_t>(i) +
                static_cast<std::size_t>(rng.below(idx.size() - static_cast<std::size_t>(i)));
            std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
            out.push_back(pool[idx[static_cast<std::size_t>(i)]].second);
        }
    } else {
        for (int i = 0; i < k; ++i)
            out.push_back(pool[static_cast<std::size_t>(rng.below(pool.size()))].second);
    }
    return out;
}

}  // namespace

std::vector<Episode> sample_episodes(const Dataset& dataset, const SplitSpec& split,
                                     Partition partition, int k, int runs,
                                     std::uint64_t seed, bool exclude_same_image) {
    if (k < 1) throw std::invalid_argument("sample_episodes: k must be >= 1");
    if (runs < 1) throw std::invalid_argument("sample_episodes: runs must be >= 1");

    const std::vector<int> categories = split_category_ids(dataset, split, partition);

    std::vector<Episode> out;
    for (int run = 1; run <= runs; ++run) {
        for (const ImageRecord& img : dataset.images) {
            for (int cat : categories) {
                const auto pool_it = dataset.presence_index.find(cat);
                if (pool_it == dataset.presence_index.end()) continue;
                const auto& pool = pool_it->second;

                // Present = at least one non-crowd annotation in this image.
                const auto lo = std::lower_bound(
                    pool.begin(), pool.end(), std::make_pair(img.id, 0));
                if (lo == pool.end() || lo->first != img.id) continue;

                Episode ep;
                ep.run = run;
                ep.image_id = img.id;
                ep.category_id = cat;
                ep.episode_id = episode_key(run, img.id, cat);

                Rng rng = make_rng(seed, RngDomain::episode_sampling,
                                   {static_cast<std::uint64_t>(run),
                                    static_cast<std::uint64_t>(img.id),
                                    static_cast<std::uint64_t>(cat)});
                if (exclude_same_image) {
                    std::vector<std::pair<int, int>> filtered;
                    filtered.reserve(pool.size());
                    for (const auto& e : pool)
                        if (e.first != img.id) filtered.push_back(e);
                    if (filtered.empty()) continue;
                    ep.reference_ann_ids = draw_references(filtered, k, rng);
                } else {
                    ep.reference_ann_ids = draw_references(pool, k, rng);
                }
                out.push_back(std::move(ep));
            }
        }
    }
    return out;
}

TrainingReference sample_training_reference(const Dataset& dataset, int image_id,
                                            const SplitSpec& split,
                                            std::uint64_t seed) {
    const ImageRecord& img = dataset.image(image_id);
    const std::vector<int> train_cats =
        split_category_ids(dataset, split, Partition::train);

    std::vector<int> present;
    for (int cat : train_cats) {
        const auto it = dataset.presence_index.find(cat);
        if (it == dataset.presence_index.end()) continue;
        const auto lo = std::lower_bound(it->second.begin(), it->second.end(),
                                         std::make_pair(img.id, 0));
        if (lo != it->second.end() && lo->first == img.id) present.push_back(cat);
    }
    if (present.empty())
        throw std::invalid_argument("sample_training_reference: image " +
                                    std::to_string(image_id) +
                                    " contains no training-split category");

    Rng rng = make_rng(seed, RngDomain::training_reference,
                       {static_cast<std::uint64_t>(image_id)});
    const int cat = present[static_cast<std::size_t>(rng.below(present.size()))];

    std::vector<std::pair<int, int>> pool;
    for (const auto& e : dataset.presence_index.at(cat))
        if (e.first != image_id) pool.push_back(e);
    if (pool.empty())
        throw MismatchError("sample_training_reference: category " +
                            std::to_string(cat) + " has instances only in image " +
                            std::to_string(image_id));

    TrainingReference out;
    out.category_id = cat;
    out.reference_ann_id =
        pool[static_cast<std::size_t>(rng.below(pool.size()))].second;
    for (int ann_idx : dataset.annotations_by_image.at(image_id)) {
        const AnnotationRecord& ann = dataset.annotations[static_cast<std::size_t>(ann_idx)];
        if (ann.category_id != cat) out.background_ann_ids.push_back(ann.id);
    }
    return out;
}

}  // namespace osb
