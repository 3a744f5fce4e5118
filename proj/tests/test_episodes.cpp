#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "osb/episodes.hpp"
#include "osb/errors.hpp"
#include "testutil.hpp"

using namespace osb;
using testutil::DatasetBuilder;

namespace {

// Eight categories with gappy ids; split 1 tests positions {1, 5} -> ids {2, 31}.
DatasetBuilder toy_base() {
    DatasetBuilder b;
    const int ids[8] = {2, 4, 9, 13, 31, 32, 40, 77};
    for (int i = 0; i < 8; ++i) b.category(ids[i], "cat" + std::to_string(ids[i]));
    b.image(1, 100, 100).image(2, 100, 100).image(3, 100, 100);
    return b;
}

std::string name_at(int position) { return canonical_categories()[std::size_t(position - 1)]; }

}  // namespace

TEST_CASE("canonical category order pins positions to names") {
    const auto& names = canonical_categories();
    CHECK(std::string(names[0]) == "person");
    CHECK(std::string(names[79]) == "toothbrush");
    CHECK(std::string(names[2]) == "car");
    CHECK(std::string(names[60]) == "dining table");
    const std::set<std::string> unique(names.begin(), names.end());
    CHECK(unique.size() == 80);
}

TEST_CASE("splits take every fourth canonical position") {
    for (int i = 1; i <= 4; ++i) {
        const SplitSpec s = make_split(i);
        REQUIRE(s.index == i);
        REQUIRE(s.test_ids.size() == 20);
        REQUIRE(s.train_ids.size() == 60);
        for (std::size_t j = 0; j < s.test_ids.size(); ++j)
            REQUIRE(s.test_ids[j] == i + 4 * int(j));
        std::set<int> overlap;
        std::set_intersection(s.test_ids.begin(), s.test_ids.end(),
                              s.train_ids.begin(), s.train_ids.end(),
                              std::inserter(overlap, overlap.begin()));
        CHECK(overlap.empty());
    }

    // First test categories by name, per the published table.
    CHECK(name_at(make_split(1).test_ids[0]) == "person");
    CHECK(name_at(make_split(1).test_ids[1]) == "airplane");
    CHECK(name_at(make_split(1).test_ids[2]) == "boat");
    CHECK(name_at(make_split(2).test_ids[0]) == "bicycle");
    CHECK(name_at(make_split(2).test_ids[1]) == "bus");
    CHECK(name_at(make_split(2).test_ids[2]) == "traffic light");
    CHECK(name_at(make_split(3).test_ids[0]) == "car");
    CHECK(name_at(make_split(3).test_ids[1]) == "train");
    CHECK(name_at(make_split(3).test_ids[2]) == "fire hydrant");
    CHECK(name_at(make_split(4).test_ids[0]) == "motorcycle");
    CHECK(name_at(make_split(4).test_ids[1]) == "truck");
    CHECK(name_at(make_split(4).test_ids[2]) == "stop sign");

    // The four test sets partition all 80 positions.
    std::set<int> all;
    for (int i = 1; i <= 4; ++i)
        for (int p : make_split(i).test_ids) REQUIRE(all.insert(p).second);
    CHECK(all.size() == 80);
    CHECK(*all.begin() == 1);
    CHECK(*all.rbegin() == 80);

    CHECK_THROWS_AS(make_split(0), std::invalid_argument);
    CHECK_THROWS_AS(make_split(5), std::invalid_argument);
}

TEST_CASE("split_category_ids maps positions onto sorted dataset ids") {
    DatasetBuilder b = toy_base();
    b.box_ann(1, 1, 2, 0, 0, 10, 10);
    const Dataset d = b.build();
    const SplitSpec s1 = make_split(1);
    // Dataset ids sorted: 2,4,9,13,31,32,40,77. Positions beyond 8 fall away.
    CHECK(split_category_ids(d, s1, Partition::test) == std::vector<int>{2, 31});
    CHECK(split_category_ids(d, s1, Partition::train) ==
          std::vector<int>{4, 9, 13, 32, 40, 77});
    CHECK(split_category_ids(d, make_split(4), Partition::test) ==
          std::vector<int>{13, 77});
}

TEST_CASE("episode keys carry run, image, and category") {
    CHECK(episode_key(2, 10, 5) == "r2-i10-c5");
    CHECK(episode_key(1, 123456, 90) == "r1-i123456-c90");
}

TEST_CASE("episodes enumerate present split categories per image and run") {
    DatasetBuilder b = toy_base();
    b.box_ann(1, 1, 2, 0, 0, 10, 10)
        .box_ann(2, 1, 2, 20, 0, 10, 10)
        .box_ann(3, 1, 31, 0, 20, 10, 10, /*crowd=*/true)  // crowd only: absent
        .box_ann(4, 2, 31, 0, 0, 10, 10)
        .box_ann(5, 2, 4, 0, 20, 10, 10)                   // train category
        .box_ann(6, 3, 31, 5, 5, 12, 12)
        .box_ann(7, 3, 31, 30, 5, 12, 12);
    const Dataset d = b.build();
    const SplitSpec s1 = make_split(1);

    const std::vector<Episode> eps =
        sample_episodes(d, s1, Partition::test, 2, 2, 99);

    // Brute-force expected set: (run, image, cat in {2, 31} with non-crowd ann).
    std::set<std::string> want;
    for (int run = 1; run <= 2; ++run) {
        want.insert(episode_key(run, 1, 2));
        want.insert(episode_key(run, 2, 31));
        want.insert(episode_key(run, 3, 31));
    }
    std::set<std::string> got;
    for (const Episode& e : eps) REQUIRE(got.insert(e.episode_id).second);
    CHECK(got == want);

    for (const Episode& e : eps) {
        REQUIRE(e.reference_ann_ids.size() == 2);
        REQUIRE(e.episode_id == episode_key(e.run, e.image_id, e.category_id));
        for (int ann_id : e.reference_ann_ids) {
            const AnnotationRecord& a = d.annotation(ann_id);
            REQUIRE(a.category_id == e.category_id);
            REQUIRE(a.iscrowd == false);
        }
    }

    SUBCASE("draws come from per-episode streams, so runs do not interact") {
        const std::vector<Episode> one_run =
            sample_episodes(d, s1, Partition::test, 2, 1, 99);
        std::vector<Episode> first;
        for (const Episode& e : eps)
            if (e.run == 1) first.push_back(e);
        REQUIRE(first.size() == one_run.size());
        for (std::size_t i = 0; i < first.size(); ++i) {
            CHECK(first[i].episode_id == one_run[i].episode_id);
            CHECK(first[i].reference_ann_ids == one_run[i].reference_ann_ids);
        }
    }

    SUBCASE("same seed reproduces, a different seed moves some draw") {
        const std::vector<Episode> again =
            sample_episodes(d, s1, Partition::test, 2, 2, 99);
        REQUIRE(again.size() == eps.size());
        for (std::size_t i = 0; i < eps.size(); ++i)
            CHECK(again[i].reference_ann_ids == eps[i].reference_ann_ids);
        const std::vector<Episode> other =
            sample_episodes(d, s1, Partition::test, 2, 2, 100);
        bool any_diff = false;
        for (std::size_t i = 0; i < eps.size(); ++i)
            any_diff |= other[i].reference_ann_ids != eps[i].reference_ann_ids;
        CHECK(any_diff);
    }
}

TEST_CASE("reference draws avoid repeats only while the pool lasts") {
    DatasetBuilder b = toy_base();
    // Category 2: four instances. Category 31: one instance.
    b.box_ann(1, 1, 2, 0, 0, 10, 10)
        .box_ann(2, 1, 2, 20, 0, 10, 10)
        .box_ann(3, 2, 2, 0, 0, 10, 10)
        .box_ann(4, 2, 2, 20, 0, 10, 10)
        .box_ann(5, 3, 31, 0, 0, 10, 10);
    const Dataset d = b.build();
    const SplitSpec s1 = make_split(1);

    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const std::vector<Episode> eps =
            sample_episodes(d, s1, Partition::test, 3, 1, seed);
        for (const Episode& e : eps) {
            REQUIRE(e.reference_ann_ids.size() == 3);
            if (e.category_id == 2) {
                // Pool of 4 >= k=3: no repeats.
                std::set<int> unique(e.reference_ann_ids.begin(),
                                     e.reference_ann_ids.end());
                REQUIRE(unique.size() == 3);
            } else {
                // Pool of 1 < k=3: with replacement, always the lone instance.
                for (int id : e.reference_ann_ids) REQUIRE(id == 5);
            }
        }
    }

    CHECK_THROWS_AS(sample_episodes(d, s1, Partition::test, 0, 1, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(sample_episodes(d, s1, Partition::test, 1, 0, 0),
                    std::invalid_argument);
}

TEST_CASE("excluding the query image narrows or kills the pool") {
    DatasetBuilder b = toy_base();
    b.box_ann(1, 1, 2, 0, 0, 10, 10)     // cat 2 lives only in image 1
        .box_ann(2, 2, 31, 0, 0, 10, 10)
        .box_ann(3, 3, 31, 0, 0, 10, 10);
    const Dataset d = b.build();
    const SplitSpec s1 = make_split(1);

    const std::vector<Episode> open =
        sample_episodes(d, s1, Partition::test, 1, 1, 5);
    CHECK(open.size() == 3);

    const std::vector<Episode> strict =
        sample_episodes(d, s1, Partition::test, 1, 1, 5, /*exclude_same_image=*/true);
    REQUIRE(strict.size() == 2);  // the cat-2 episode loses its whole pool
    for (const Episode& e : strict) {
        CHECK(e.category_id == 31);
        for (int ann_id : e.reference_ann_ids)
            CHECK(d.annotation(ann_id).image_id != e.image_id);
    }
}

TEST_CASE("training references pick a present category uniformly") {
    DatasetBuilder b = toy_base();
    // Image 1 presents train categories 4 and 9; both have two instances elsewhere.
    b.box_ann(1, 1, 4, 0, 0, 10, 10)
        .box_ann(2, 1, 9, 20, 0, 10, 10)
        .box_ann(3, 1, 2, 40, 0, 10, 10)  // test category: never chosen
        .box_ann(4, 2, 4, 0, 0, 10, 10)
        .box_ann(5, 2, 9, 20, 0, 10, 10)
        .box_ann(6, 3, 4, 0, 0, 10, 10)
        .box_ann(7, 3, 9, 20, 0, 10, 10);
    const Dataset d = b.build();
    const SplitSpec s1 = make_split(1);

    std::map<int, int> cat_count;
    std::map<int, int> ref_count;
    const int trials = 10000;
    for (int seed = 0; seed < trials; ++seed) {
        const TrainingReference r = sample_training_reference(d, 1, s1, std::uint64_t(seed));
        REQUIRE((r.category_id == 4 || r.category_id == 9));
        REQUIRE(d.annotation(r.reference_ann_id).image_id != 1);
        REQUIRE(d.annotation(r.reference_ann_id).category_id == r.category_id);
        ++cat_count[r.category_id];
        ++ref_count[r.reference_ann_id];
        // Background: annotations in the image outside the chosen category.
        std::set<int> bg(r.background_ann_ids.begin(), r.background_ann_ids.end());
        const std::set<int> want =
            r.category_id == 4 ? std::set<int>{2, 3} : std::set<int>{1, 3};
        REQUIRE(bg == want);
    }
    // Binomial(10000, 1/2): sd = 50, allow 3.5 sigma.
    CHECK(std::abs(cat_count[4] - trials / 2) < 175);
    // Reference within the category ~ Binomial(n_cat, 1/2) as well.
    CHECK(std::abs(ref_count[4] - ref_count[6]) < 300);

    // Image 3's only category-4 twin pool excludes itself but not others.
    const TrainingReference r3 = sample_training_reference(d, 3, s1, 0);
    CHECK(d.annotation(r3.reference_ann_id).image_id != 3);
}

TEST_CASE("training reference error cases") {
    DatasetBuilder b = toy_base();
    b.box_ann(1, 1, 2, 0, 0, 10, 10)      // test category only
        .box_ann(2, 2, 4, 0, 0, 10, 10);  // train category, single instance
    const Dataset d = b.build();
    const SplitSpec s1 = make_split(1);

    // Image 1 presents no training-split category.
    CHECK_THROWS_AS(sample_training_reference(d, 1, s1, 0), std::invalid_argument);
    // Image 2's sole training category exists nowhere else.
    CHECK_THROWS_AS(sample_training_reference(d, 2, s1, 0), MismatchError);
    // Unknown image id surfaces from the dataset accessor.
    CHECK_THROWS_AS(sample_training_reference(d, 99, s1, 0), std::exception);
}
