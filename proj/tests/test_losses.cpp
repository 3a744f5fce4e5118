#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "osb/losses.hpp"
#include "testutil.hpp"

using namespace osb;

namespace {

std::vector<Box> random_boxes(int n, std::mt19937_64& g) {
    std::uniform_real_distribution<double> pos(0.0, 100.0), side(1.0, 30.0);
    std::vector<Box> out;
    for (int i = 0; i < n; ++i) out.push_back(box_from_xywh(pos(g), pos(g), side(g), side(g)));
    return out;
}

int count_of(const RpnTargets& t, AnchorLabel l) {
    int n = 0;
    for (AnchorLabel x : t.labels) n += (x == l);
    return n;
}

}  // namespace

TEST_CASE("total_loss applies the published component weights") {
    const LossBreakdown unit = total_loss(1, 1, 1, 1, 1);
    CHECK(unit.total == doctest::Approx(5.6).epsilon(1e-12));
    CHECK(unit.rpn_cls == 1.0);
    CHECK(unit.mask == 1.0);

    CHECK(total_loss(0, 0, 0, 0, 0).total == 0.0);
    CHECK(total_loss(1, 0, 0, 0, 0).total == 2.0);
    CHECK(total_loss(0, 1, 0, 0, 0).total == 0.1);
    CHECK(total_loss(0, 0, 1, 0, 0).total == 2.0);
    CHECK(total_loss(0, 0, 0, 1, 0).total == 0.5);
    CHECK(total_loss(0, 0, 0, 0, 1).total == 1.0);

    // Linear in every component.
    auto g = testutil::rng(11);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int i = 0; i < 50; ++i) {
        const double a = u(g), b = u(g), c = u(g), d = u(g), e = u(g);
        const double whole = total_loss(a, b, c, d, e).total;
        const double parts = total_loss(a, 0, 0, 0, 0).total +
                             total_loss(0, b, 0, 0, 0).total +
                             total_loss(0, 0, c, 0, 0).total +
                             total_loss(0, 0, 0, d, 0).total +
                             total_loss(0, 0, 0, 0, e).total;
        CHECK(whole == doctest::Approx(parts).epsilon(1e-12));
        CHECK(total_loss(2 * a, 0, 0, 0, 0).total ==
              doctest::Approx(2 * total_loss(a, 0, 0, 0, 0).total).epsilon(1e-15));
    }

    CHECK_THROWS_AS(total_loss(-0.1, 0, 0, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(total_loss(0, 0, std::nan(""), 0, 0), std::invalid_argument);
}

TEST_CASE("bce is log loss with probability clamping") {
    CHECK(bce(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(bce(0.5, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(bce(0.25, 1) == doctest::Approx(-std::log(0.25)).epsilon(1e-15));
    CHECK(bce(0.25, 0) == doctest::Approx(-std::log(0.75)).epsilon(1e-15));

    // Saturated predictions clamp at 1e-7 instead of diverging.
    CHECK(bce(1.0, 1) == doctest::Approx(-std::log(1.0 - 1e-7)).epsilon(1e-12));
    CHECK(bce(0.0, 1) == -std::log(1e-7));
    // Target 0 clamps 1.0 down to 1 - 1e-7; 1 - (1 - 1e-7) reproduces 1e-7
    // only to rounding, so this direction is near-exact rather than bitwise.
    CHECK(bce(1.0, 0) == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));
    CHECK(bce(1e-12, 1) == bce(0.0, 1));
    CHECK_THROWS_AS(bce(0.5, 2), std::invalid_argument);
    CHECK_THROWS_AS(bce(0.5, -1), std::invalid_argument);

    CHECK(bce_mean({}, {}) == 0.0);
    CHECK(bce_mean({0.5, 0.25}, {1, 0}) ==
          doctest::Approx(0.5 * (std::log(2.0) - std::log(0.75))).epsilon(1e-12));
    CHECK_THROWS_AS(bce_mean({0.5}, {1, 0}), std::invalid_argument);
}

TEST_CASE("smooth_l1 is elementwise Huber averaged over components") {
    const BoxDeltas zero{};
    CHECK(smooth_l1(zero, zero) == 0.0);
    CHECK(smooth_l1(BoxDeltas{0.5, 0, 0, 0}, zero) == doctest::Approx(0.125 / 4));
    CHECK(smooth_l1(BoxDeltas{2.0, 0, 0, 0}, zero) == doctest::Approx(1.5 / 4));
    // Quadratic/linear crossover at |d| = 1 is continuous.
    CHECK(smooth_l1(BoxDeltas{1.0, 0, 0, 0}, zero) == doctest::Approx(0.5 / 4));
    CHECK(smooth_l1(BoxDeltas{1.0 + 1e-9, 0, 0, 0}, zero) ==
          doctest::Approx(0.5 / 4).epsilon(1e-8));
    // Symmetric and shift-invariant.
    CHECK(smooth_l1(BoxDeltas{-0.3, 0.7, -2.0, 0.1}, zero) ==
          smooth_l1(BoxDeltas{0.3, -0.7, 2.0, -0.1}, zero));
    CHECK(smooth_l1(BoxDeltas{5.3, 0, 0, 0}, BoxDeltas{5.0, 0, 0, 0}) ==
          doctest::Approx(smooth_l1(BoxDeltas{0.3, 0, 0, 0}, zero)).epsilon(1e-12));

    const std::vector<BoxDeltas> p = {{1, 0, 0, 0}, {0, 0, 0, 0}};
    const std::vector<BoxDeltas> t = {{0, 0, 0, 0}, {0, 0, 0, 0}};
    CHECK(smooth_l1(p, t) == doctest::Approx(0.5 / 8));
    CHECK(smooth_l1(std::vector<BoxDeltas>{}, {}) == 0.0);
    CHECK_THROWS_AS(smooth_l1(p, std::vector<BoxDeltas>{t[0]}), std::invalid_argument);
}

TEST_CASE("mask_bce averages pixel losses over the map") {
    Tensor pred({2, 2}), target({2, 2});
    for (float& v : pred.data) v = 0.5f;
    target(0, 0) = 1.0f;
    CHECK(mask_bce(pred, target) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    pred(0, 0) = 1.0f;
    pred(0, 1) = 0.0f;
    pred(1, 0) = 0.0f;
    pred(1, 1) = 0.0f;
    target = Tensor({2, 2});
    target(0, 0) = 1.0f;
    CHECK(mask_bce(pred, target) ==
          doctest::Approx(-std::log(1.0 - 1e-7)).epsilon(1e-9));

    Tensor bad({2, 2});
    bad(1, 1) = 0.5f;
    CHECK_THROWS_AS(mask_bce(pred, bad), std::invalid_argument);
    CHECK_THROWS_AS(mask_bce(pred, Tensor({2, 3})), std::invalid_argument);
    CHECK_THROWS_AS(mask_bce(Tensor({2, 2, 1}), Tensor({2, 2, 1})), std::invalid_argument);
}

TEST_CASE("rpn labels match the exhaustive oracle before sampling") {
    auto g = testutil::rng(12);
    for (int trial = 0; trial < 60; ++trial) {
        const std::vector<Box> anchors = random_boxes(120, g);
        std::vector<Box> gts = random_boxes(trial % 6, g);
        if (trial % 7 == 0 && !gts.empty()) gts.push_back(gts[0]);  // exact tie

        const int n = int(anchors.size());
        // sample >= n with full positive fraction disables subsampling.
        const RpnTargets got = assign_rpn_targets(anchors, gts, 0.7, 0.3, n, 1.0, 0);
        const oracle::RefRpnLabels want = oracle::assign_rpn_ref(anchors, gts, 0.7, 0.3);
        for (int a = 0; a < n; ++a) {
            const int label = got.labels[std::size_t(a)] == AnchorLabel::positive ? 1
                              : got.labels[std::size_t(a)] == AnchorLabel::negative ? 0
                                                                                    : -1;
            REQUIRE(label == want.label[std::size_t(a)]);
            if (label == 1) {
                // Matched gt is the best-IoU gt, lowest index on ties.
                double best = -1.0;
                int arg = -1;
                for (std::size_t j = 0; j < gts.size(); ++j) {
                    const double iou = box_iou(anchors[std::size_t(a)], gts[j]);
                    if (iou > best) best = iou, arg = int(j);
                }
                REQUIRE(got.matched_gt[std::size_t(a)] == arg);
            } else {
                REQUIRE(got.matched_gt[std::size_t(a)] == -1);
            }
        }
    }
}

TEST_CASE("a gt always recruits its best anchor even below the threshold") {
    const std::vector<Box> anchors = {box_from_xywh(0, 0, 10, 10),
                                      box_from_xywh(50, 50, 10, 10)};
    const std::vector<Box> gts = {box_from_xywh(4, 4, 10, 10)};  // IoU ~ 0.2 with anchor 0
    const RpnTargets t = assign_rpn_targets(anchors, gts, 0.7, 0.3, 256, 0.5, 0);
    CHECK(t.labels[0] == AnchorLabel::positive);
    CHECK(t.matched_gt[0] == 0);
    CHECK(t.labels[1] == AnchorLabel::negative);
}

TEST_CASE("rpn batch sampling keeps the caps and only flips to ignore") {
    const Box gt = box_from_xywh(10, 10, 20, 20);
    std::vector<Box> anchors(400, gt);                      // all positive
    for (int i = 0; i < 500; ++i) anchors.push_back(box_from_xywh(500 + 40.0 * i, 500, 20, 20));

    const RpnTargets full =
        assign_rpn_targets(anchors, {gt}, 0.7, 0.3, int(anchors.size()), 1.0, 7);
    const RpnTargets sampled = assign_rpn_targets(anchors, {gt}, 0.7, 0.3, 256, 0.5, 7);

    CHECK(count_of(full, AnchorLabel::positive) == 400);
    CHECK(count_of(full, AnchorLabel::negative) == 500);
    CHECK(count_of(sampled, AnchorLabel::positive) == 128);
    CHECK(count_of(sampled, AnchorLabel::negative) == 128);
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        if (sampled.labels[a] == AnchorLabel::ignore) continue;
        // Survivors keep their pre-sampling label and match.
        REQUIRE(sampled.labels[a] == full.labels[a]);
        if (sampled.labels[a] == AnchorLabel::positive)
            REQUIRE(sampled.matched_gt[a] == full.matched_gt[a]);
    }

    const RpnTargets again = assign_rpn_targets(anchors, {gt}, 0.7, 0.3, 256, 0.5, 7);
    CHECK(again.labels == sampled.labels);
    CHECK(again.matched_gt == sampled.matched_gt);
    const RpnTargets other = assign_rpn_targets(anchors, {gt}, 0.7, 0.3, 256, 0.5, 8);
    CHECK(count_of(other, AnchorLabel::positive) == 128);
    CHECK(other.labels != sampled.labels);

    // Fewer positives than the cap: the shortfall goes to negatives.
    std::vector<Box> sparse(10, gt);
    for (int i = 0; i < 500; ++i) sparse.push_back(box_from_xywh(500 + 40.0 * i, 500, 20, 20));
    const RpnTargets s = assign_rpn_targets(sparse, {gt}, 0.7, 0.3, 256, 0.5, 0);
    CHECK(count_of(s, AnchorLabel::positive) == 10);
    CHECK(count_of(s, AnchorLabel::negative) == 246);
}

TEST_CASE("rpn with no gt boxes labels everything negative then samples") {
    const std::vector<Box> anchors(600, box_from_xywh(0, 0, 10, 10));
    const RpnTargets t = assign_rpn_targets(anchors, {}, 0.7, 0.3, 256, 0.5, 3);
    CHECK(count_of(t, AnchorLabel::positive) == 0);
    CHECK(count_of(t, AnchorLabel::negative) == 256);
    CHECK(count_of(t, AnchorLabel::ignore) == 344);
    for (int m : t.matched_gt) CHECK(m == -1);
}
