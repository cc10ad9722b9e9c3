#include "rgdet/box_loss.hpp"
#include "rgdet/error.hpp"
#include "rgdet/rng.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace rgdet;

namespace {

GaussianDistribution3D gaussian(Vec3 mu, Mat3 sigma) { return {mu, sigma, std::nullopt}; }

Box3D random_box(Rng& rng) {
    return {rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-2, 2), rng.uniform(0.3, 6.0),
            rng.uniform(0.3, 3.0),  rng.uniform(0.3, 3.0), rng.uniform(-std::numbers::pi, std::numbers::pi)};
}

Box3D perturb(const Box3D& b, Rng& rng) {
    return {b.x + rng.normal(), b.y + rng.normal(), b.z + 0.3 * rng.normal(), b.l * rng.uniform(0.6, 1.5),
            b.w * rng.uniform(0.6, 1.5), b.h * rng.uniform(0.6, 1.5), b.theta + 0.5 * rng.normal()};
}

} // namespace

TEST(BoxToGaussian, Examples) {
    const auto g = box_to_gaussian({0, 0, 0, 2, 2, 2, 0}, 1.0);
    EXPECT_EQ(g.mu, (Vec3{0, 0, 0}));
    for (int i = 0; i < 9; ++i) EXPECT_EQ(g.sigma.m[i], Mat3::identity().m[i]);

    const auto q = box_to_gaussian({1, 2, 3, 2, 4, 6, std::numbers::pi / 2}, 1.0);
    EXPECT_EQ(q.mu, (Vec3{1, 2, 3}));
    const Mat3 expect = Mat3::diag({4, 1, 9});
    for (int i = 0; i < 9; ++i) EXPECT_NEAR(q.sigma.m[i], expect.m[i], 1e-12);
    EXPECT_NEAR(*q.log_det, std::log(36.0), 1e-14);
}

TEST(BoxToGaussian, HalfTurnSymmetry) {
    Rng rng(1);
    for (int t = 0; t < 200; ++t) {
        Box3D b = random_box(rng);
        const auto g0 = box_to_gaussian(b, 2.0);
        b.theta += std::numbers::pi;
        const auto g1 = box_to_gaussian(b, 2.0);
        for (int i = 0; i < 9; ++i) EXPECT_NEAR(g0.sigma.m[i], g1.sigma.m[i], 1e-12);
    }
}

TEST(BoxToGaussian, DegenerateBoxes) {
    const auto g = box_to_gaussian({0, 0, 0, 0.0, 1, 1, 0}, 1.0);
    EXPECT_DOUBLE_EQ(g.sigma(0, 0), std::pow(kBoxSizeFloor / 2.0, 2));
    try {
        box_to_gaussian({0, 0, 0, 1e-4, 1, 1, 0}, 1.0, true);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "DegenerateBox");
    }
    EXPECT_THROW(box_to_gaussian({0, 0, 0, 1, 1, 1, 0}, 0.0), Error);
}

TEST(KlDivergence, Examples) {
    const auto id = gaussian({0, 0, 0}, Mat3::identity());
    EXPECT_EQ(kl_divergence(id, id).total, 0.0);

    const auto shifted = gaussian({1, 0, 0}, Mat3::identity());
    const KlTerms t = kl_divergence(shifted, id);
    EXPECT_NEAR(t.total, 0.5, 1e-12);
    EXPECT_EQ(t.mahalanobis, 1.0);
    EXPECT_EQ(t.trace, 3.0);
    EXPECT_EQ(t.logdet, 0.0);

    const auto wide = gaussian({0, 0, 0}, Mat3::diag({4, 4, 4}));
    const double expect = 0.5 * (9.0 - 6.0 * std::log(2.0));
    EXPECT_NEAR(kl_divergence(wide, id).total, expect, 1e-12);
    EXPECT_NEAR(expect, 2.4205584, 1e-7);
}

TEST(KlDivergence, MonteCarloCrossCheck) {
    const double mc = oracle::monte_carlo_kl(Mat3::diag({4, 4, 4}), {0, 0, 0}, Mat3::identity(), {0, 0, 0}, 200000, 7);
    EXPECT_NEAR(mc, 0.5 * (9.0 - 6.0 * std::log(2.0)), 0.03);

    Rng rng(5);
    const auto a = box_to_gaussian(random_box(rng), 1.0);
    const auto b = box_to_gaussian(perturb({a.mu[0], a.mu[1], a.mu[2], 2, 1, 1.5, 0.3}, rng), 1.0);
    const double exact = kl_divergence(a, b).total;
    const double est = oracle::monte_carlo_kl(a.sigma, a.mu, b.sigma, b.mu, 200000, 11);
    EXPECT_NEAR(est, exact, 0.05 * std::max(1.0, exact));
}

TEST(KlDivergence, IdenticalIsExactlyZero) {
    Rng rng(2);
    for (int t = 0; t < 1000; ++t) {
        const auto g = box_to_gaussian(random_box(rng), rng.uniform(0.5, 3.0));
        EXPECT_EQ(kl_divergence(g, g).total, 0.0);
        const auto raw = gaussian(g.mu, g.sigma);
        EXPECT_EQ(kl_divergence(raw, raw).total, 0.0);
    }
}

TEST(KlDivergence, DirectionUsesPredictedCovarianceInTrace) {
    const auto a = gaussian({0, 0, 0}, Mat3::diag({4, 1, 1}));
    const auto b = gaussian({0, 0, 0}, Mat3::identity());
    EXPECT_DOUBLE_EQ(kl_divergence(a, b).trace, 6.0);     // tr(I^-1 diag(4,1,1))
    EXPECT_DOUBLE_EQ(kl_divergence(b, a).trace, 2.25);    // tr(diag(1/4,1,1) I)
    EXPECT_NE(kl_divergence(a, b).total, kl_divergence(b, a).total);
}

TEST(KlDivergence, SingularTarget) {
    const auto a = gaussian({0, 0, 0}, Mat3::identity());
    const auto s = gaussian({0, 0, 0}, Mat3::diag({1, 1, 0}));
    try {
        kl_divergence(a, s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "SingularCovariance");
    }
}

TEST(KlDivergence, RigidMotionInvariance) {
    Rng rng(3);
    for (int t = 0; t < 500; ++t) {
        const Box3D p = random_box(rng), g = perturb(p, rng);
        const double base = kl_divergence(box_to_gaussian(p, 1.0), box_to_gaussian(g, 1.0)).total;
        const double phi = rng.uniform(-3, 3);
        const Vec3 shift{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-1, 1)};
        auto move = [&](Box3D b) {
            const Vec3 c = rot_z(phi) * Vec3{b.x, b.y, b.z};
            b.x = c[0] + shift[0];
            b.y = c[1] + shift[1];
            b.z = c[2] + shift[2];
            b.theta += phi;
            return b;
        };
        const double moved = kl_divergence(box_to_gaussian(move(p), 1.0), box_to_gaussian(move(g), 1.0)).total;
        EXPECT_NEAR(moved, base, 1e-10 * std::max(1.0, base));
    }
}

TEST(Bgl, BatchContract) {
    const BglConfig cfg;
    const Box3D unit{0, 0, 0, 2, 2, 2, 0};
    Box3D shifted = unit;
    shifted.x = 1.0;
    EXPECT_EQ(bgl({unit, unit}, {unit, unit}, {}, cfg), 0.0);
    EXPECT_NEAR(bgl({shifted}, {unit}, {}, cfg), 0.5, 1e-12);

    Rng rng(4);
    const Box3D a = random_box(rng), b = perturb(a, rng), c = random_box(rng), d = perturb(c, rng);
    const double v1 = bgl({b}, {a}, {"car"}, cfg), v2 = bgl({d}, {c}, {"pedestrian"}, cfg);
    EXPECT_NEAR(bgl({b, d}, {a, c}, {"car", "pedestrian"}, cfg), 0.5 * (v1 + v2), 1e-12);

    try {
        bgl({}, {}, {}, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "EmptyBatch");
    }
    try {
        bgl({unit}, {unit, unit}, {}, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "LengthMismatch");
    }
}

TEST(Bgl, PerClassScaling) {
    const BglConfig cfg;
    EXPECT_EQ(cfg.a_for("car"), 3.0);
    EXPECT_EQ(cfg.a_for("truck"), 3.0);
    EXPECT_EQ(cfg.a_for("pedestrian"), 1.0);
    EXPECT_EQ(cfg.a_for("cyclist"), 1.0);
    EXPECT_EQ(cfg.a_for(""), 1.0);
    EXPECT_EQ(cfg.lambda, 1.0);
    const Box3D gt{0, 0, 0, 2, 2, 2, 0};
    Box3D pred = gt;
    pred.x = 1.0;
    // a = 3 scales the Mahalanobis term by 9.
    EXPECT_NEAR(bgl({pred}, {gt}, {"car"}, cfg), 4.5, 1e-12);
}

TEST(Bgl, HalfTurnInvariance) {
    Rng rng(8);
    const BglConfig cfg;
    for (int t = 0; t < 200; ++t) {
        const Box3D a = random_box(rng);
        Box3D b = perturb(a, rng);
        const double base = bgl({b}, {a}, {}, cfg);
        b.theta += std::numbers::pi;
        EXPECT_NEAR(bgl({b}, {a}, {}, cfg), base, 1e-10 * std::max(1.0, base));
    }
}

TEST(Bgl, PairwiseSumOrder) {
    const double v[] = {1e16, 1.0, -1e16, 1.0};
    // ((1e16 + 1) + (-1e16 + 1)) = 0 in double; documents the fixed tree.
    EXPECT_EQ(pairwise_sum(v, 4), (1e16 + 1.0) + (-1e16 + 1.0));
    EXPECT_EQ(pairwise_sum(v, 0), 0.0);
}

TEST(BglGradient, ZeroAtOptimum) {
    Rng rng(6);
    for (int t = 0; t < 100; ++t) {
        const Box3D b = random_box(rng);
        for (double g : bgl_gradient(b, b, 1.0)) EXPECT_NEAR(g, 0.0, 1e-10);
    }
}

TEST(BglGradient, ShiftedUnitBox) {
    const Box3D gt{0, 0, 0, 2, 2, 2, 0};
    for (double delta : {-0.7, 0.25, 1.5}) {
        Box3D pred = gt;
        pred.x = delta;
        const auto g = bgl_gradient(pred, gt, 1.0);
        EXPECT_NEAR(g[0], delta, 1e-14);
        for (int k = 1; k < 7; ++k) EXPECT_NEAR(g[k], 0.0, 1e-14);
    }
}

TEST(BglGradient, MatchesFiniteDifferences) {
    Rng rng(10);
    double worst = 0.0;
    for (int t = 0; t < 500; ++t) {
        const Box3D gt = random_box(rng), pred = perturb(gt, rng);
        const double a = std::array{0.5, 1.0, 3.0}[t % 3];
        worst = std::max(worst, gradient_rel_error(bgl_gradient(pred, gt, a), bgl_gradient_fd(pred, gt, a)));
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(CombinedLoss, WeightedSum) {
    EXPECT_EQ(combined_reg_loss(1.0, 0.5, 1.0), 1.5);
    EXPECT_EQ(combined_reg_loss(1.0, 0.5, 0.0), 1.0);
    EXPECT_EQ(combined_reg_loss(0.25, 2.0, BglConfig{}.lambda), 2.25);
}

TEST(BoxIo, RoundTripAndErrors) {
    const auto dir = std::filesystem::temp_directory_path();
    BoxList list;
    Rng rng(1);
    for (int i = 0; i < 10; ++i) {
        list.boxes.push_back(random_box(rng));
        list.classes.push_back(i % 2 ? "car" : "cyclist");
    }
    write_boxes(list, dir / "rgdet_boxes.csv");
    const BoxList back = read_boxes(dir / "rgdet_boxes.csv");
    EXPECT_EQ(back.boxes, list.boxes);
    EXPECT_EQ(back.classes, list.classes);

    {
        std::ofstream os(dir / "rgdet_boxes_bad.csv");
        os << "x,y,z,l,w,h,theta\n1,2,3,4,5,6\n";
    }
    EXPECT_THROW(read_boxes(dir / "rgdet_boxes_bad.csv"), Error);
    {
        std::ofstream os(dir / "rgdet_boxes_hdr.csv");
        os << "a,b,c\n";
    }
    EXPECT_THROW(read_boxes(dir / "rgdet_boxes_hdr.csv"), Error);
}
