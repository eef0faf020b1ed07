#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace omniflow;

namespace {

LatentVec gaussian_vec(std::mt19937_64& rng, int d) {
    std::normal_distribution<double> n;
    LatentVec x(static_cast<std::size_t>(d));
    for (double& v : x)
        v = n(rng);
    return x;
}

// Central differences, step relative to the coordinate scale.
template <class F>
LatentVec numeric_grad(F&& f, LatentVec x, double h = 1e-6) {
    LatentVec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = x[i];
        x[i] = a + h;
        const double up = f(x);
        x[i] = a - h;
        const double dn = f(x);
        x[i] = a;
        g[i] = (up - dn) / (2 * h);
    }
    return g;
}

double rel_err(const LatentVec& a, const LatentVec& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

} // namespace

TEST(NegCosine, Basics) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const LatentVec p = gaussian_vec(rng, 32);
        EXPECT_NEAR(neg_cosine(p, p), -1.0, 1e-15);
        LatentVec m = p;
        for (double& v : m)
            v = -v;
        EXPECT_NEAR(neg_cosine(p, m), 1.0, 1e-15);
    }
    EXPECT_DOUBLE_EQ(neg_cosine(LatentVec{1, 0}, LatentVec{0, 3}), 0.0);
    EXPECT_THROW(neg_cosine(LatentVec{0, 0}, LatentVec{1, 0}), ZeroNormError);
    EXPECT_THROW(neg_cosine(LatentVec{1, 0}, LatentVec{1, 0, 0}), DimensionMismatch);
}

TEST(NegCosine, ScaleInvariance) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> s(1e-3, 1e3);
    for (int i = 0; i < 100; ++i) {
        const LatentVec p = gaussian_vec(rng, 16), z = gaussian_vec(rng, 16);
        const double a = s(rng), b = s(rng);
        LatentVec ps = p, zs = z;
        for (double& v : ps)
            v *= a;
        for (double& v : zs)
            v *= b;
        EXPECT_NEAR(neg_cosine(ps, zs), neg_cosine(p, z), 1e-12);
    }
}

TEST(NegCosine, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        const LatentVec p = gaussian_vec(rng, 24), z = gaussian_vec(rng, 24);
        const LatentVec g = neg_cosine_grad(p, z);
        const LatentVec fd = numeric_grad([&](const LatentVec& x) { return neg_cosine(x, z); }, p);
        EXPECT_LT(rel_err(g, fd), 1e-5);
        // The gradient is orthogonal to p (scale invariance).
        double dot = 0;
        for (std::size_t k = 0; k < p.size(); ++k)
            dot += g[k] * p[k];
        EXPECT_NEAR(dot, 0.0, 1e-12);
    }
}

TEST(SimLoss, SymmetrisedValueAndGradients) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 100; ++i) {
        const LatentVec pl = gaussian_vec(rng, 64), zr = gaussian_vec(rng, 64);
        const LatentVec pr = gaussian_vec(rng, 64), zl = gaussian_vec(rng, 64);
        const SimLoss s = symmetrized_sim_loss(pl, zr, pr, zl);
        EXPECT_NEAR(s.value, 0.5 * neg_cosine(pl, zr) + 0.5 * neg_cosine(pr, zl), 1e-15);
        const LatentVec gl =
            numeric_grad([&](const LatentVec& x) { return symmetrized_sim_loss(x, zr, pr, zl).value; }, pl);
        const LatentVec gr =
            numeric_grad([&](const LatentVec& x) { return symmetrized_sim_loss(pl, zr, x, zl).value; }, pr);
        EXPECT_LT(rel_err(s.grad_p_left, gl), 1e-5);
        EXPECT_LT(rel_err(s.grad_p_right, gr), 1e-5);
    }
    // Identical branches reach the minimum.
    const LatentVec a{1, 2, 3};
    EXPECT_NEAR(symmetrized_sim_loss(a, a, a, a).value, -1.0, 1e-15);
    EXPECT_DOUBLE_EQ(hybrid_loss(-0.5, 2.0), 1.5);
}

TEST(SimLoss, BuiltinGradientCheck) {
    const GradientCheckResult r = run_gradient_check();
    EXPECT_TRUE(r.passed);
    EXPECT_EQ(r.instances, 100);
    EXPECT_LT(r.max_rel_error, 1e-5);
    EXPECT_LT(r.max_self_error, 1e-12);
}

TEST(SequenceLoss, Weights) {
    const auto w = sequence_weights(3, 0.8, GammaConvention::printed);
    ASSERT_EQ(w.size(), 3u);
    EXPECT_EQ(w[0], 0.8);
    EXPECT_EQ(w[1], 1.0);
    EXPECT_EQ(w[2], 1.25);
    const auto s = sequence_weights(3, 0.8, GammaConvention::shifted);
    EXPECT_DOUBLE_EQ(s[0], 0.64);
    EXPECT_EQ(s[2], 1.0);
    EXPECT_THROW(sequence_weights(0), InputError);
}

TEST(SequenceLoss, ValueAndMonotonicity) {
    const int h = 8, w = 16;
    const FlowField gt = testutil::random_flow(h, w, 5, 3.0);
    FlowField p1 = gt, p2 = gt;
    p1.u(0, 0) += 2.0; // mean L1 = 2 / 128
    p2.v(3, 3) -= 4.0; // mean L1 = 4 / 128
    const std::vector<FlowField> preds{p1, p2};
    const double loss = sequence_flow_loss(preds, gt, RotationSpec{});
    // Two predictions: weights 0.8^0 and 0.8^-1.
    EXPECT_NEAR(loss, 1.0 * 2.0 / 128 + 1.25 * 4.0 / 128, 1e-15);

    double prev = loss;
    for (int k = 1; k <= 5; ++k) {
        std::vector<FlowField> worse = preds;
        worse[1].u(5, 5) += 0.5 * k;
        const double l = sequence_flow_loss(worse, gt, RotationSpec{});
        EXPECT_GE(l, prev);
        prev = l;
    }
    EXPECT_THROW(sequence_flow_loss(std::vector<FlowField>{}, gt, RotationSpec{}), InputError);
}

TEST(SequenceLoss, RotatesGroundTruth) {
    const int h = 32, w = 64;
    const FlowField gt = rotation_flow_gt(h, w, RotationSpec{0.0, 0.0, 0.05});
    const RotationSpec r{0.0, 0.0, 0.7};
    // Yaw-only ground truth is yaw-invariant.
    const std::vector<FlowField> preds{gt};
    EXPECT_LT(sequence_flow_loss(preds, gt, r), 1e-9);
    const std::vector<FlowField> rotated{rotate_flow(gt, RotationSpec{0.3, 0.0, 0.0})};
    const RotationSpec pitch{0.3, 0.0, 0.0};
    EXPECT_LT(sequence_flow_loss(rotated, gt, pitch), 1e-9);
}

TEST(Augmentation, OneSideIsIdentity) {
    std::mt19937_64 rng(6);
    int left_rotated = 0;
    for (int i = 0; i < 2000; ++i) {
        const AugmentationPair v1 = draw_augmentation(AugmentationStrategy::v1, rng);
        EXPECT_TRUE(v1.r1.is_identity());
        EXPECT_FALSE(v1.r2.is_identity());
        const AugmentationPair v2 = draw_augmentation(AugmentationStrategy::v2, rng);
        EXPECT_NE(v2.r1.is_identity(), v2.r2.is_identity());
        left_rotated += v2.r1.is_identity() ? 0 : 1;
        for (double a : {v1.r2.pitch, v1.r2.roll, v1.r2.yaw}) {
            EXPECT_GE(a, -kPi);
            EXPECT_LE(a, kPi);
        }
    }
    EXPECT_NEAR(left_rotated / 2000.0, 0.5, 0.05);
}

TEST(Augmentation, DeterministicGivenSeed) {
    std::mt19937_64 a(42), b(42);
    for (int i = 0; i < 50; ++i) {
        const AugmentationPair x = draw_augmentation(AugmentationStrategy::v2, a);
        const AugmentationPair y = draw_augmentation(AugmentationStrategy::v2, b);
        EXPECT_EQ(x.r1.yaw, y.r1.yaw);
        EXPECT_EQ(x.r2.pitch, y.r2.pitch);
    }
    std::mt19937_64 c(1);
    const RotationSpec r = draw_rotation(c, {0.0, 0.0, 0.1});
    EXPECT_EQ(r.pitch, 0.0);
    EXPECT_LE(std::abs(r.yaw), 0.1);
    EXPECT_THROW(draw_rotation(c, {0.0, 0.0, 0.0}), ConfigError);
}

TEST(Collapse, ChannelStdOfRandomUnitVectors) {
    std::mt19937_64 rng(7);
    std::vector<LatentVec> batch;
    for (int i = 0; i < 4096; ++i)
        batch.push_back(gaussian_vec(rng, 64));
    const auto sd = normalized_channel_std(batch);
    ASSERT_EQ(sd.size(), 64u);
    for (double s : sd)
        EXPECT_NEAR(s, 1.0 / 8.0, 0.2 / 8.0);
    // A collapsed batch has zero spread.
    const std::vector<LatentVec> same(100, LatentVec{1, 2, 3});
    for (double s : normalized_channel_std(same))
        EXPECT_NEAR(s, 0.0, 1e-9);
}
