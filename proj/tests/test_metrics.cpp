#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace omniflow;

namespace {

DistortionMap constant_density(int h, int w, double d0) {
    return {EquirectRaster(h, w, 1, RasterKind::scalar_map, d0), EquirectRaster(h, w, 1, RasterKind::scalar_map, d0),
            DistortionRange{}};
}

FlowField constant_flow(int h, int w, double u, double v) {
    FlowField f(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            f.u(r, c) = u;
            f.v(r, c) = v;
        }
    return f;
}

} // namespace

TEST(Metrics, SelfComparisonIsExactlyZero) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const FlowField f = testutil::random_flow(40, 80, seed, 100.0);
        EXPECT_EQ(epe(f, f), 0.0);
        EXPECT_EQ(ae(f, f), 0.0);
        const DistortionMap d = build_distortion_map(40, 80);
        EXPECT_EQ(epe_d(f, f, d), 0.0);
        EXPECT_EQ(ae_d(f, f, d), 0.0);
    }
}

TEST(Metrics, ThreeFourFive) {
    EXPECT_NEAR(epe(constant_flow(8, 16, 3.0, 4.0), FlowField(8, 16)), 5.0, 1e-6);
}

TEST(Metrics, AngularErrorOfOrthogonalUnitVectors) {
    // cos = (0 + 0 + 1) / (sqrt2 * sqrt2) = 1/2.
    EXPECT_NEAR(angular_error(1.0, 0.0, 0.0, 1.0), kPi / 3, 1e-9);
    FlowField a(1, 1), b(1, 1);
    a.u(0, 0) = 1.0;
    b.v(0, 0) = 1.0;
    EXPECT_NEAR(ae(a, b), kPi / 3, 1e-9);
    // Antiparallel large vectors approach pi.
    EXPECT_NEAR(angular_error(1e8, 0.0, -1e8, 0.0), kPi, 1e-6);
    EXPECT_FALSE(std::isnan(angular_error(1e300, 0.0, 1e300, 1e-300)));
}

TEST(Metrics, ConstantDensityFactorises) {
    const FlowField p = testutil::random_flow(30, 60, 7), g = testutil::random_flow(30, 60, 8);
    for (double d0 : {0.0, 0.25, 0.5, 0.9, 0.99}) {
        const DistortionMap d = constant_density(30, 60, d0);
        EXPECT_NEAR(epe_d(p, g, d), epe(p, g) / (1.0 - d0), 1e-9);
        EXPECT_NEAR(ae_d(p, g, d), ae(p, g) / (1.0 - d0), 1e-9);
    }
}

TEST(Metrics, DensityAtOrAboveOneIsRejected) {
    const FlowField f(4, 8);
    EXPECT_THROW(epe_d(f, f, constant_density(4, 8, 1.0)), InvalidDensityError);
    EXPECT_THROW(ae_d(f, f, constant_density(4, 8, 1.5)), InvalidDensityError);
    EXPECT_THROW(epe(FlowField(4, 8), FlowField(4, 9)), DimensionMismatch);
}

TEST(Metrics, InvalidPixelsAreSkipped) {
    FlowField p = constant_flow(2, 2, 1.0, 0.0);
    FlowField g(2, 2);
    p.u(0, 0) = 100.0;
    p.set_valid(0, 0, false);
    EXPECT_DOUBLE_EQ(epe(p, g), 1.0);
    FlowField none(2, 2);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
            none.set_valid(r, c, false);
    EXPECT_EQ(epe(none, g), 0.0);
    EXPECT_EQ(binned_report(none, g).count, 0);
}

TEST(DistortionMap, FaceCentresAndCorners) {
    // Exact directions.
    EXPECT_DOUBLE_EQ(face_density(cube_face_of({0, 0, 1})), 1.0);
    EXPECT_DOUBLE_EQ(face_density(cube_face_of({0, 0, -1})), 1.0);
    for (const UnitVec3& v : {UnitVec3{1, 0, 0}, UnitVec3{-1, 0, 0}, UnitVec3{0, 1, 0}, UnitVec3{0, -1, 0}})
        EXPECT_DOUBLE_EQ(face_density(cube_face_of(v)), 0.0);
    const double k = 1.0 / std::sqrt(3.0);
    EXPECT_NEAR(face_density(cube_face_of({k, k, k})), 0.0, 1e-12);
    // Equatorial face corners reach 1.
    EXPECT_NEAR(face_density(cube_face_of({k, k + 1e-9, k - 1e-9})), 1.0, 1e-6);

    // On the raster, pixels next to face centres.
    const int h = 256, w = 512;
    const DistortionMap m = build_distortion_map(h, w);
    EXPECT_GT(m.raw.at(0, 0), 0.99);
    EXPECT_GT(m.raw.at(h - 1, w / 3), 0.99);
    EXPECT_LT(m.raw.at(h / 2, w / 2), 0.01);   // front (lon 0)
    EXPECT_LT(m.raw.at(h / 2, 3 * w / 4), 0.01); // lon pi/2
    EXPECT_LT(m.raw.at(h / 2, 0), 0.01);         // back
}

TEST(DistortionMap, MirrorSymmetry) {
    const int h = 128, w = 256;
    const DistortionMap m = build_distortion_map(h, w);
    double worst = 0.0;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            worst = std::max(worst, std::abs(m.raw.at(r, c) - m.raw.at(r, w - 1 - c)));
            worst = std::max(worst, std::abs(m.raw.at(r, c) - m.raw.at(h - 1 - r, c)));
        }
    EXPECT_LT(worst, 1e-6);
}

TEST(DistortionMap, MappedRangeIsHalfOpen) {
    for (const char* name : {"upper", "lower"}) {
        const DistortionRange range = DistortionRange::preset(name);
        const DistortionMap m = build_distortion_map(64, 128, range);
        for (double d : m.density.data()) {
            EXPECT_GE(d, range.lo);
            EXPECT_LT(d, range.hi);
        }
        EXPECT_DOUBLE_EQ(map_density(0.0, range), range.lo);
        EXPECT_DOUBLE_EQ(map_density(1.0, range), range.lo + (range.hi - range.lo) * 255.0 / 256.0);
    }
    EXPECT_THROW(DistortionRange::preset("other"), ConfigError);
    EXPECT_THROW(build_distortion_map(8, 16, {0.5, 1.5}), ConfigError);
}

TEST(Metrics, BinnedReport) {
    const int h = 4, w = 8;
    FlowField gt(h, w), pred(h, w);
    for (int c = 0; c < w; ++c) {
        gt.u(0, c) = 2.0;  // s<5
        gt.u(1, c) = 7.0;  // s<10
        gt.u(2, c) = 15.0; // s<20
        gt.u(3, c) = 30.0; // s>=20
        for (int r = 0; r < h; ++r)
            pred.u(r, c) = gt.u(r, c) + (r + 1);
    }
    const MetricsReport rep = binned_report(pred, gt);
    ASSERT_EQ(rep.bins.size(), 5u);
    EXPECT_EQ(rep.bins[0].name, "all");
    EXPECT_EQ(rep.bins[0].count, h * w);
    EXPECT_DOUBLE_EQ(*rep.bins[0].epe, 2.5);
    EXPECT_EQ(rep.bins[1].count, w);
    EXPECT_DOUBLE_EQ(*rep.bins[1].epe, 1.0);
    EXPECT_EQ(rep.bins[2].count, 2 * w); // cumulative thresholds
    EXPECT_DOUBLE_EQ(*rep.bins[2].epe, 1.5);
    EXPECT_EQ(rep.bins[3].count, 3 * w);
    EXPECT_EQ(rep.bins[4].count, w);
    EXPECT_DOUBLE_EQ(*rep.bins[4].epe, 4.0);
    EXPECT_FALSE(rep.epe_d.has_value());
    EXPECT_FALSE(rep.bins[4].epe_d.has_value());

    // Empty bins report no value rather than zero.
    const MetricsReport slow = binned_report(FlowField(h, w), FlowField(h, w));
    EXPECT_EQ(slow.bins[4].count, 0);
    EXPECT_FALSE(slow.bins[4].epe.has_value());
}

TEST(Metrics, IndependentOfThreadCount) {
    const FlowField p = testutil::random_flow(100, 200, 1), g = testutil::random_flow(100, 200, 2);
    const DistortionMap d = build_distortion_map(100, 200);
    const int saved = thread_count();
    set_thread_count(1);
    const double a1 = epe_d(p, g, d), b1 = ae(p, g);
    set_thread_count(4);
    const double a4 = epe_d(p, g, d), b4 = ae(p, g);
    set_thread_count(3);
    const double a3 = epe_d(p, g, d);
    set_thread_count(saved);
    EXPECT_EQ(a1, a4);
    EXPECT_EQ(a1, a3);
    EXPECT_EQ(b1, b4);
}
