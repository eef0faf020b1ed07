#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace omniflow;

namespace {

// Rodrigues' formula, written independently of RotationMatrix.
UnitVec3 rodrigues(const UnitVec3& v, UnitVec3 axis, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    const double d = axis.x * v.x + axis.y * v.y + axis.z * v.z;
    const UnitVec3 k{axis.y * v.z - axis.z * v.y, axis.z * v.x - axis.x * v.z, axis.x * v.y - axis.y * v.x};
    return {v.x * c + k.x * s + axis.x * d * (1 - c), v.y * c + k.y * s + axis.y * d * (1 - c),
            v.z * c + k.z * s + axis.z * d * (1 - c)};
}

} // namespace

TEST(SphereGeom, AngularUnitvecRoundTrip) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> th(0.0, kPi), ph(-kPi, kPi);
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const SphereDir d{th(rng), ph(rng)};
        const UnitVec3 v = angular_to_unitvec(d);
        EXPECT_NEAR(v.norm(), 1.0, 1e-15);
        const SphereDir back = unitvec_to_angular(v);
        // Compare as directions so the azimuth ambiguity near the poles is moot.
        worst = std::max(worst, testutil::angle_between(v, angular_to_unitvec(back)));
        if (std::sin(d.theta) > 1e-6) {
            EXPECT_NEAR(back.theta, d.theta, 1e-9);
            EXPECT_NEAR(std::remainder(back.phi - d.phi, kTwoPi), 0.0, 1e-9);
        }
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(SphereGeom, PolarAngleConvention) {
    const UnitVec3 up = angular_to_unitvec({0.0, 1.234});
    EXPECT_DOUBLE_EQ(up.z, 1.0);
    const UnitVec3 eq = angular_to_unitvec({kHalfPi, 0.0});
    EXPECT_NEAR(eq.x, 1.0, 1e-15);
    EXPECT_NEAR(eq.z, 0.0, 1e-15);
    const SphereDir pole = unitvec_to_angular({0, 0, -1});
    EXPECT_DOUBLE_EQ(pole.theta, kPi);
    EXPECT_DOUBLE_EQ(pole.phi, 0.0);
}

TEST(SphereGeom, NegativePolarAngleNormalises) {
    const SphereDir d{-0.3, 0.5};
    const SphereDir n = d.normalized();
    EXPECT_DOUBLE_EQ(n.theta, 0.3);
    EXPECT_NEAR(n.phi, 0.5 + kPi - kTwoPi, 1e-15);
    const UnitVec3 a = angular_to_unitvec(d), b = angular_to_unitvec(n);
    EXPECT_NEAR(a.x, b.x, 1e-15);
    EXPECT_NEAR(a.y, b.y, 1e-15);
    EXPECT_NEAR(a.z, b.z, 1e-15);
}

TEST(SphereGeom, LatLonBridge) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> la(-kHalfPi, kHalfPi), lo(-kPi, kPi);
    for (int i = 0; i < 10000; ++i) {
        const LatLon ll{la(rng), lo(rng)};
        const UnitVec3 a = latlon_to_unitvec(ll);
        const UnitVec3 b = angular_to_unitvec(to_sphere_dir(ll));
        EXPECT_NEAR(a.x, b.x, 1e-15);
        EXPECT_NEAR(a.y, b.y, 1e-15);
        EXPECT_NEAR(a.z, b.z, 1e-15);
        const LatLon back = unitvec_to_latlon(a);
        EXPECT_NEAR(back.lat, ll.lat, 1e-12);
        EXPECT_NEAR(std::remainder(back.lon - ll.lon, kTwoPi), 0.0, 1e-9);
    }
}

TEST(SphereGeom, CatadioptricFormsAgree) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> th(1e-3, kPi), ph(-kPi, kPi);
    for (int i = 0; i < 10000; ++i) {
        const SphereDir d{th(rng), ph(rng)};
        const CatadioptricPoint a = sphere_to_catadioptric(angular_to_unitvec(d));
        const CatadioptricPoint b = catadioptric_from_angles(d);
        const double scale = std::max(1.0, std::hypot(a.x, a.y));
        EXPECT_NEAR(a.x, b.x, 1e-9 * scale);
        EXPECT_NEAR(a.y, b.y, 1e-9 * scale);
    }
    // The equator maps onto the unit circle.
    const CatadioptricPoint e = sphere_to_catadioptric(angular_to_unitvec({kHalfPi, 0.7}));
    EXPECT_NEAR(std::hypot(e.x, e.y), 1.0, 1e-15);
}

TEST(SphereGeom, CatadioptricPoleIsSingular) {
    EXPECT_THROW(sphere_to_catadioptric({0, 0, 1}), SingularPointError);
    EXPECT_THROW(catadioptric_from_angles({0.0, 0.0}), SingularPointError);
    try {
        sphere_to_catadioptric({0, 0, 1});
    } catch (const Error& e) {
        EXPECT_EQ(e.error_class(), ErrorClass::numeric);
    }
}

TEST(SphereGeom, RotationMatricesAreProper) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> a(-kPi, kPi);
    for (int i = 0; i < 1000; ++i) {
        const RotationMatrix m = rotation_from_spec({a(rng), a(rng), a(rng)});
        EXPECT_NEAR(m.determinant(), 1.0, 1e-12);
        const RotationMatrix p = m * m.transposed();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                EXPECT_NEAR(p(r, c), r == c ? 1.0 : 0.0, 1e-12);
    }
}

TEST(SphereGeom, RotationOrderMatchesAxisComposition) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> a(-kPi, kPi), u(-1.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const RotationSpec s{a(rng), a(rng), a(rng)};
        const UnitVec3 v = UnitVec3{u(rng), u(rng), u(rng)}.normalized();
        // Roll about Y first, then pitch about X, then yaw about Z.
        UnitVec3 w = rodrigues(v, {0, 1, 0}, s.roll);
        w = rodrigues(w, {1, 0, 0}, s.pitch);
        w = rodrigues(w, {0, 0, 1}, s.yaw);
        const UnitVec3 got = rotation_from_spec(s).apply(v);
        EXPECT_NEAR(got.x, w.x, 1e-12);
        EXPECT_NEAR(got.y, w.y, 1e-12);
        EXPECT_NEAR(got.z, w.z, 1e-12);
    }
}

TEST(SphereGeom, WrapHelpers) {
    EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
    EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
    EXPECT_NEAR(wrap_angle(3 * kPi + 0.25), -kPi + 0.25, 1e-12);
    EXPECT_DOUBLE_EQ(wrap_shortest(511.0, 512.0), -1.0);
    EXPECT_DOUBLE_EQ(wrap_shortest(-511.0, 512.0), 1.0);
    EXPECT_DOUBLE_EQ(wrap_shortest(256.0, 512.0), 256.0);
    EXPECT_DOUBLE_EQ(wrap_shortest(-256.0, 512.0), 256.0);
    EXPECT_DOUBLE_EQ(wrap_col(-0.5, 512.0), 511.5);
    EXPECT_DOUBLE_EQ(wrap_col(512.0, 512.0), 0.0);
}

TEST(SphereGeom, PixelCentreConvention) {
    const int h = 256, w = 512;
    const LatLon tl = pixel_to_angular({0.0, 0.0}, h, w);
    EXPECT_NEAR(tl.lat, kHalfPi - 0.5 * kPi / h, 1e-15);
    EXPECT_NEAR(tl.lon, -kPi + 0.5 * kTwoPi / w, 1e-15);
    const PixelCoord p = angular_to_pixel_continuous({0.0, 0.0}, h, w);
    EXPECT_NEAR(p.row, h / 2 - 0.5, 1e-12);
    EXPECT_NEAR(p.col, w / 2 - 0.5, 1e-12);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> rr(0.0, h - 1.0), cc(0.0, w - 1.0);
    for (int i = 0; i < 10000; ++i) {
        const PixelCoord q{rr(rng), cc(rng)};
        const PixelCoord b = unitvec_to_pixel(pixel_to_unitvec(q, h, w), h, w);
        EXPECT_NEAR(b.row, q.row, 1e-9);
        EXPECT_NEAR(wrap_shortest(b.col - q.col, w), 0.0, 1e-9);
    }
}

TEST(SphereGeom, ClampedPixelStaysOnGrid) {
    const PixelCoord p = angular_to_pixel({kHalfPi, kPi}, 256, 512);
    EXPECT_DOUBLE_EQ(p.row, 0.0);
    EXPECT_GE(p.col, 0.0);
    EXPECT_LT(p.col, 512.0);
}

TEST(SphereGeom, YawByOneColumnShiftsOnePixel) {
    const int h = 64, w = 128;
    const RotationMatrix r = rotation_from_spec({0.0, 0.0, kTwoPi / w});
    for (int row = 0; row < h; ++row) {
        const PixelCoord q{static_cast<double>(row), 10.0};
        const PixelCoord e = unitvec_to_pixel(r.apply(pixel_to_unitvec(q, h, w)), h, w);
        EXPECT_NEAR(e.col - q.col, 1.0, 1e-9);
        EXPECT_NEAR(e.row - q.row, 0.0, 1e-9);
    }
}
