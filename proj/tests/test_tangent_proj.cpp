#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace omniflow;

namespace {

// Gnomonic projection as a ratio of dot products with the local frame at
// the tangent point: x = v.east / v.n, y = v.north / v.n.
PlanePoint gnomonic_by_frame(const UnitVec3& v, double lon0, double lat0) {
    const UnitVec3 n = latlon_to_unitvec({lat0, lon0});
    const UnitVec3 east{-std::sin(lon0), std::cos(lon0), 0.0};
    const UnitVec3 north{-std::sin(lat0) * std::cos(lon0), -std::sin(lat0) * std::sin(lon0), std::cos(lat0)};
    const double d = v.dot(n);
    return {v.dot(east) / d, v.dot(north) / d};
}

} // namespace

TEST(Gnomonic, ForwardInverseRoundTrip) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> lat(-kHalfPi, kHalfPi), lon(-kPi, kPi), u01(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) {
        TangentSpec s;
        s.lat0 = lat(rng);
        s.lon0 = lon(rng);
        // Direction at angular distance c < pi/2 - 1e-3 from the centre.
        const double c = (kHalfPi - 1e-3) * u01(rng);
        const double az = kTwoPi * u01(rng);
        const UnitVec3 n = latlon_to_unitvec({s.lat0, s.lon0});
        const UnitVec3 east{-std::sin(s.lon0), std::cos(s.lon0), 0.0};
        const UnitVec3 north{-std::sin(s.lat0) * std::cos(s.lon0), -std::sin(s.lat0) * std::sin(s.lon0),
                             std::cos(s.lat0)};
        const double a = std::sin(c) * std::cos(az), b = std::sin(c) * std::sin(az);
        const UnitVec3 v{n.x * std::cos(c) + east.x * a + north.x * b, n.y * std::cos(c) + east.y * a + north.y * b,
                         n.z * std::cos(c) + east.z * a + north.z * b};
        const LatLon ll = unitvec_to_latlon(v);
        const PlanePoint p = gnomonic_forward(ll.lon, ll.lat, s);
        const LatLon back = gnomonic_inverse(p.x, p.y, s);
        worst = std::max(worst, testutil::angle_between(v, latlon_to_unitvec(back)));
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(Gnomonic, ForwardMatchesFrameFormula) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> lat(-1.5, 1.5), lon(-kPi, kPi), d(-0.6, 0.6);
    for (int i = 0; i < 10000; ++i) {
        TangentSpec s;
        s.lat0 = lat(rng);
        s.lon0 = lon(rng);
        const LatLon ll{std::clamp(s.lat0 + d(rng), -kHalfPi, kHalfPi), s.lon0 + d(rng)};
        if (gnomonic_cos_c(ll.lon, ll.lat, s.lon0, s.lat0) < 0.1)
            continue;
        const PlanePoint a = gnomonic_forward(ll.lon, ll.lat, s);
        const PlanePoint b = gnomonic_by_frame(latlon_to_unitvec(ll), s.lon0, s.lat0);
        EXPECT_NEAR(a.x, b.x, 1e-11);
        EXPECT_NEAR(a.y, b.y, 1e-11);
    }
}

TEST(Gnomonic, CentreAndOrientation) {
    TangentSpec s;
    s.lon0 = 0.4;
    s.lat0 = 0.2;
    const PlanePoint c = gnomonic_forward(0.4, 0.2, s);
    EXPECT_NEAR(c.x, 0.0, 1e-15);
    EXPECT_NEAR(c.y, 0.0, 1e-15);
    const LatLon back = gnomonic_inverse(0.0, 0.0, s);
    EXPECT_DOUBLE_EQ(back.lat, 0.2);
    EXPECT_DOUBLE_EQ(back.lon, 0.4);
    // East is +x, north is +y.
    EXPECT_GT(gnomonic_forward(0.5, 0.2, s).x, 0.0);
    EXPECT_GT(gnomonic_forward(0.4, 0.3, s).y, 0.0);
    // All four plane quadrants invert to distinct longitudes on both sides.
    TangentSpec eq;
    EXPECT_NEAR(gnomonic_inverse(1.0, 0.0, eq).lon, kPi / 4, 1e-15);
    EXPECT_NEAR(gnomonic_inverse(-1.0, 0.0, eq).lon, -kPi / 4, 1e-15);
}

TEST(Gnomonic, BehindPlaneThrows) {
    TangentSpec s;
    EXPECT_THROW(gnomonic_forward(kPi, 0.0, s), BehindTangentPlaneError);
    EXPECT_THROW(gnomonic_forward(kHalfPi, 0.0, s), BehindTangentPlaneError);
}

TEST(TangentPatch, PixelPlaneRoundTrip) {
    TangentSpec s{0.0, 0.0, 1.7, 40, 60};
    for (double r : {0.0, 3.3, 39.0})
        for (double c : {0.0, 17.5, 59.0}) {
            const PixelCoord p = plane_to_patch_pixel(patch_pixel_to_plane({r, c}, s), s);
            EXPECT_NEAR(p.row, r, 1e-12);
            EXPECT_NEAR(p.col, c, 1e-12);
        }
    // Row 0 is the top of the patch (positive y).
    EXPECT_GT(patch_pixel_to_plane({0.0, 0.0}, s).y, 0.0);
    EXPECT_LT(patch_pixel_to_plane({0.0, 0.0}, s).x, 0.0);
}

TEST(TangentPatch, LayoutAndSize) {
    EXPECT_THROW(patch_layout(4), ConfigError);
    EXPECT_THROW(patch_layout(8), ConfigError);
    const auto centres = patch_layout(6);
    ASSERT_EQ(centres.size(), 6u);
    EXPECT_DOUBLE_EQ(centres[4].lat, kHalfPi);
    EXPECT_DOUBLE_EQ(centres[5].lat, -kHalfPi);
    EXPECT_EQ(default_patch_size(256, kDefaultPatchFov), 200);
    TangentSpec bad{0, 0, kPi, 8, 8};
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(TangentPatch, CubeLayoutCoversSphere) {
    const auto specs = patch_specs(6, kDefaultPatchFov, 64);
    const Raster<int> cov = coverage_count(specs, 128, 256);
    for (int v : cov.data())
        EXPECT_GE(v, 1);
    // Without the margin the cube faces still tile the sphere.
    const Raster<int> tight = coverage_count(patch_specs(6, kHalfPi + 1e-6, 64), 128, 256);
    for (int v : tight.data())
        EXPECT_GE(v, 1);
}

TEST(TangentPatch, SampleMatchesTexture) {
    const SyntheticScene scene{TextureKind::gradient, 0, 128, 256};
    const SphereTexture tex(scene);
    const EquirectRaster img = render_frame(scene);
    const TangentSpec s{0.7, 0.3, kDefaultPatchFov, 48, 48};
    const TangentPatch p = sample_patch(img, s);
    for (int r = 0; r < 48; r += 7)
        for (int c = 0; c < 48; c += 7) {
            const PlanePoint q = patch_pixel_to_plane({double(r), double(c)}, s);
            const double expect = tex(latlon_to_unitvec(gnomonic_inverse(q.x, q.y, s)));
            EXPECT_NEAR(p.raster.at(r, c), expect, 0.05);
        }
}

TEST(BlendKernel, ShapeAndSupport) {
    const TangentSpec s{0.0, 0.0, kDefaultPatchFov, 64, 64};
    const BlendKernel k;
    // Inside the cube-face core the weight is cos(c).
    EXPECT_DOUBLE_EQ(k.weight({0.0, 0.0}, 1.0, s), 1.0);
    EXPECT_DOUBLE_EQ(k.weight({0.5, 0.5}, 0.8, s), 0.8);
    // Zero at and beyond the patch border.
    EXPECT_DOUBLE_EQ(k.weight({s.half_x(), 0.0}, 0.6, s), 0.0);
    EXPECT_DOUBLE_EQ(k.weight({1.5 * s.half_x(), 0.0}, 0.6, s), 0.0);
    EXPECT_DOUBLE_EQ(k.weight({0.0, 0.0}, -0.1, s), 0.0);
    // Monotone decreasing taper between core and border.
    double prev = 1.0;
    for (double x = 1.0; x <= s.half_x(); x += 0.01) {
        const double w = k.weight({x, 0.0}, 1.0, s);
        EXPECT_LE(w, prev + 1e-15);
        prev = w;
    }
    // core_fov >= fov: plain cos(c) on the whole patch.
    const BlendKernel flat{kPi};
    EXPECT_DOUBLE_EQ(flat.weight({0.99 * s.half_x(), 0.0}, 0.7, s), 0.7);
}

TEST(BlendPatches, ReconstructsSmoothFrame) {
    const SyntheticScene scene{TextureKind::noise, 2, 128, 256};
    const EquirectRaster img = render_frame(scene);
    const auto patches = sample_patches(img);
    const EquirectRaster back = blend_patches(patches, 128, 256);
    EXPECT_GT(testutil::psnr(img, back), 40.0);
}

TEST(BlendPatches, SplatIsZeroOffSupport) {
    const EquirectRaster img(64, 128, 1, RasterKind::frame, 100.0);
    const TangentPatch p = sample_patch(img, {0.0, 0.0, kDefaultPatchFov, 32, 32});
    const SplatResult s = patch_to_equirect(p, 64, 128);
    // Back of the sphere is never reached by the front patch.
    EXPECT_EQ(s.weight.at(32, 0), 0.0);
    EXPECT_EQ(s.raster.at(32, 0), 0.0);
    EXPECT_GT(s.weight.at(32, 64), 0.99);
    EXPECT_NEAR(s.raster.at(32, 64), 100.0, 1e-12);
}
