#pragma once

// Gnomonic (tangent-plane) projection and the cube-face patch layout used to
// cover the full sphere.

#include <algorithm>
#include <cmath>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "raster.hpp"
#include "sphere_geom.hpp"

namespace omniflow {

struct TangentSpec {
    double lon0 = 0.0;            // longitude of the tangent point
    double lat0 = 0.0;            // latitude of the tangent point
    double fov = kHalfPi;         // horizontal field of view of the patch
    int height = 64;
    int width = 64;

    // Half extents of the patch on the tangent plane.
    double half_x() const { return std::tan(0.5 * fov); }
    double half_y() const { return half_x() * height / width; }

    void validate() const {
        if (!(fov > 0.0 && fov < kPi))
            throw ConfigError("tangent patch fov must lie in (0, pi)");
        if (height < 2 || width < 2)
            throw ConfigError("tangent patch must be at least 2x2 pixels");
    }
};

struct PlanePoint {
    double x = 0.0;
    double y = 0.0;
};

// Points closer than this (in cos c) to the horizon of the tangent plane are
// treated as behind it.
inline constexpr double kHorizonEps = 1e-12;

inline double gnomonic_cos_c(double lon, double lat, double lon0, double lat0) {
    return std::sin(lat0) * std::sin(lat) + std::cos(lat0) * std::cos(lat) * std::cos(lon - lon0);
}

// Sphere -> tangent plane at (lon0, lat0).
inline PlanePoint gnomonic_forward(double lon, double lat, const TangentSpec& spec) {
    const double cos_c = gnomonic_cos_c(lon, lat, spec.lon0, spec.lat0);
    if (!(cos_c > kHorizonEps))
        throw BehindTangentPlaneError("gnomonic_forward: point is not on the visible hemisphere");
    const double dl = lon - spec.lon0;
    return {std::cos(lat) * std::sin(dl) / cos_c,
            (std::cos(spec.lat0) * std::sin(lat) - std::sin(spec.lat0) * std::cos(lat) * std::cos(dl)) /
                cos_c};
}

// Tangent plane -> sphere. rho == 0 maps to the tangent point itself. The
// longitude uses the two-argument arctangent so every quadrant is recovered.
inline LatLon gnomonic_inverse(double x, double y, const TangentSpec& spec) {
    const double rho = std::hypot(x, y);
    if (rho == 0.0)
        return {spec.lat0, spec.lon0};
    const double c = std::atan(rho);
    const double sc = std::sin(c), cc = std::cos(c);
    const double s0 = std::sin(spec.lat0), c0 = std::cos(spec.lat0);
    const double lat = std::asin(std::clamp(cc * s0 + y * sc * c0 / rho, -1.0, 1.0));
    const double lon = spec.lon0 + std::atan2(x * sc, rho * c0 * cc - y * s0 * sc);
    return {lat, wrap_angle(lon)};
}

inline PlanePoint patch_pixel_to_plane(PixelCoord p, const TangentSpec& spec) {
    return {(-1.0 + 2.0 * (p.col + 0.5) / spec.width) * spec.half_x(),
            (1.0 - 2.0 * (p.row + 0.5) / spec.height) * spec.half_y()};
}

inline PixelCoord plane_to_patch_pixel(PlanePoint q, const TangentSpec& spec) {
    return {(1.0 - q.y / spec.half_y()) * 0.5 * spec.height - 0.5,
            (q.x / spec.half_x() + 1.0) * 0.5 * spec.width - 0.5};
}

inline bool plane_point_inside(PlanePoint q, const TangentSpec& spec) {
    return std::abs(q.x) <= spec.half_x() && std::abs(q.y) <= spec.half_y();
}

struct TangentPatch {
    TangentSpec spec;
    EquirectRaster raster;
};

// Default margin added to the pi/2 cube-face FOV so neighbouring patches overlap.
inline constexpr double kDefaultPatchMargin = 0.2;
inline constexpr double kDefaultPatchFov = kHalfPi + kDefaultPatchMargin;

// Cube-face tangent points: front, right, back, left, up, down.
inline std::vector<LatLon> patch_layout(int n) {
    if (n != 6)
        throw ConfigError("unsupported patch layout: only n = 6 (cube faces) is available");
    return {{0.0, 0.0}, {0.0, kHalfPi}, {0.0, kPi}, {0.0, -kHalfPi}, {kHalfPi, 0.0}, {-kHalfPi, 0.0}};
}

// Patch side length whose centre pixel matches the equirect pixel pitch.
inline int default_patch_size(int equirect_height, double fov) {
    const double pitch = kPi / equirect_height;
    return std::max(2, static_cast<int>(std::ceil(2.0 * std::tan(0.5 * fov) / pitch)));
}

inline std::vector<TangentSpec> patch_specs(int n, double fov, int patch_size) {
    std::vector<TangentSpec> specs;
    for (const LatLon& c : patch_layout(n)) {
        TangentSpec s{c.lon, c.lat, fov, patch_size, patch_size};
        s.validate();
        specs.push_back(s);
    }
    return specs;
}

inline TangentPatch sample_patch(const EquirectRaster& img, const TangentSpec& spec) {
    spec.validate();
    TangentPatch patch{spec, EquirectRaster(spec.height, spec.width, img.channels(), img.kind())};
    const int h = img.height(), w = img.width(), nc = img.channels();
    std::vector<double> px(static_cast<std::size_t>(nc));
    for (int r = 0; r < spec.height; ++r)
        for (int c = 0; c < spec.width; ++c) {
            const PlanePoint q =
                patch_pixel_to_plane({static_cast<double>(r), static_cast<double>(c)}, spec);
            const PixelCoord src = angular_to_pixel_continuous(gnomonic_inverse(q.x, q.y, spec), h, w);
            sample_bilinear(img, src, px, EdgeMode::sphere);
            for (int ch = 0; ch < nc; ++ch)
                patch.raster.at(r, c, ch) = px[static_cast<std::size_t>(ch)];
        }
    return patch;
}

// patch_size <= 0 picks default_patch_size().
inline std::vector<TangentPatch> sample_patches(const EquirectRaster& img, int n = 6,
                                                double fov = kDefaultPatchFov, int patch_size = 0) {
    if (patch_size <= 0)
        patch_size = default_patch_size(img.height(), fov);
    const std::vector<TangentSpec> specs = patch_specs(n, fov, patch_size);
    std::vector<TangentPatch> patches(specs.size());
    parallel_for(0, static_cast<std::ptrdiff_t>(specs.size()), [&](std::ptrdiff_t i) {
        patches[static_cast<std::size_t>(i)] = sample_patch(img, specs[static_cast<std::size_t>(i)]);
    });
    return patches;
}

// Blend weight: cos(c) over the central FOV of the patch, multiplied by a C1
// raised-cosine taper that reaches zero at the patch border. With
// core_fov >= spec.fov the taper vanishes and the weight is cos(c) inside the
// patch and zero outside.
struct BlendKernel {
    double core_fov = kHalfPi;

    double weight(PlanePoint q, double cos_c, const TangentSpec& spec) const {
        if (!(cos_c > 0.0) || !plane_point_inside(q, spec))
            return 0.0;
        const double core = std::tan(0.5 * std::min(core_fov, spec.fov));
        const double core_y = core * spec.height / spec.width;
        return cos_c * taper(std::abs(q.x), core, spec.half_x()) *
               taper(std::abs(q.y), core_y, spec.half_y());
    }

private:
    static double taper(double a, double inner, double outer) {
        if (a <= inner)
            return 1.0;
        if (a >= outer)
            return 0.0;
        const double s = (a - inner) / (outer - inner);
        return 0.5 * (1.0 + std::cos(kPi * s));
    }
};

struct SplatResult {
    EquirectRaster raster; // patch content on the equirect grid (0 where weight == 0)
    EquirectRaster weight; // one channel
};

// Gathers patch content back onto an H x W equirect grid through the forward
// gnomonic map.
inline SplatResult patch_to_equirect(const TangentPatch& patch, int height, int width,
                                     const BlendKernel& kernel = {}) {
    const TangentSpec& spec = patch.spec;
    const int nc = patch.raster.channels();
    SplatResult res{EquirectRaster(height, width, nc, patch.raster.kind()),
                    EquirectRaster(height, width, 1, RasterKind::scalar_map)};
    parallel_for(0, height, [&](std::ptrdiff_t ri) {
        const int r = static_cast<int>(ri);
        std::vector<double> px(static_cast<std::size_t>(nc));
        for (int c = 0; c < width; ++c) {
            const LatLon ll = pixel_to_angular({static_cast<double>(r), static_cast<double>(c)}, height, width);
            const double cos_c = gnomonic_cos_c(ll.lon, ll.lat, spec.lon0, spec.lat0);
            if (!(cos_c > kHorizonEps))
                continue;
            const PlanePoint q = gnomonic_forward(ll.lon, ll.lat, spec);
            const double wgt = kernel.weight(q, cos_c, spec);
            if (wgt <= 0.0)
                continue;
            sample_bilinear(patch.raster, plane_to_patch_pixel(q, spec), px, EdgeMode::clamp);
            for (int ch = 0; ch < nc; ++ch)
                res.raster.at(r, c, ch) = px[static_cast<std::size_t>(ch)];
            res.weight.at(r, c) = wgt;
        }
    });
    return res;
}

// Number of patch footprints containing each equirect pixel centre.
inline Raster<int> coverage_count(const std::vector<TangentSpec>& specs, int height, int width) {
    Raster<int> count(height, width, 1, RasterKind::scalar_map, 0);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            const LatLon ll = pixel_to_angular({static_cast<double>(r), static_cast<double>(c)}, height, width);
            for (const TangentSpec& s : specs) {
                if (gnomonic_cos_c(ll.lon, ll.lat, s.lon0, s.lat0) <= 0.0)
                    continue;
                if (plane_point_inside(gnomonic_forward(ll.lon, ll.lat, s), s))
                    ++count.at(r, c);
            }
        }
    return count;
}

// Normalised weighted blend of splatted patches (weights sum to one wherever
// any patch contributes).
inline EquirectRaster blend_patches(const std::vector<TangentPatch>& patches, int height, int width,
                                    const BlendKernel& kernel = {}) {
    if (patches.empty())
        throw InputError("blend_patches: no patches");
    const int nc = patches.front().raster.channels();
    EquirectRaster acc(height, width, nc, patches.front().raster.kind());
    EquirectRaster wsum(height, width, 1, RasterKind::scalar_map);
    for (const TangentPatch& p : patches) {
        const SplatResult s = patch_to_equirect(p, height, width, kernel);
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c) {
                const double wgt = s.weight.at(r, c);
                if (wgt <= 0.0)
                    continue;
                wsum.at(r, c) += wgt;
                for (int ch = 0; ch < nc; ++ch)
                    acc.at(r, c, ch) += wgt * s.raster.at(r, c, ch);
            }
    }
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            const double wgt = wsum.at(r, c);
            if (wgt > 0.0)
                for (int ch = 0; ch < nc; ++ch)
                    acc.at(r, c, ch) /= wgt;
        }
    return acc;
}

} // namespace omniflow
