#pragma once

// Flow accuracy metrics: end-point error, angular error, their
// distortion-weighted variants, and speed-binned reporting.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "raster.hpp"
#include "sphere_geom.hpp"

namespace omniflow {

// Target interval [lo, hi) for the distortion density d.
struct DistortionRange {
    double lo = 0.5;
    double hi = 1.0;

    static DistortionRange upper_half() { return {0.5, 1.0}; }
    static DistortionRange lower_half() { return {0.0, 0.5}; }

    static DistortionRange preset(const std::string& name) {
        if (name == "upper")
            return upper_half();
        if (name == "lower")
            return lower_half();
        throw ConfigError("unknown distortion preset: " + name);
    }
};

struct DistortionMap {
    EquirectRaster raw;     // per-face density before mapping, in [0, 1]
    EquirectRaster density; // d, mapped into [lo, hi)
    DistortionRange range;
};

enum class CubeFace { front, back, right, left, up, down };

struct CubeFaceCoord {
    CubeFace face;
    double a; // in-face coordinates, each in [-1, 1]
    double b;
};

// Face hit by the ray along v on the cube [-1, 1]^3. Ties go to the polar
// faces first, then front/back.
inline CubeFaceCoord cube_face_of(const UnitVec3& v) {
    const double ax = std::abs(v.x), ay = std::abs(v.y), az = std::abs(v.z);
    if (az >= ax && az >= ay)
        return {v.z > 0 ? CubeFace::up : CubeFace::down, v.x / az, v.y / az};
    if (ax >= ay)
        return {v.x > 0 ? CubeFace::front : CubeFace::back, v.y / ax, v.z / ax};
    return {v.y > 0 ? CubeFace::right : CubeFace::left, v.x / ay, v.z / ay};
}

// Face density from the radius map r = sqrt(x^2 + y^2), max(r) = sqrt(2):
// 1 - r / max(r) on the polar faces, r / max(r) on the equatorial ones.
inline double face_density(const CubeFaceCoord& fc) {
    const double r = std::hypot(fc.a, fc.b) / std::numbers::sqrt2;
    const bool polar = fc.face == CubeFace::up || fc.face == CubeFace::down;
    return std::clamp(polar ? 1.0 - r : r, 0.0, 1.0);
}

// Raw density in [0, 1] is mapped affinely onto [lo, hi); the top value
// lands one 1/256 step below hi so that 1 / (1 - d) stays finite.
inline double map_density(double raw, const DistortionRange& range) {
    constexpr double kTopStep = 255.0 / 256.0;
    return range.lo + (range.hi - range.lo) * raw * kTopStep;
}

inline DistortionMap build_distortion_map(int height, int width,
                                          DistortionRange range = DistortionRange::upper_half()) {
    if (height < 2 || width < 2)
        throw ConfigError("distortion map needs at least 2x2 pixels");
    if (!(range.lo <= range.hi) || !(range.hi <= 1.0) || range.lo < 0.0)
        throw ConfigError("distortion range must satisfy 0 <= lo <= hi <= 1");
    DistortionMap map{EquirectRaster(height, width, 1, RasterKind::scalar_map),
                      EquirectRaster(height, width, 1, RasterKind::scalar_map), range};
    parallel_for(0, height, [&](std::ptrdiff_t ri) {
        const int r = static_cast<int>(ri);
        for (int c = 0; c < width; ++c) {
            const UnitVec3 v = pixel_to_unitvec({static_cast<double>(r), static_cast<double>(c)}, height, width);
            const double raw = face_density(cube_face_of(v));
            map.raw.at(r, c) = raw;
            map.density.at(r, c) = map_density(raw, range);
        }
    });
    return map;
}

// --- per-pixel errors ---------------------------------------------------------

inline double endpoint_error(double ue, double ve, double ur, double vr) {
    return std::hypot(ue - ur, ve - vr);
}

// Angle between the homogeneous vectors (u, v, 1); the cosine is clamped to
// [-1, 1] before arccos. Identical vectors give exactly zero.
inline double angular_error(double ue, double ve, double ur, double vr) {
    if (ue == ur && ve == vr)
        return 0.0;
    // Normalise (u, v, 1) first so large vectors do not overflow.
    const double ne = std::hypot(std::hypot(ue, ve), 1.0), nr = std::hypot(std::hypot(ur, vr), 1.0);
    const double cos_a = (ue / ne) * (ur / nr) + (ve / ne) * (vr / nr) + (1.0 / ne) * (1.0 / nr);
    return std::acos(std::clamp(cos_a, -1.0, 1.0));
}

// --- reductions -------------------------------------------------------------

struct MetricBin {
    std::string name;
    long long count = 0;
    // Absent when the bin holds no pixels.
    std::optional<double> epe, ae, epe_d, ae_d;
};

struct MetricsReport {
    double epe = 0.0;
    double ae = 0.0;
    std::optional<double> epe_d;
    std::optional<double> ae_d;
    long long count = 0;
    std::optional<DistortionRange> range;
    std::vector<MetricBin> bins; // all, s<5, s<10, s<20, s>=20
};

namespace detail {

inline void check_same_dims(const FlowField& pred, const FlowField& gt) {
    if (!pred.same_shape(gt))
        throw DimensionMismatch("prediction is " + std::to_string(pred.height()) + "x" +
                                std::to_string(pred.width()) + ", ground truth is " +
                                std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
}

inline void check_density(const FlowField& gt, const DistortionMap& dmap) {
    if (dmap.density.height() != gt.height() || dmap.density.width() != gt.width())
        throw DimensionMismatch("distortion map shape differs from flow shape");
    for (double d : dmap.density.data())
        if (!(d < 1.0))
            throw InvalidDensityError("distortion density must be < 1 everywhere");
}

inline constexpr std::array<const char*, 5> kBinNames{"all", "s<5", "s<10", "s<20", "s>=20"};

inline bool in_bin(std::size_t bin, double speed) {
    switch (bin) {
    case 0: return true;
    case 1: return speed < 5.0;
    case 2: return speed < 10.0;
    case 3: return speed < 20.0;
    default: return speed >= 20.0;
    }
}

struct Sums {
    double epe = 0.0, ae = 0.0, epe_d = 0.0, ae_d = 0.0;
    long long count = 0;
};

// Per-row sums reduced with a fixed pairwise tree, so the result does not
// depend on the thread count.
inline std::array<Sums, 5> accumulate(const FlowField& pred, const FlowField& gt,
                                      const DistortionMap* dmap) {
    const int h = gt.height(), w = gt.width();
    std::vector<std::array<Sums, 5>> rows(static_cast<std::size_t>(h));
    parallel_for(0, h, [&](std::ptrdiff_t ri) {
        const int r = static_cast<int>(ri);
        auto& acc = rows[static_cast<std::size_t>(r)];
        for (int c = 0; c < w; ++c) {
            if (!pred.valid(r, c) || !gt.valid(r, c))
                continue;
            const double ur = gt.u(r, c), vr = gt.v(r, c);
            const double e = endpoint_error(pred.u(r, c), pred.v(r, c), ur, vr);
            const double a = angular_error(pred.u(r, c), pred.v(r, c), ur, vr);
            const double wgt = dmap ? 1.0 / (1.0 - dmap->density.at(r, c)) : 0.0;
            const double speed = std::hypot(ur, vr);
            for (std::size_t b = 0; b < 5; ++b) {
                if (!in_bin(b, speed))
                    continue;
                acc[b].epe += e;
                acc[b].ae += a;
                acc[b].epe_d += e * wgt;
                acc[b].ae_d += a * wgt;
                ++acc[b].count;
            }
        }
    });

    std::array<Sums, 5> total{};
    std::vector<double> col(static_cast<std::size_t>(h));
    for (std::size_t b = 0; b < 5; ++b) {
        auto reduce = [&](auto member) {
            for (std::size_t r = 0; r < rows.size(); ++r)
                col[r] = rows[r][b].*member;
            return pairwise_sum(col);
        };
        total[b].epe = reduce(&Sums::epe);
        total[b].ae = reduce(&Sums::ae);
        total[b].epe_d = reduce(&Sums::epe_d);
        total[b].ae_d = reduce(&Sums::ae_d);
        for (const auto& row : rows)
            total[b].count += row[b].count;
    }
    return total;
}

} // namespace detail

// Mean end-point error over pixels valid in both fields (0 when none are).
inline double epe(const FlowField& pred, const FlowField& gt) {
    detail::check_same_dims(pred, gt);
    const auto s = detail::accumulate(pred, gt, nullptr)[0];
    return s.count ? s.epe / static_cast<double>(s.count) : 0.0;
}

inline double ae(const FlowField& pred, const FlowField& gt) {
    detail::check_same_dims(pred, gt);
    const auto s = detail::accumulate(pred, gt, nullptr)[0];
    return s.count ? s.ae / static_cast<double>(s.count) : 0.0;
}

// Per-pixel errors divided by (1 - d) before averaging.
inline double epe_d(const FlowField& pred, const FlowField& gt, const DistortionMap& dmap) {
    detail::check_same_dims(pred, gt);
    detail::check_density(gt, dmap);
    const auto s = detail::accumulate(pred, gt, &dmap)[0];
    return s.count ? s.epe_d / static_cast<double>(s.count) : 0.0;
}

inline double ae_d(const FlowField& pred, const FlowField& gt, const DistortionMap& dmap) {
    detail::check_same_dims(pred, gt);
    detail::check_density(gt, dmap);
    const auto s = detail::accumulate(pred, gt, &dmap)[0];
    return s.count ? s.ae_d / static_cast<double>(s.count) : 0.0;
}

// Metrics restricted to ground-truth speed regions. Without a distortion map
// the weighted variants are absent.
inline MetricsReport binned_report(const FlowField& pred, const FlowField& gt,
                                   const DistortionMap* dmap = nullptr) {
    detail::check_same_dims(pred, gt);
    if (dmap)
        detail::check_density(gt, *dmap);
    const auto sums = detail::accumulate(pred, gt, dmap);

    MetricsReport rep;
    if (dmap)
        rep.range = dmap->range;
    for (std::size_t b = 0; b < 5; ++b) {
        MetricBin bin{detail::kBinNames[b], sums[b].count, {}, {}, {}, {}};
        if (sums[b].count > 0) {
            const auto n = static_cast<double>(sums[b].count);
            bin.epe = sums[b].epe / n;
            bin.ae = sums[b].ae / n;
            if (dmap) {
                bin.epe_d = sums[b].epe_d / n;
                bin.ae_d = sums[b].ae_d / n;
            }
        }
        rep.bins.push_back(bin);
    }
    const MetricBin& all = rep.bins.front();
    rep.count = all.count;
    rep.epe = all.epe.value_or(0.0);
    rep.ae = all.ae.value_or(0.0);
    rep.epe_d = all.epe_d;
    rep.ae_d = all.ae_d;
    return rep;
}

} // namespace omniflow
