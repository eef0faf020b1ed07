#pragma once

// Flow visualisation: the Middlebury colour wheel, and an RGBA encoding of
// motion on the unit sphere (RGB from the x/y motion components, alpha from z).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "image_io.hpp"
#include "raster.hpp"
#include "sphere_geom.hpp"

namespace omniflow {

using Rgb = std::array<std::uint8_t, 3>;

// 55-entry wheel: RY, YG, GC, CB, BM, MR segments of 15, 6, 4, 11, 13, 6.
inline const std::vector<std::array<int, 3>>& color_wheel() {
    static const std::vector<std::array<int, 3>> wheel = [] {
        constexpr int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
        std::vector<std::array<int, 3>> w;
        for (int i = 0; i < RY; ++i) w.push_back({255, 255 * i / RY, 0});
        for (int i = 0; i < YG; ++i) w.push_back({255 - 255 * i / YG, 255, 0});
        for (int i = 0; i < GC; ++i) w.push_back({0, 255, 255 * i / GC});
        for (int i = 0; i < CB; ++i) w.push_back({0, 255 - 255 * i / CB, 255});
        for (int i = 0; i < BM; ++i) w.push_back({255 * i / BM, 0, 255});
        for (int i = 0; i < MR; ++i) w.push_back({255, 0, 255 - 255 * i / MR});
        return w;
    }();
    return wheel;
}

// Colour of a displacement already divided by the normalising radius.
// Magnitudes above 1 are saturated (dimmed to 75%).
inline Rgb wheel_color(double fx, double fy) {
    const auto& wheel = color_wheel();
    const int ncols = static_cast<int>(wheel.size());
    const double rad = std::sqrt(fx * fx + fy * fy);
    const double a = std::atan2(-fy, -fx) / kPi;
    const double fk = (a + 1.0) / 2.0 * (ncols - 1);
    const int k0 = static_cast<int>(fk);
    const int k1 = (k0 + 1) % ncols;
    const double f = fk - k0;
    Rgb out{};
    for (std::size_t b = 0; b < 3; ++b) {
        const double col0 = wheel[static_cast<std::size_t>(k0)][b] / 255.0;
        const double col1 = wheel[static_cast<std::size_t>(k1)][b] / 255.0;
        double col = (1.0 - f) * col0 + f * col1;
        if (rad <= 1.0)
            col = 1.0 - rad * (1.0 - col);
        else
            col *= 0.75;
        out[b] = static_cast<std::uint8_t>(255.0 * col);
    }
    return out;
}

// Middlebury colour coding. With a clip radius, vectors are normalised by it
// (larger ones saturate); otherwise by the largest valid magnitude. Invalid
// pixels are black.
inline ByteImage flow_to_color(const FlowField& flow, std::optional<double> clip = std::nullopt) {
    double maxrad = 0.0;
    if (clip) {
        maxrad = *clip;
    } else {
        for (int r = 0; r < flow.height(); ++r)
            for (int c = 0; c < flow.width(); ++c)
                if (flow.valid(r, c))
                    maxrad = std::max(maxrad, std::hypot(flow.u(r, c), flow.v(r, c)));
    }
    if (!(maxrad > 0.0))
        maxrad = 1.0;

    ByteImage img(flow.height(), flow.width(), 3);
    for (int r = 0; r < flow.height(); ++r)
        for (int c = 0; c < flow.width(); ++c) {
            if (!flow.valid(r, c))
                continue;
            const Rgb px = wheel_color(flow.u(r, c) / maxrad, flow.v(r, c) / maxrad);
            for (int b = 0; b < 3; ++b)
                img.at(r, c, b) = px[static_cast<std::size_t>(b)];
        }
    return img;
}

// 3D chord between the lifted start and end points of a pixel's displacement.
inline UnitVec3 sphere_motion(const FlowField& flow, int r, int c) {
    const int h = flow.height(), w = flow.width();
    const auto lift = [&](PixelCoord p) {
        return angular_to_unitvec(to_sphere_dir(pixel_to_angular(p, h, w)));
    };
    const UnitVec3 s = lift({static_cast<double>(r), static_cast<double>(c)});
    const UnitVec3 e = lift({r + flow.v(r, c), c + flow.u(r, c)});
    return {e.x - s.x, e.y - s.y, e.z - s.z};
}

inline std::uint8_t alpha_from_z(double z) {
    if (std::abs(z) < 1e-9) // 0 sits on a rounding boundary
        z = 0.0;
    const double a = 0.5 * (std::clamp(z, -1.0, 1.0) + 1.0);
    return static_cast<std::uint8_t>(std::lround(255.0 * a));
}

// RGB: colour wheel on the (x, y) motion components, normalised by their
// largest valid magnitude. Alpha: affine in the z component, z in [-1, 1] ->
// [0, 1], so motion with no z component sits at 0.5.
inline ByteImage sphere_flow_to_rgba(const FlowField& flow) {
    const int h = flow.height(), w = flow.width();
    std::vector<UnitVec3> motion(static_cast<std::size_t>(h) * w);
    double maxrad = 0.0;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (!flow.valid(r, c))
                continue;
            const UnitVec3 m = sphere_motion(flow, r, c);
            motion[static_cast<std::size_t>(r) * w + c] = m;
            maxrad = std::max(maxrad, std::hypot(m.x, m.y));
        }
    if (!(maxrad > 0.0))
        maxrad = 1.0;

    ByteImage img(h, w, 4);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (!flow.valid(r, c))
                continue;
            const UnitVec3& m = motion[static_cast<std::size_t>(r) * w + c];
            const Rgb px = wheel_color(m.x / maxrad, m.y / maxrad);
            for (int b = 0; b < 3; ++b)
                img.at(r, c, b) = px[static_cast<std::size_t>(b)];
            img.at(r, c, 3) = alpha_from_z(m.z);
        }
    return img;
}

} // namespace omniflow
