#pragma once

// Resampling of equirectangular frames and flow fields under SO(3).

#include <array>
#include <cmath>
#include <vector>

#include "parallel.hpp"
#include "raster.hpp"
#include "sphere_geom.hpp"

namespace omniflow {

// Output direction d samples the input at R^T d.
inline EquirectRaster rotate_frame(const EquirectRaster& img, const RotationMatrix& rot) {
    const int h = img.height(), w = img.width(), nc = img.channels();
    EquirectRaster out(h, w, nc, img.kind());
    const RotationMatrix inv = rot.transposed();
    parallel_for(0, h, [&](std::ptrdiff_t ri) {
        const int r = static_cast<int>(ri);
        std::vector<double> px(static_cast<std::size_t>(nc));
        for (int c = 0; c < w; ++c) {
            const UnitVec3 d = pixel_to_unitvec({static_cast<double>(r), static_cast<double>(c)}, h, w);
            const PixelCoord src = unitvec_to_pixel(inv.apply(d), h, w);
            sample_bilinear(img, src, px, EdgeMode::sphere);
            for (int ch = 0; ch < nc; ++ch)
                out.at(r, c, ch) = px[static_cast<std::size_t>(ch)];
        }
    });
    return out;
}

// The all-zero spec returns an exact copy.
inline EquirectRaster rotate_frame(const EquirectRaster& img, const RotationSpec& r) {
    if (r.is_identity())
        return img;
    return rotate_frame(img, rotation_from_spec(r));
}

enum class FlowTransport {
    endpoint, // rotate start and end point on the sphere, re-aim the vector
    remap,    // move vectors to their new pixel without re-aiming (ablation)
};

// End point of a pixel-space displacement, rotated and expressed in pixels.
inline PixelCoord rotate_endpoint(PixelCoord start, double du, double dv, const RotationMatrix& rot,
                                  int height, int width) {
    const UnitVec3 e = pixel_to_unitvec({start.row + dv, start.col + du}, height, width);
    return unitvec_to_pixel(rot.apply(e), height, width);
}

// For each output pixel q: p = R^T q, p' = p + f(p); result is pixel(R p') - q
// with the column difference wrapped to (-W/2, W/2].
inline FlowField rotate_flow(const FlowField& flow, const RotationMatrix& rot,
                             FlowTransport transport = FlowTransport::endpoint) {
    const int h = flow.height(), w = flow.width();
    FlowField out(h, w);
    const RotationMatrix inv = rot.transposed();
    const bool masked = flow.has_mask();
    std::vector<std::uint8_t> valid(masked ? static_cast<std::size_t>(h) * w : 0, 1);

    parallel_for(0, h, [&](std::ptrdiff_t ri) {
        const int r = static_cast<int>(ri);
        std::array<double, 2> f{};
        for (int c = 0; c < w; ++c) {
            const PixelCoord q{static_cast<double>(r), static_cast<double>(c)};
            const PixelCoord p = unitvec_to_pixel(inv.apply(pixel_to_unitvec(q, h, w)), h, w);
            if (masked && sample_nearest(*flow.mask(), p, 0, EdgeMode::sphere) == 0) {
                valid[static_cast<std::size_t>(r) * w + c] = 0;
                continue;
            }
            sample_bilinear(flow.raster(), p, f, EdgeMode::sphere_flow);
            if (transport == FlowTransport::remap) {
                out.u(r, c) = f[0];
                out.v(r, c) = f[1];
                continue;
            }
            const PixelCoord end = rotate_endpoint(p, f[0], f[1], rot, h, w);
            out.u(r, c) = wrap_shortest(end.col - q.col, w);
            out.v(r, c) = end.row - q.row;
        }
    });

    if (masked) {
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                out.set_valid(r, c, valid[static_cast<std::size_t>(r) * w + c] != 0);
    }
    return out;
}

inline FlowField rotate_flow(const FlowField& flow, const RotationSpec& r,
                             FlowTransport transport = FlowTransport::endpoint) {
    if (r.is_identity())
        return flow;
    return rotate_flow(flow, rotation_from_spec(r), transport);
}

// Undoes rotate_flow(flow, r): applies the inverse rotation R^T.
inline FlowField reverse_rotate_flow(const FlowField& flow, const RotationSpec& r,
                                     FlowTransport transport = FlowTransport::endpoint) {
    if (r.is_identity())
        return flow;
    return rotate_flow(flow, rotation_from_spec(r).transposed(), transport);
}

} // namespace omniflow
