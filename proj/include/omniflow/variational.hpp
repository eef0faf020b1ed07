#pragma once

// Coarse-to-fine Horn-Schunck flow.
//
// Each pyramid level linearises brightness constancy around the current
// flow (u0, v0) after warping the second image, then minimises
//
//   E(U, V) = sum_p m_p (Ix (U - u0) + Iy (V - v0) + It)^2
//           + alpha^2 sum_{p~q} (U_p - U_q)^2 + (V_p - V_q)^2
//
// over 4-neighbour edges, where m_p drops pixels warped outside the image.
// Sweeps are red-black Gauss-Seidel with an exact 2x2 solve per pixel, so
// every sweep is a block-coordinate descent step and E never increases.

#include <algorithm>
#include <cmath>
#include <vector>

#include "raster.hpp"

namespace omniflow {

struct VariationalParams {
    double alpha = 10.0;      // smoothness weight (intensities in [0, 255])
    int iterations = 200;     // sweeps per warp
    int pyramid_levels = 4;
    int warps = 1;            // re-linearisations per level
    double presmooth_sigma = 1.0;
};

struct VariationalDiagnostics {
    struct Stage {
        int level = 0; // 0 = finest
        int warp = 0;
        std::vector<double> energy; // before the first sweep, then after each sweep
    };
    std::vector<Stage> stages;
    bool low_confidence = false; // set for textureless input (flow forced to zero)
};

namespace detail {

inline EquirectRaster downsample2(const EquirectRaster& img) {
    const int h = std::max(1, (img.height() + 1) / 2);
    const int w = std::max(1, (img.width() + 1) / 2);
    return resize_bilinear(gaussian_blur(img, 0.8), h, w);
}

struct LinearSystem {
    int h = 0, w = 0;
    std::vector<double> ix, iy, it, mask;
};

inline LinearSystem linearise(const EquirectRaster& i1, const EquirectRaster& i2,
                              const std::vector<double>& u, const std::vector<double>& v) {
    const int h = i1.height(), w = i1.width();
    LinearSystem sys;
    sys.h = h;
    sys.w = w;
    const auto n = static_cast<std::size_t>(h) * w;
    sys.ix.assign(n, 0.0);
    sys.iy.assign(n, 0.0);
    sys.it.assign(n, 0.0);
    sys.mask.assign(n, 0.0);

    EquirectRaster warped(h, w, 1);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const std::size_t k = static_cast<std::size_t>(r) * w + c;
            const double x = c + u[k], y = r + v[k];
            warped.at(r, c) = sample_bilinear(i2, PixelCoord{y, x}, 0, EdgeMode::clamp);
            sys.mask[k] = (x >= 0.0 && x <= w - 1.0 && y >= 0.0 && y <= h - 1.0) ? 1.0 : 0.0;
        }
    auto avg = [&](int r, int c) {
        r = std::clamp(r, 0, h - 1);
        c = std::clamp(c, 0, w - 1);
        return 0.5 * (i1.at(r, c) + warped.at(r, c));
    };
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const std::size_t k = static_cast<std::size_t>(r) * w + c;
            sys.ix[k] = 0.5 * (avg(r, c + 1) - avg(r, c - 1));
            sys.iy[k] = 0.5 * (avg(r + 1, c) - avg(r - 1, c));
            sys.it[k] = warped.at(r, c) - i1.at(r, c);
        }
    return sys;
}

inline double energy(const LinearSystem& s, double alpha2, const std::vector<double>& u0,
                     const std::vector<double>& v0, const std::vector<double>& u,
                     const std::vector<double>& v) {
    double data = 0.0, smooth = 0.0;
    for (int r = 0; r < s.h; ++r)
        for (int c = 0; c < s.w; ++c) {
            const std::size_t k = static_cast<std::size_t>(r) * s.w + c;
            const double res = s.ix[k] * (u[k] - u0[k]) + s.iy[k] * (v[k] - v0[k]) + s.it[k];
            data += s.mask[k] * res * res;
            if (c + 1 < s.w) {
                const double du = u[k + 1] - u[k], dv = v[k + 1] - v[k];
                smooth += du * du + dv * dv;
            }
            if (r + 1 < s.h) {
                const double du = u[k + static_cast<std::size_t>(s.w)] - u[k];
                const double dv = v[k + static_cast<std::size_t>(s.w)] - v[k];
                smooth += du * du + dv * dv;
            }
        }
    return data + alpha2 * smooth;
}

inline void sweep(const LinearSystem& s, double alpha2, const std::vector<double>& u0,
                  const std::vector<double>& v0, std::vector<double>& u, std::vector<double>& v) {
    const int h = s.h, w = s.w;
    for (int color = 0; color < 2; ++color)
        for (int r = 0; r < h; ++r)
            for (int c = (r + color) % 2; c < w; c += 2) {
                const std::size_t k = static_cast<std::size_t>(r) * w + c;
                double su = 0.0, sv = 0.0, nb = 0.0;
                if (c > 0) { su += u[k - 1]; sv += v[k - 1]; nb += 1.0; }
                if (c + 1 < w) { su += u[k + 1]; sv += v[k + 1]; nb += 1.0; }
                if (r > 0) { su += u[k - static_cast<std::size_t>(w)]; sv += v[k - static_cast<std::size_t>(w)]; nb += 1.0; }
                if (r + 1 < h) { su += u[k + static_cast<std::size_t>(w)]; sv += v[k + static_cast<std::size_t>(w)]; nb += 1.0; }
                const double m = s.mask[k];
                const double ix = s.ix[k], iy = s.iy[k];
                const double rhs = s.it[k] - ix * u0[k] - iy * v0[k];
                const double a = m * ix * ix + alpha2 * nb;
                const double b = m * ix * iy;
                const double d = m * iy * iy + alpha2 * nb;
                const double b1 = alpha2 * su - m * ix * rhs;
                const double b2 = alpha2 * sv - m * iy * rhs;
                const double det = a * d - b * b;
                if (!(det > 0.0))
                    continue;
                u[k] = (d * b1 - b * b2) / det;
                v[k] = (a * b2 - b * b1) / det;
            }
}

inline bool textureless(const EquirectRaster& img) {
    const auto data = img.data();
    const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
    return *hi - *lo < 1e-9;
}

} // namespace detail

// Flow from p1 to p2 in pixel units of the input. Multi-channel input is
// converted to luma. Deterministic and single-threaded (callers parallelise
// across patches).
inline FlowField estimate_variational(const EquirectRaster& p1, const EquirectRaster& p2,
                                      const VariationalParams& params = {},
                                      VariationalDiagnostics* diag = nullptr) {
    if (!(p1.height() == p2.height() && p1.width() == p2.width()))
        throw DimensionMismatch("variational backend: patch sizes differ");
    if (params.iterations < 0 || params.pyramid_levels < 1 || params.warps < 1 || params.alpha <= 0.0)
        throw ConfigError("variational backend: invalid parameters");

    const EquirectRaster g1 = to_gray(p1), g2 = to_gray(p2);
    FlowField result(p1.height(), p1.width());
    if (detail::textureless(g1) && detail::textureless(g2)) {
        if (diag)
            diag->low_confidence = true;
        return result;
    }

    std::vector<EquirectRaster> pyr1{g1}, pyr2{g2};
    while (static_cast<int>(pyr1.size()) < params.pyramid_levels &&
           std::min(pyr1.back().height(), pyr1.back().width()) >= 16) {
        pyr1.push_back(detail::downsample2(pyr1.back()));
        pyr2.push_back(detail::downsample2(pyr2.back()));
    }

    const double alpha2 = params.alpha * params.alpha;
    std::vector<double> u, v;
    int prev_h = 0, prev_w = 0;
    for (int level = static_cast<int>(pyr1.size()) - 1; level >= 0; --level) {
        const EquirectRaster i1 = gaussian_blur(pyr1[static_cast<std::size_t>(level)], params.presmooth_sigma);
        const EquirectRaster i2 = gaussian_blur(pyr2[static_cast<std::size_t>(level)], params.presmooth_sigma);
        const int h = i1.height(), w = i1.width();
        const auto n = static_cast<std::size_t>(h) * w;

        if (u.empty()) {
            u.assign(n, 0.0);
            v.assign(n, 0.0);
        } else {
            // Upsample the coarser flow and rescale it to this level's pixels.
            FlowField coarse(prev_h, prev_w);
            for (int r = 0; r < prev_h; ++r)
                for (int c = 0; c < prev_w; ++c) {
                    const std::size_t k = static_cast<std::size_t>(r) * prev_w + c;
                    coarse.u(r, c) = u[k];
                    coarse.v(r, c) = v[k];
                }
            const EquirectRaster up = resize_bilinear(coarse.raster(), h, w);
            const double sx = static_cast<double>(w) / prev_w, sy = static_cast<double>(h) / prev_h;
            u.assign(n, 0.0);
            v.assign(n, 0.0);
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c) {
                    const std::size_t k = static_cast<std::size_t>(r) * w + c;
                    u[k] = up.at(r, c, 0) * sx;
                    v[k] = up.at(r, c, 1) * sy;
                }
        }

        for (int warp = 0; warp < params.warps; ++warp) {
            const detail::LinearSystem sys = detail::linearise(i1, i2, u, v);
            const std::vector<double> u0 = u, v0 = v;
            VariationalDiagnostics::Stage stage{level, warp, {}};
            if (diag)
                stage.energy.push_back(detail::energy(sys, alpha2, u0, v0, u, v));
            for (int it = 0; it < params.iterations; ++it) {
                detail::sweep(sys, alpha2, u0, v0, u, v);
                if (diag)
                    stage.energy.push_back(detail::energy(sys, alpha2, u0, v0, u, v));
            }
            if (diag)
                diag->stages.push_back(std::move(stage));
        }
        prev_h = h;
        prev_w = w;
    }

    for (int r = 0; r < result.height(); ++r)
        for (int c = 0; c < result.width(); ++c) {
            const std::size_t k = static_cast<std::size_t>(r) * result.width() + c;
            result.u(r, c) = u[k];
            result.v(r, c) = v[k];
        }
    return result;
}

} // namespace omniflow
