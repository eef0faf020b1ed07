#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "omniflow.hpp"

namespace testutil {

inline omniflow::FlowField random_flow(int h, int w, std::uint64_t seed, double scale = 10.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-scale, scale);
    omniflow::FlowField f(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            f.u(r, c) = d(rng);
            f.v(r, c) = d(rng);
        }
    return f;
}

inline double psnr(const omniflow::EquirectRaster& a, const omniflow::EquirectRaster& b, int skip_rows = 0) {
    double se = 0.0;
    long long n = 0;
    for (int r = skip_rows; r < a.height() - skip_rows; ++r)
        for (int c = 0; c < a.width(); ++c)
            for (int ch = 0; ch < a.channels(); ++ch) {
                const double d = a.at(r, c, ch) - b.at(r, c, ch);
                se += d * d;
                ++n;
            }
    const double mse = se / static_cast<double>(n);
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

// Great-circle distance between two directions.
inline double angle_between(const omniflow::UnitVec3& a, const omniflow::UnitVec3& b) {
    const double cx = a.y * b.z - a.z * b.y, cy = a.z * b.x - a.x * b.z, cz = a.x * b.y - a.y * b.x;
    return std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), a.x * b.x + a.y * b.y + a.z * b.z);
}

} // namespace testutil
