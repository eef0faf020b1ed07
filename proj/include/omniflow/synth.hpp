#pragma once

// Synthetic 360 degree fixtures: band-limited textures defined on the unit
// sphere, rotation pairs, and their exact flow fields.

#include <fftw3.h>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "equirect_remap.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "raster.hpp"
#include "sphere_geom.hpp"
#include "stats.hpp"

namespace omniflow {

enum class TextureKind { noise, checker, gradient };

inline TextureKind texture_from_string(const std::string& s) {
    if (s == "noise")
        return TextureKind::noise;
    if (s == "checker")
        return TextureKind::checker;
    if (s == "gradient")
        return TextureKind::gradient;
    throw ConfigError("unknown texture: " + s + " (expected noise, checker or gradient)");
}

inline const char* to_string(TextureKind k) {
    switch (k) {
    case TextureKind::noise: return "noise";
    case TextureKind::checker: return "checker";
    case TextureKind::gradient: return "gradient";
    }
    return "?";
}

struct SyntheticScene {
    TextureKind texture = TextureKind::noise;
    std::uint64_t seed = 0;
    int height = 256;
    int width = 512;

    void validate() const {
        if (height < 2 || width != 2 * height)
            throw ConfigError("synthetic scene needs width = 2 * height >= 4");
    }
};

// Grey level as a function of direction. Noise is a sum of plane waves
// cos(w . v + phase) with |w| in [6, 20] rad, so it is smooth at every scale
// of the equirect grid, including the poles.
class SphereTexture {
public:
    explicit SphereTexture(const SyntheticScene& scene) : kind_(scene.texture) {
        if (kind_ != TextureKind::noise)
            return;
        std::mt19937_64 rng(scene.seed);
        auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
        for (int k = 0; k < kWaves; ++k) {
            // Uniform direction, then a radius in the band.
            const double z = 2.0 * uniform() - 1.0;
            const double a = kTwoPi * uniform();
            const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double f = 6.0 + 14.0 * uniform();
            waves_.push_back({f * s * std::cos(a), f * s * std::sin(a), f * z, kTwoPi * uniform()});
        }
    }

    double operator()(const UnitVec3& v) const {
        switch (kind_) {
        case TextureKind::noise: {
            double s = 0.0;
            for (const Wave& w : waves_)
                s += std::cos(w.x * v.x + w.y * v.y + w.z * v.z + w.phase);
            return 127.5 + kNoiseGain * s;
        }
        case TextureKind::checker: {
            const LatLon ll = unitvec_to_latlon(v);
            return 127.5 + 100.0 * std::tanh(3.0 * std::sin(8.0 * ll.lon) * std::sin(8.0 * ll.lat));
        }
        case TextureKind::gradient:
            return 127.5 + 100.0 * (0.6 * v.z + 0.3 * v.x + 0.1 * v.y);
        }
        return 0.0;
    }

private:
    struct Wave {
        double x, y, z, phase;
    };
    static constexpr int kWaves = 24;
    // Sum of 24 unit cosines has standard deviation sqrt(12); this gives ~40.
    static constexpr double kNoiseGain = 11.5;

    TextureKind kind_;
    std::vector<Wave> waves_;
};

// One-channel frame. With a view rotation R the texture is evaluated at
// R^T d, i.e. the analytic counterpart of rotate_frame(render_frame(scene), R).
inline EquirectRaster render_frame(const SyntheticScene& scene,
                                   const std::optional<RotationMatrix>& view = std::nullopt) {
    scene.validate();
    const SphereTexture tex(scene);
    const int h = scene.height, w = scene.width;
    EquirectRaster img(h, w, 1);
    const RotationMatrix inv = view ? view->transposed() : RotationMatrix{};
    parallel_for(0, h, [&](std::ptrdiff_t ri) {
        const int r = static_cast<int>(ri);
        for (int c = 0; c < w; ++c) {
            const UnitVec3 d = pixel_to_unitvec({static_cast<double>(r), static_cast<double>(c)}, h, w);
            img.at(r, c) = tex(view ? inv.apply(d) : d);
        }
    });
    return img;
}

struct FramePair {
    EquirectRaster frame1;
    EquirectRaster frame2;
};

inline FramePair render_pair(const SyntheticScene& scene, const RotationSpec& r) {
    EquirectRaster f1 = render_frame(scene);
    EquirectRaster f2 = r.is_identity() ? f1 : rotate_frame(f1, r);
    return {std::move(f1), std::move(f2)};
}

// Displacement of the continuous pixel q under R: pixel(R sphere(q)) - q,
// column difference wrapped to (-W/2, W/2].
inline std::pair<double, double> rotation_displacement(PixelCoord q, const RotationMatrix& rot, int height,
                                                       int width) {
    const PixelCoord e = unitvec_to_pixel(rot.apply(pixel_to_unitvec(q, height, width)), height, width);
    return {wrap_shortest(e.col - q.col, width), e.row - q.row};
}

inline FlowField rotation_flow_gt(int height, int width, const RotationMatrix& rot) {
    if (height < 1 || width < 1)
        throw InputError("rotation_flow_gt: dimensions must be positive");
    FlowField f(height, width);
    parallel_for(0, height, [&](std::ptrdiff_t ri) {
        const int r = static_cast<int>(ri);
        for (int c = 0; c < width; ++c) {
            const auto [u, v] =
                rotation_displacement({static_cast<double>(r), static_cast<double>(c)}, rot, height, width);
            f.u(r, c) = u;
            f.v(r, c) = v;
        }
    });
    return f;
}

inline FlowField rotation_flow_gt(int height, int width, const RotationSpec& r) {
    if (r.is_identity())
        return FlowField(height, width);
    return rotation_flow_gt(height, width, rotation_from_spec(r));
}

// --- noise fields for the statistics suite ------------------------------------

// n x n Gaussian field whose power spectrum falls as |f|^-exponent
// (exponent 0: white). Mean 127.5, standard deviation `sigma`.
inline EquirectRaster power_law_noise(int n, double exponent, std::uint64_t seed, double sigma = 30.0) {
    if (n < 4 || n % 2 != 0)
        throw ConfigError("power_law_noise: size must be even and >= 4");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int nc = n / 2 + 1;
    fftw_complex* spec = fftw_alloc_complex(static_cast<std::size_t>(n) * nc);
    double* field = fftw_alloc_real(static_cast<std::size_t>(n) * n);
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_c2r_2d(n, n, spec, field, FFTW_ESTIMATE);
    }
    for (int ky = 0; ky < n; ++ky) {
        const int fy = ky <= n / 2 ? ky : ky - n;
        for (int kx = 0; kx < nc; ++kx) {
            const double f = std::hypot(fy, kx);
            const double amp = f > 0.0 ? std::pow(f, -0.5 * exponent) : 0.0;
            fftw_complex& z = spec[static_cast<std::size_t>(ky) * nc + kx];
            z[0] = amp * normal(rng);
            z[1] = amp * normal(rng);
        }
    }
    fftw_execute(plan);

    const auto count = static_cast<double>(n) * n;
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * n; ++i)
        mean += field[i];
    mean /= count;
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * n; ++i)
        sq += (field[i] - mean) * (field[i] - mean);
    const double scale = sq > 0.0 ? sigma / std::sqrt(sq / count) : 0.0;

    EquirectRaster img(n, n, 1);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            img.at(r, c) = 127.5 + scale * (field[static_cast<std::size_t>(r) * n + c] - mean);
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(spec);
    fftw_free(field);
    return img;
}

} // namespace omniflow
