#pragma once

// Frame and flow statistics: luminance histogram, radially averaged power
// spectrum with a log-log slope fit, derivative kurtosis, and flow
// speed/direction/derivative histograms.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "error.hpp"
#include "raster.hpp"
#include "sphere_geom.hpp"

namespace omniflow {

// Fixed-edge histogram; values outside [lo, hi) land in the end bins so the
// total always equals the number of samples added.
struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<std::uint64_t> counts;

    Histogram() = default;
    Histogram(double lo_, double hi_, int bins)
        : lo(lo_), hi(hi_), counts(static_cast<std::size_t>(bins), 0) {}

    std::size_t bin_of(double x) const {
        const auto n = static_cast<double>(counts.size());
        const double t = std::floor((x - lo) / (hi - lo) * n);
        return static_cast<std::size_t>(std::clamp(t, 0.0, n - 1.0));
    }
    void add(double x) { ++counts[bin_of(x)]; }

    double bin_center(std::size_t i) const {
        return lo + (static_cast<double>(i) + 0.5) * (hi - lo) / static_cast<double>(counts.size());
    }

    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (auto c : counts)
            s += c;
        return s;
    }

    void merge(const Histogram& o) {
        if (o.lo != lo || o.hi != hi || o.counts.size() != counts.size())
            throw InputError("cannot merge histograms with different edges");
        for (std::size_t i = 0; i < counts.size(); ++i)
            counts[i] += o.counts[i];
    }
};

// --- luminance --------------------------------------------------------------

// 256 bins over all pixels of all frames; BT.601 luma rounded to the nearest
// integer level.
inline Histogram luminance_histogram(std::span<const EquirectRaster> frames) {
    if (frames.empty())
        throw InputError("luminance_histogram: no frames");
    Histogram hist(0.0, 256.0, 256);
    for (const EquirectRaster& f : frames) {
        const EquirectRaster g = to_gray(f);
        for (double y : g.data())
            hist.add(std::clamp(std::round(y), 0.0, 255.0));
    }
    return hist;
}

// --- power spectrum ---------------------------------------------------------

struct PowerSpectrum {
    std::vector<double> frequency; // cycles/pixel, one entry per integer radius >= 1
    std::vector<double> power;     // radially averaged |F|^2, averaged over frames
    double slope = 0.0;            // log-log least-squares slope over the fit band
    double intercept = 0.0;
    int crop = 0;                  // side of the centred square actually used
    double band_lo = 0.02;
    double band_hi = 0.35;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Radially averaged power of one mean-removed, Hann-windowed n x n crop.
inline std::vector<double> radial_power(const EquirectRaster& gray, int top, int left, int n) {
    std::vector<double> hann(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        hann[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(kTwoPi * i / n);

    double mean = 0.0;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            mean += gray.at(top + r, left + c);
    mean /= static_cast<double>(n) * n;

    const int nc = n / 2 + 1;
    double* in = fftw_alloc_real(static_cast<std::size_t>(n) * n);
    fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n) * nc);
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_2d(n, n, in, out, FFTW_ESTIMATE);
    }
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            in[static_cast<std::size_t>(r) * n + c] =
                (gray.at(top + r, left + c) - mean) * hann[static_cast<std::size_t>(r)] *
                hann[static_cast<std::size_t>(c)];
    fftw_execute(plan);

    const int kmax = n / 2;
    std::vector<double> sum(static_cast<std::size_t>(kmax + 1), 0.0);
    std::vector<double> cnt(static_cast<std::size_t>(kmax + 1), 0.0);
    const double norm = 1.0 / (static_cast<double>(n) * n);
    for (int ky = 0; ky < n; ++ky) {
        const int fy = ky <= n / 2 ? ky : ky - n;
        for (int kx = 0; kx < nc; ++kx) {
            const auto k = static_cast<int>(std::lround(std::hypot(fy, kx)));
            if (k > kmax)
                continue;
            const fftw_complex& z = out[static_cast<std::size_t>(ky) * nc + kx];
            sum[static_cast<std::size_t>(k)] += (z[0] * z[0] + z[1] * z[1]) * norm;
            cnt[static_cast<std::size_t>(k)] += 1.0;
        }
    }
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    for (std::size_t k = 0; k < sum.size(); ++k)
        if (cnt[k] > 0)
            sum[k] /= cnt[k];
    return sum;
}

} // namespace detail

// Centre crop of side `crop` (or, when a frame is smaller and fallback is
// allowed, the largest centred even square), Hann window, 2D FFT, radial
// average, mean over frames, then a log10-log10 line fit over
// [band_lo, band_hi] cycles/pixel.
inline PowerSpectrum power_spectrum_slope(std::span<const EquirectRaster> frames, int crop = 512,
                                          bool allow_fallback = true) {
    if (frames.empty())
        throw InputError("power_spectrum_slope: no frames");
    int n = crop;
    for (const EquirectRaster& f : frames) {
        const int side = std::min(f.height(), f.width());
        if (side < crop) {
            if (!allow_fallback)
                throw ConfigError("crop " + std::to_string(crop) + " exceeds frame size " +
                                  std::to_string(f.height()) + "x" + std::to_string(f.width()));
            n = std::min(n, side - side % 2);
        }
    }
    if (n < 8)
        throw InputError("power_spectrum_slope: frames too small");

    PowerSpectrum ps;
    ps.crop = n;
    std::vector<double> total;
    for (const EquirectRaster& f : frames) {
        const EquirectRaster g = to_gray(f);
        std::vector<double> radial =
            detail::radial_power(g, (g.height() - n) / 2, (g.width() - n) / 2, n);
        if (total.empty())
            total.assign(radial.size(), 0.0);
        for (std::size_t k = 0; k < radial.size(); ++k)
            total[k] += radial[k];
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t k = 1; k < total.size(); ++k) {
        const double freq = static_cast<double>(k) / n;
        const double p = total[k] / static_cast<double>(frames.size());
        ps.frequency.push_back(freq);
        ps.power.push_back(p);
        if (freq < ps.band_lo || freq > ps.band_hi || !(p > 0.0))
            continue;
        const double x = std::log10(freq), y = std::log10(p);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m < 2)
        throw NumericError("power_spectrum_slope: fewer than two points in the fit band");
    const double denom = m * sxx - sx * sx;
    ps.slope = (m * sxy - sx * sy) / denom;
    ps.intercept = (sy - ps.slope * sx) / m;
    return ps;
}

// --- kurtosis -----------------------------------------------------------------

// Pearson (non-excess) kurtosis mu4 / sigma^4; a normal distribution reads 3.
// Absent for fewer than two samples or zero variance.
inline std::optional<double> pearson_kurtosis(std::span<const double> x) {
    if (x.size() < 2)
        return std::nullopt;
    double mean = 0.0;
    for (double v : x)
        mean += v;
    mean /= static_cast<double>(x.size());
    double m2 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = (v - mean) * (v - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= static_cast<double>(x.size());
    m4 /= static_cast<double>(x.size());
    if (!(m2 > 0.0))
        return std::nullopt;
    return m4 / (m2 * m2);
}

struct DerivativeKurtosis {
    std::optional<double> spatial;  // pooled central differences along x and y
    std::optional<double> temporal; // consecutive-frame differences
};

inline DerivativeKurtosis derivative_kurtosis(std::span<const EquirectRaster> frames) {
    if (frames.empty())
        throw InputError("derivative_kurtosis: no frames");
    std::vector<double> spatial, temporal;
    std::optional<EquirectRaster> prev;
    for (const EquirectRaster& f : frames) {
        EquirectRaster g = to_gray(f);
        const int h = g.height(), w = g.width();
        for (int r = 0; r < h; ++r)
            for (int c = 1; c + 1 < w; ++c)
                spatial.push_back(0.5 * (g.at(r, c + 1) - g.at(r, c - 1)));
        for (int r = 1; r + 1 < h; ++r)
            for (int c = 0; c < w; ++c)
                spatial.push_back(0.5 * (g.at(r + 1, c) - g.at(r - 1, c)));
        if (prev) {
            if (!prev->same_shape(g))
                throw DimensionMismatch("derivative_kurtosis: frames differ in size");
            for (std::size_t i = 0; i < g.data().size(); ++i)
                temporal.push_back(g.data()[i] - prev->data()[i]);
        }
        prev = std::move(g);
    }
    return {pearson_kurtosis(spatial), pearson_kurtosis(temporal)};
}

// --- flow statistics ----------------------------------------------------------

struct FlowStatistics {
    Histogram u{-64.0, 64.0, 128};
    Histogram v{-64.0, 64.0, 128};
    Histogram speed{0.0, 64.0, 128};
    Histogram direction{-kPi, kPi, 72};
    Histogram du{-8.0, 8.0, 128}; // pooled d/dx and d/dy of u
    Histogram dv{-8.0, 8.0, 128};
    std::uint64_t samples = 0;
};

// Direction of (u, v) via atan2, with atan2(0, 0) := 0.
inline double flow_direction(double u, double v) {
    if (u == 0.0 && v == 0.0)
        return 0.0;
    return std::atan2(v, u);
}

inline void accumulate_flow_statistics(FlowStatistics& st, const FlowField& f) {
    const int h = f.height(), w = f.width();
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (!f.valid(r, c))
                continue;
            const double u = f.u(r, c), v = f.v(r, c);
            st.u.add(u);
            st.v.add(v);
            st.speed.add(std::sqrt(u * u + v * v));
            st.direction.add(flow_direction(u, v));
            ++st.samples;
            if (c > 0 && c + 1 < w && f.valid(r, c - 1) && f.valid(r, c + 1)) {
                st.du.add(0.5 * (f.u(r, c + 1) - f.u(r, c - 1)));
                st.dv.add(0.5 * (f.v(r, c + 1) - f.v(r, c - 1)));
            }
            if (r > 0 && r + 1 < h && f.valid(r - 1, c) && f.valid(r + 1, c)) {
                st.du.add(0.5 * (f.u(r + 1, c) - f.u(r - 1, c)));
                st.dv.add(0.5 * (f.v(r + 1, c) - f.v(r - 1, c)));
            }
        }
}

inline FlowStatistics flow_statistics(std::span<const FlowField> flows) {
    FlowStatistics st;
    for (const FlowField& f : flows)
        accumulate_flow_statistics(st, f);
    return st;
}

} // namespace omniflow
