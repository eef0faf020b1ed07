#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "sphere_geom.hpp"

namespace omniflow {

enum class RasterKind { frame, flow, scalar_map };

// Row-major H x W x C grid of samples.
template <class T>
class Raster {
public:
    using value_type = T;

    Raster() = default;
    Raster(int height, int width, int channels, RasterKind kind = RasterKind::frame, T fill = T{})
        : height_(height), width_(width), channels_(channels), kind_(kind),
          data_(checked_size(height, width, channels), fill) {}

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    RasterKind kind() const { return kind_; }
    void set_kind(RasterKind k) { kind_ = k; }
    bool empty() const { return data_.empty(); }

    std::size_t index(int r, int c, int ch = 0) const {
        return (static_cast<std::size_t>(r) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(c)) *
                   static_cast<std::size_t>(channels_) +
               static_cast<std::size_t>(ch);
    }

    T& at(int r, int c, int ch = 0) { return data_[index(r, c, ch)]; }
    const T& at(int r, int c, int ch = 0) const { return data_[index(r, c, ch)]; }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }

    std::span<T> row(int r) {
        return std::span<T>(data_).subspan(index(r, 0), static_cast<std::size_t>(width_ * channels_));
    }
    std::span<const T> row(int r) const {
        return std::span<const T>(data_).subspan(index(r, 0),
                                                 static_cast<std::size_t>(width_ * channels_));
    }

    bool same_shape(const Raster& o) const {
        return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
    }

    friend bool operator==(const Raster& a, const Raster& b) {
        return a.same_shape(b) && a.data_ == b.data_;
    }

private:
    static std::size_t checked_size(int h, int w, int c) {
        if (h <= 0 || w <= 0 || c <= 0)
            throw InputError("raster dimensions must be positive");
        return static_cast<std::size_t>(h) * static_cast<std::size_t>(w) *
               static_cast<std::size_t>(c);
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    RasterKind kind_ = RasterKind::frame;
    std::vector<T> data_;
};

using EquirectRaster = Raster<double>;
using Mask = Raster<std::uint8_t>;

// Two-channel displacement field in pixel units: channel 0 = u (columns),
// channel 1 = v (rows, downward positive).
class FlowField {
public:
    FlowField() = default;
    FlowField(int height, int width) : vec_(height, width, 2, RasterKind::flow, 0.0) {}
    explicit FlowField(EquirectRaster vec, std::optional<Mask> valid = std::nullopt)
        : vec_(std::move(vec)), valid_(std::move(valid)) {
        if (vec_.channels() != 2)
            throw InputError("flow raster must have two channels");
        vec_.set_kind(RasterKind::flow);
        if (valid_ && (valid_->height() != vec_.height() || valid_->width() != vec_.width()))
            throw DimensionMismatch("flow validity mask shape differs from flow shape");
    }

    int height() const { return vec_.height(); }
    int width() const { return vec_.width(); }

    double& u(int r, int c) { return vec_.at(r, c, 0); }
    double& v(int r, int c) { return vec_.at(r, c, 1); }
    double u(int r, int c) const { return vec_.at(r, c, 0); }
    double v(int r, int c) const { return vec_.at(r, c, 1); }

    bool valid(int r, int c) const { return !valid_ || valid_->at(r, c) != 0; }
    bool has_mask() const { return valid_.has_value(); }
    const std::optional<Mask>& mask() const { return valid_; }

    void set_valid(int r, int c, bool ok) {
        if (!valid_)
            valid_.emplace(height(), width(), 1, RasterKind::scalar_map, std::uint8_t{1});
        valid_->at(r, c) = ok ? 1 : 0;
    }

    const EquirectRaster& raster() const { return vec_; }
    EquirectRaster& raster() { return vec_; }

    bool same_shape(const FlowField& o) const {
        return height() == o.height() && width() == o.width();
    }

private:
    EquirectRaster vec_;
    std::optional<Mask> valid_;
};

// --- sampling ---------------------------------------------------------------

enum class EdgeMode {
    clamp,       // planar image: clamp to border
    sphere,      // equirect: wrap columns, reflect rows over the poles
    sphere_flow, // as sphere, but vectors reflected over a pole change sign
};

namespace detail {

// Offsets closer than this to a pixel centre are treated as exact, so that
// identity and integer-shift resampling reproduce input samples bit for bit.
inline constexpr double kSnap = 1e-9;

inline void split(double x, int& i0, double& frac) {
    const double f = std::floor(x);
    frac = x - f;
    i0 = static_cast<int>(f);
    if (frac < kSnap) {
        frac = 0.0;
    } else if (frac > 1.0 - kSnap) {
        frac = 0.0;
        ++i0;
    }
}

struct Tap {
    int row;
    int col;
    double sign;
};

inline Tap resolve(int r, int c, int h, int w, EdgeMode mode) {
    double sign = 1.0;
    if (mode == EdgeMode::clamp)
        return {std::clamp(r, 0, h - 1), std::clamp(c, 0, w - 1), 1.0};
    // Reflect over the poles (at most one hop is ever needed for |r| < 2H).
    if (r < 0) {
        r = -r - 1;
        c += w / 2;
        sign = -1.0;
    } else if (r >= h) {
        r = 2 * h - 1 - r;
        c += w / 2;
        sign = -1.0;
    }
    r = std::clamp(r, 0, h - 1);
    c %= w;
    if (c < 0)
        c += w;
    return {r, c, mode == EdgeMode::sphere_flow ? sign : 1.0};
}

} // namespace detail

// Bilinear sample of every channel at a continuous pixel position.
template <class T>
void sample_bilinear(const Raster<T>& img, PixelCoord p, std::span<double> out, EdgeMode mode) {
    int r0, c0;
    double fr, fc;
    detail::split(p.row, r0, fr);
    detail::split(p.col, c0, fc);
    const int h = img.height(), w = img.width(), nc = img.channels();
    std::fill(out.begin(), out.begin() + nc, 0.0);

    const std::array<double, 2> wr{1.0 - fr, fr};
    const std::array<double, 2> wc{1.0 - fc, fc};
    for (int dr = 0; dr < 2; ++dr) {
        if (wr[static_cast<std::size_t>(dr)] == 0.0)
            continue;
        for (int dc = 0; dc < 2; ++dc) {
            const double wt = wr[static_cast<std::size_t>(dr)] * wc[static_cast<std::size_t>(dc)];
            if (wt == 0.0)
                continue;
            const detail::Tap t = detail::resolve(r0 + dr, c0 + dc, h, w, mode);
            for (int ch = 0; ch < nc; ++ch)
                out[static_cast<std::size_t>(ch)] +=
                    wt * t.sign * static_cast<double>(img.at(t.row, t.col, ch));
        }
    }
}

template <class T>
double sample_bilinear(const Raster<T>& img, PixelCoord p, int channel, EdgeMode mode) {
    std::array<double, 8> buf{};
    if (img.channels() > 8) {
        std::vector<double> big(static_cast<std::size_t>(img.channels()));
        sample_bilinear(img, p, big, mode);
        return big[static_cast<std::size_t>(channel)];
    }
    sample_bilinear(img, p, buf, mode);
    return buf[static_cast<std::size_t>(channel)];
}

template <class T>
T sample_nearest(const Raster<T>& img, PixelCoord p, int channel, EdgeMode mode) {
    const auto r = static_cast<int>(std::floor(p.row + 0.5));
    const auto c = static_cast<int>(std::floor(p.col + 0.5));
    const detail::Tap t = detail::resolve(r, c, img.height(), img.width(), mode);
    return img.at(t.row, t.col, channel);
}

// --- planar image helpers ---------------------------------------------------

// ITU-R BT.601 luma for 3/4-channel rasters; 1-channel input is copied.
inline EquirectRaster to_gray(const EquirectRaster& img) {
    EquirectRaster out(img.height(), img.width(), 1, img.kind());
    const int nc = img.channels();
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c) {
            if (nc >= 3)
                out.at(r, c) = 0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) +
                               0.114 * img.at(r, c, 2);
            else
                out.at(r, c) = img.at(r, c, 0);
        }
    return out;
}

// Bilinear resize with the pixel-centre convention and clamped borders.
inline EquirectRaster resize_bilinear(const EquirectRaster& img, int height, int width) {
    EquirectRaster out(height, width, img.channels(), img.kind());
    const double sy = static_cast<double>(img.height()) / height;
    const double sx = static_cast<double>(img.width()) / width;
    parallel_for(0, height, [&](std::ptrdiff_t r) {
        std::vector<double> px(static_cast<std::size_t>(img.channels()));
        for (int c = 0; c < width; ++c) {
            const PixelCoord p{(static_cast<double>(r) + 0.5) * sy - 0.5, (c + 0.5) * sx - 0.5};
            sample_bilinear(img, p, px, EdgeMode::clamp);
            for (int ch = 0; ch < img.channels(); ++ch)
                out.at(static_cast<int>(r), c, ch) = px[static_cast<std::size_t>(ch)];
        }
    });
    return out;
}

// Separable Gaussian blur, clamped borders.
inline EquirectRaster gaussian_blur(const EquirectRaster& img, double sigma) {
    if (sigma <= 0.0)
        return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * i * i / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        ksum += v;
    }
    for (double& v : k)
        v /= ksum;

    const int h = img.height(), w = img.width(), nc = img.channels();
    EquirectRaster tmp(h, w, nc, img.kind());
    EquirectRaster out(h, w, nc, img.kind());
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int ch = 0; ch < nc; ++ch) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    s += k[static_cast<std::size_t>(i + radius)] *
                         img.at(r, std::clamp(c + i, 0, w - 1), ch);
                tmp.at(r, c, ch) = s;
            }
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int ch = 0; ch < nc; ++ch) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    s += k[static_cast<std::size_t>(i + radius)] *
                         tmp.at(std::clamp(r + i, 0, h - 1), c, ch);
                out.at(r, c, ch) = s;
            }
    return out;
}

} // namespace omniflow
