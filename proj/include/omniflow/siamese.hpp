#pragma once

// Siamese flow objective as plain value + gradient functions: negative cosine
// similarity, the symmetrised similarity loss with stop-gradient on the
// target branch, the weighted sequence flow loss, the hybrid sum, and the
// rotation-augmentation schedules.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "equirect_remap.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "raster.hpp"
#include "sphere_geom.hpp"

namespace omniflow {

using LatentVec = std::vector<double>;

namespace detail {

inline double checked_norm(std::span<const double> x, const char* what) {
    double s = 0.0;
    for (double v : x)
        s += v * v;
    const double n = std::sqrt(s);
    if (!(n > 0.0) || !std::isfinite(n))
        throw ZeroNormError(std::string(what) + ": vector norm must be positive and finite");
    return n;
}

inline void check_same_length(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DimensionMismatch("latent vectors differ in length");
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

} // namespace detail

// D(p, z) = -(p / |p|) . (z / |z|), in [-1, 1].
inline double neg_cosine(std::span<const double> p, std::span<const double> z) {
    detail::check_same_length(p, z);
    const double np = detail::checked_norm(p, "neg_cosine(p)");
    const double nz = detail::checked_norm(z, "neg_cosine(z)");
    return -detail::dot(p, z) / (np * nz);
}

// dD/dp = -(z / (|p||z|) - (p.z) p / (|p|^3 |z|)); z is a constant.
inline LatentVec neg_cosine_grad(std::span<const double> p, std::span<const double> z) {
    detail::check_same_length(p, z);
    const double np = detail::checked_norm(p, "neg_cosine(p)");
    const double nz = detail::checked_norm(z, "neg_cosine(z)");
    const double pz = detail::dot(p, z);
    LatentVec g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        g[i] = -(z[i] / (np * nz) - pz * p[i] / (np * np * np * nz));
    return g;
}

struct SimLoss {
    double value = 0.0;
    // Gradients exist only for the predictor outputs; z_left and z_right are
    // held constant (stop-gradient).
    LatentVec grad_p_left;
    LatentVec grad_p_right;
};

// L = 1/2 D(p_left, z_right) + 1/2 D(p_right, z_left).
inline SimLoss symmetrized_sim_loss(std::span<const double> p_left, std::span<const double> z_right,
                                    std::span<const double> p_right, std::span<const double> z_left) {
    SimLoss out;
    out.value = 0.5 * neg_cosine(p_left, z_right) + 0.5 * neg_cosine(p_right, z_left);
    out.grad_p_left = neg_cosine_grad(p_left, z_right);
    out.grad_p_right = neg_cosine_grad(p_right, z_left);
    for (double& g : out.grad_p_left)
        g *= 0.5;
    for (double& g : out.grad_p_right)
        g *= 0.5;
    return out;
}

inline double hybrid_loss(double sim, double flow) { return sim + flow; }

// --- sequence flow loss ---------------------------------------------------------

// Exponent of gamma_base for prediction i (1-based) out of n.
enum class GammaConvention {
    printed, // n - i - 1: the last prediction gets 1 / gamma_base
    shifted, // n - i: the last prediction gets weight 1
};

inline std::vector<double> sequence_weights(int n, double gamma_base = 0.8,
                                            GammaConvention conv = GammaConvention::printed) {
    if (n < 1)
        throw InputError("sequence_weights: need at least one prediction");
    std::vector<double> w;
    for (int i = 1; i <= n; ++i) {
        const int e = conv == GammaConvention::printed ? n - i - 1 : n - i;
        w.push_back(std::pow(gamma_base, e));
    }
    return w;
}

// Mean over jointly valid pixels of |du| + |dv|.
inline double mean_l1_error(const FlowField& a, const FlowField& b) {
    if (!a.same_shape(b))
        throw DimensionMismatch("mean_l1_error: flow fields differ in size");
    const int h = a.height(), w = a.width();
    std::vector<double> rows(static_cast<std::size_t>(h), 0.0);
    std::vector<long long> counts(static_cast<std::size_t>(h), 0);
    parallel_for(0, h, [&](std::ptrdiff_t ri) {
        const int r = static_cast<int>(ri);
        double s = 0.0;
        long long n = 0;
        for (int c = 0; c < w; ++c) {
            if (!a.valid(r, c) || !b.valid(r, c))
                continue;
            s += std::abs(a.u(r, c) - b.u(r, c)) + std::abs(a.v(r, c) - b.v(r, c));
            ++n;
        }
        rows[static_cast<std::size_t>(r)] = s;
        counts[static_cast<std::size_t>(r)] = n;
    });
    long long n = 0;
    for (long long c : counts)
        n += c;
    return n ? pairwise_sum(rows) / static_cast<double>(n) : 0.0;
}

// sum_i gamma_i * mean|R(gt, r) - f_i|_1.
inline double sequence_flow_loss(std::span<const FlowField> predictions, const FlowField& gt,
                                 const RotationSpec& r, double gamma_base = 0.8,
                                 GammaConvention conv = GammaConvention::printed) {
    if (predictions.empty())
        throw InputError("sequence_flow_loss: empty prediction sequence");
    for (const FlowField& f : predictions)
        if (!f.same_shape(gt))
            throw DimensionMismatch("sequence_flow_loss: prediction and ground truth differ in size");
    const FlowField target = r.is_identity() ? gt : rotate_flow(gt, r);
    const std::vector<double> w =
        sequence_weights(static_cast<int>(predictions.size()), gamma_base, conv);
    double loss = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        loss += w[i] * mean_l1_error(target, predictions[i]);
    return loss;
}

// --- augmentation schedules -------------------------------------------------------

enum class AugmentationStrategy {
    v1, // left view never rotated
    v2, // the unrotated side is chosen at random on every draw
};

// Half-widths of the uniform angle ranges, radians.
struct AugmentationRanges {
    double pitch = kPi;
    double roll = kPi;
    double yaw = kPi;
};

struct AugmentationPair {
    RotationSpec r1;
    RotationSpec r2;
    AugmentationStrategy strategy = AugmentationStrategy::v1;
};

namespace detail {

// 53-bit uniform in [0, 1); independent of the standard library's
// distribution implementations.
inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double symmetric_uniform(std::mt19937_64& rng, double half) {
    return (2.0 * unit_uniform(rng) - 1.0) * half;
}

} // namespace detail

inline RotationSpec draw_rotation(std::mt19937_64& rng, const AugmentationRanges& ranges = {}) {
    if (ranges.pitch <= 0.0 && ranges.roll <= 0.0 && ranges.yaw <= 0.0)
        throw ConfigError("augmentation ranges admit only the identity rotation");
    for (;;) {
        RotationSpec r{detail::symmetric_uniform(rng, ranges.pitch),
                       detail::symmetric_uniform(rng, ranges.roll),
                       detail::symmetric_uniform(rng, ranges.yaw)};
        if (!r.is_identity())
            return r;
    }
}

// Exactly one of (r1, r2) is the identity.
inline AugmentationPair draw_augmentation(AugmentationStrategy strategy, std::mt19937_64& rng,
                                          const AugmentationRanges& ranges = {}) {
    AugmentationPair pair;
    pair.strategy = strategy;
    bool left_identity = true;
    if (strategy == AugmentationStrategy::v2)
        left_identity = (rng() >> 63) == 0;
    const RotationSpec rot = draw_rotation(rng, ranges);
    if (left_identity)
        pair.r2 = rot;
    else
        pair.r1 = rot;
    return pair;
}

// Per-channel standard deviation of the l2-normalised batch. Near 1/sqrt(d)
// for well-spread outputs and 0 for a collapsed representation.
inline std::vector<double> normalized_channel_std(std::span<const LatentVec> batch) {
    if (batch.empty())
        throw InputError("normalized_channel_std: empty batch");
    const std::size_t d = batch.front().size();
    std::vector<LatentVec> unit;
    unit.reserve(batch.size());
    std::vector<double> mean(d, 0.0);
    for (const LatentVec& x : batch) {
        if (x.size() != d)
            throw DimensionMismatch("normalized_channel_std: ragged batch");
        const double n = detail::checked_norm(x, "normalized_channel_std");
        LatentVec& v = unit.emplace_back(d);
        for (std::size_t j = 0; j < d; ++j) {
            v[j] = x[j] / n;
            mean[j] += v[j];
        }
    }
    const auto m = static_cast<double>(batch.size());
    for (double& mu : mean)
        mu /= m;
    std::vector<double> out(d, 0.0);
    for (const LatentVec& v : unit)
        for (std::size_t j = 0; j < d; ++j)
            out[j] += (v[j] - mean[j]) * (v[j] - mean[j]);
    for (double& s : out)
        s = std::sqrt(s / m);
    return out;
}

// --- gradient check ---------------------------------------------------------------

struct GradientCheckResult {
    int instances = 0;
    int dim = 0;
    double step = 0.0;
    double tolerance = 0.0;
    double max_rel_error = 0.0; // |g - g_fd| / |g| over both predictor inputs
    double max_self_error = 0.0; // max |D(p, p) + 1|
    bool passed = false;
};

// Central differences of symmetrized_sim_loss against its analytic gradient
// on random Gaussian instances. Also checks D(p, p) = -1 on every instance.
inline GradientCheckResult run_gradient_check(int instances = 100, int dim = 64, std::uint64_t seed = 0,
                                              double tolerance = 1e-5, double step = 1e-6) {
    if (instances < 1 || dim < 1)
        throw ConfigError("gradient check needs at least one instance of dimension >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&] {
        LatentVec x(static_cast<std::size_t>(dim));
        for (double& v : x)
            v = normal(rng);
        return x;
    };
    auto rel = [](const LatentVec& g, const LatentVec& fd) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            num += (g[i] - fd[i]) * (g[i] - fd[i]);
            den += g[i] * g[i];
        }
        return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
    };

    GradientCheckResult res;
    res.instances = instances;
    res.dim = dim;
    res.step = step;
    res.tolerance = tolerance;
    for (int k = 0; k < instances; ++k) {
        LatentVec pl = draw(), zr = draw(), pr = draw(), zl = draw();
        const SimLoss loss = symmetrized_sim_loss(pl, zr, pr, zl);
        LatentVec fd_l(pl.size()), fd_r(pr.size());
        for (std::size_t i = 0; i < pl.size(); ++i) {
            const double a = pl[i];
            pl[i] = a + step;
            const double up = symmetrized_sim_loss(pl, zr, pr, zl).value;
            pl[i] = a - step;
            const double dn = symmetrized_sim_loss(pl, zr, pr, zl).value;
            pl[i] = a;
            fd_l[i] = (up - dn) / (2.0 * step);

            const double b = pr[i];
            pr[i] = b + step;
            const double up2 = symmetrized_sim_loss(pl, zr, pr, zl).value;
            pr[i] = b - step;
            const double dn2 = symmetrized_sim_loss(pl, zr, pr, zl).value;
            pr[i] = b;
            fd_r[i] = (up2 - dn2) / (2.0 * step);
        }
        res.max_rel_error = std::max({res.max_rel_error, rel(loss.grad_p_left, fd_l), rel(loss.grad_p_right, fd_r)});
        res.max_self_error = std::max(res.max_self_error, std::abs(neg_cosine(pl, pl) + 1.0));
    }
    res.passed = res.max_rel_error < tolerance && res.max_self_error < 1e-12;
    return res;
}

} // namespace omniflow
