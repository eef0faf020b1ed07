#pragma once

// 360 degree flow from a pair of equirectangular frames: six gnomonic
// patches per frame, 2D flow per patch from a pluggable backend, vectors
// carried back to equirect pixel units, weighted blend.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <unistd.h>

#include "error.hpp"
#include "flow_io.hpp"
#include "image_io.hpp"
#include "parallel.hpp"
#include "raster.hpp"
#include "sphere_geom.hpp"
#include "tangent_proj.hpp"
#include "variational.hpp"

namespace omniflow {

// Patch flow estimator. Implementations that are not reentrant are run one
// patch at a time by the pipeline.
class FlowBackend {
public:
    virtual ~FlowBackend() = default;
    virtual FlowField estimate(const EquirectRaster& p1, const EquirectRaster& p2, int patch_id) const = 0;
    virtual bool reentrant() const { return true; }
    virtual std::string name() const = 0;
};

class BuiltinBackend : public FlowBackend {
public:
    explicit BuiltinBackend(VariationalParams params = {}) : params_(params) {}

    FlowField estimate(const EquirectRaster& p1, const EquirectRaster& p2, int patch_id) const override {
        VariationalDiagnostics diag;
        FlowField f = estimate_variational(p1, p2, params_, &diag);
        if (diag.low_confidence) {
            std::lock_guard lock(mutex_);
            low_confidence_.push_back(patch_id);
        }
        return f;
    }
    std::string name() const override { return "builtin"; }

    const VariationalParams& params() const { return params_; }
    // Patch ids that came back flagged as textureless, in completion order.
    std::vector<int> low_confidence_patches() const {
        std::lock_guard lock(mutex_);
        return low_confidence_;
    }

private:
    VariationalParams params_;
    mutable std::mutex mutex_;
    mutable std::vector<int> low_confidence_;
};

// Runs `command p1.png p2.png out.flo` through the shell for every patch.
class ExternalCommandBackend : public FlowBackend {
public:
    explicit ExternalCommandBackend(std::string command) : command_(std::move(command)) {
        if (command_.empty())
            throw ConfigError("external backend: empty command");
    }

    FlowField estimate(const EquirectRaster& p1, const EquirectRaster& p2, int patch_id) const override {
        namespace fs = std::filesystem;
        static std::atomic<int> counter{0};
        const fs::path dir = fs::temp_directory_path() /
                             ("omniflow-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(dir);
        const fs::path a = dir / "p1.png", b = dir / "p2.png", out = dir / "out.flo";
        FlowField flow;
        try {
            write_image(p1, a.string());
            write_image(p2, b.string());
            const std::string cmd = command_ + " '" + a.string() + "' '" + b.string() + "' '" + out.string() + "'";
            const int status = std::system(cmd.c_str());
            if (status != 0)
                throw BackendError(patch_id, "external command exited with status " + std::to_string(status));
            if (!fs::exists(out))
                throw BackendError(patch_id, "external command wrote no flow file");
            flow = read_flo(out.string());
        } catch (const BackendError&) {
            fs::remove_all(dir);
            throw;
        } catch (const std::exception& e) {
            fs::remove_all(dir);
            throw BackendError(patch_id, e.what());
        }
        fs::remove_all(dir);
        return flow;
    }
    bool reentrant() const override { return false; }
    std::string name() const override { return "external-cmd"; }

private:
    std::string command_;
};

enum class TransportMode {
    jacobian, // local linearisation of the inverse gnomonic map at the start point
    endpoint, // lift start and end point separately (exact)
};

struct PipelineConfig {
    int n_patches = 6;
    double fov = kDefaultPatchFov;
    int patch_size = 0;        // 0: match the equirect pixel pitch at the patch centre
    int backend_height = 368;  // patches are resized to fit inside this box,
    int backend_width = 496;   // keeping their aspect ratio; 0 disables resizing
    BlendKernel kernel{};
    TransportMode transport = TransportMode::jacobian;
};

struct TransportedFlow {
    FlowField flow;        // equirect pixel units, zero where weight == 0
    EquirectRaster weight; // blend weight, one channel
};

namespace detail {

inline PixelCoord plane_to_equirect(PlanePoint q, const TangentSpec& spec, int height, int width) {
    return angular_to_pixel_continuous(gnomonic_inverse(q.x, q.y, spec), height, width);
}

} // namespace detail

// Moves a patch flow onto the H x W equirect grid. Patch displacements are
// read at each equirect pixel's position on the tangent plane and mapped
// through the inverse gnomonic projection.
inline TransportedFlow transport_patch_flow(const FlowField& patch_flow, const TangentSpec& spec, int height,
                                            int width, const BlendKernel& kernel = {},
                                            TransportMode mode = TransportMode::jacobian) {
    if (patch_flow.height() != spec.height || patch_flow.width() != spec.width)
        throw DimensionMismatch("patch flow size differs from its tangent spec");
    TransportedFlow out{FlowField(height, width), EquirectRaster(height, width, 1, RasterKind::scalar_map)};
    // Plane units per patch pixel.
    const double sx = 2.0 * spec.half_x() / spec.width;
    const double sy = 2.0 * spec.half_y() / spec.height;
    const double w = width;

    parallel_for(0, height, [&](std::ptrdiff_t ri) {
        const int r = static_cast<int>(ri);
        double uv[2];
        for (int c = 0; c < width; ++c) {
            const PixelCoord q{static_cast<double>(r), static_cast<double>(c)};
            const LatLon ll = pixel_to_angular(q, height, width);
            const double cos_c = gnomonic_cos_c(ll.lon, ll.lat, spec.lon0, spec.lat0);
            if (!(cos_c > 0.0))
                continue;
            const PlanePoint p = gnomonic_forward(ll.lon, ll.lat, spec);
            const double wgt = kernel.weight(p, cos_c, spec);
            if (wgt <= 0.0)
                continue;
            sample_bilinear(patch_flow.raster(), plane_to_patch_pixel(p, spec), uv, EdgeMode::clamp);
            const double dx = uv[0] * sx, dy = -uv[1] * sy;

            double du = 0.0, dv = 0.0;
            if (mode == TransportMode::endpoint) {
                const PixelCoord e = detail::plane_to_equirect({p.x + dx, p.y + dy}, spec, height, width);
                du = wrap_shortest(e.col - q.col, w);
                dv = e.row - q.row;
            } else {
                constexpr double h = 1e-6;
                const PixelCoord xp = detail::plane_to_equirect({p.x + h, p.y}, spec, height, width);
                const PixelCoord xm = detail::plane_to_equirect({p.x - h, p.y}, spec, height, width);
                const PixelCoord yp = detail::plane_to_equirect({p.x, p.y + h}, spec, height, width);
                const PixelCoord ym = detail::plane_to_equirect({p.x, p.y - h}, spec, height, width);
                const double dcol_dx = wrap_shortest(xp.col - xm.col, w) / (2.0 * h);
                const double drow_dx = (xp.row - xm.row) / (2.0 * h);
                const double dcol_dy = wrap_shortest(yp.col - ym.col, w) / (2.0 * h);
                const double drow_dy = (yp.row - ym.row) / (2.0 * h);
                du = dcol_dx * dx + dcol_dy * dy;
                dv = drow_dx * dx + drow_dy * dy;
            }
            out.flow.u(r, c) = du;
            out.flow.v(r, c) = dv;
            out.weight.at(r, c) = wgt;
        }
    });
    return out;
}

// Per-patch intermediate results, for inspection and tests.
struct PipelineDiagnostics {
    std::vector<TangentSpec> specs;
    std::vector<FlowField> patch_flows; // at patch resolution, patch pixel units
    EquirectRaster weight_sum;
};

namespace detail {

inline FlowField run_backend_on_patch(const FlowBackend& backend, const EquirectRaster& a,
                                      const EquirectRaster& b, int patch_id, const PipelineConfig& cfg) {
    const int ph = a.height(), pw = a.width();
    int bh = ph, bw = pw;
    if (cfg.backend_height > 0 && cfg.backend_width > 0) {
        const double s = std::min(static_cast<double>(cfg.backend_height) / ph,
                                  static_cast<double>(cfg.backend_width) / pw);
        bh = std::max(2, static_cast<int>(std::lround(ph * s)));
        bw = std::max(2, static_cast<int>(std::lround(pw * s)));
    }
    const bool resized = bh != ph || bw != pw;
    const EquirectRaster ra = resized ? resize_bilinear(a, bh, bw) : a;
    const EquirectRaster rb = resized ? resize_bilinear(b, bh, bw) : b;

    FlowField f = backend.estimate(ra, rb, patch_id);
    if (f.height() != bh || f.width() != bw)
        throw BackendError(patch_id, "backend returned " + std::to_string(f.height()) + "x" +
                                         std::to_string(f.width()) + " flow for a " + std::to_string(bh) +
                                         "x" + std::to_string(bw) + " patch");
    for (double x : f.raster().data())
        if (!std::isfinite(x))
            throw BackendError(patch_id, "backend returned non-finite flow");
    if (!resized)
        return f;

    const EquirectRaster back = resize_bilinear(f.raster(), ph, pw);
    FlowField out(ph, pw);
    const double kx = static_cast<double>(pw) / bw, ky = static_cast<double>(ph) / bh;
    for (int r = 0; r < ph; ++r)
        for (int c = 0; c < pw; ++c) {
            out.u(r, c) = back.at(r, c, 0) * kx;
            out.v(r, c) = back.at(r, c, 1) * ky;
        }
    return out;
}

} // namespace detail

inline FlowField estimate_pano_flow(const EquirectRaster& f1, const EquirectRaster& f2, const PipelineConfig& cfg,
                                    const FlowBackend& backend, PipelineDiagnostics* diag = nullptr) {
    if (!f1.same_shape(f2))
        throw DimensionMismatch("frames differ in size");
    const int h = f1.height(), w = f1.width();
    if (w != 2 * h)
        throw InputError("equirect frames must have width = 2 * height, got " + std::to_string(h) + "x" +
                         std::to_string(w));
    const int size = cfg.patch_size > 0 ? cfg.patch_size : default_patch_size(h, cfg.fov);
    const std::vector<TangentSpec> specs = patch_specs(cfg.n_patches, cfg.fov, size);
    const auto n = static_cast<std::ptrdiff_t>(specs.size());

    std::vector<FlowField> patch_flows(specs.size());
    auto work = [&](std::ptrdiff_t i) {
        const TangentSpec& s = specs[static_cast<std::size_t>(i)];
        const TangentPatch a = sample_patch(f1, s);
        const TangentPatch b = sample_patch(f2, s);
        patch_flows[static_cast<std::size_t>(i)] =
            detail::run_backend_on_patch(backend, a.raster, b.raster, static_cast<int>(i), cfg);
    };
    if (backend.reentrant()) {
        parallel_for(0, n, work);
    } else {
        for (std::ptrdiff_t i = 0; i < n; ++i)
            work(i);
    }

    // Fixed patch order keeps the blend independent of scheduling.
    EquirectRaster acc(h, w, 2, RasterKind::flow);
    EquirectRaster wsum(h, w, 1, RasterKind::scalar_map);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const TransportedFlow t = transport_patch_flow(patch_flows[i], specs[i], h, w, cfg.kernel, cfg.transport);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double wgt = t.weight.at(r, c);
                if (wgt <= 0.0)
                    continue;
                wsum.at(r, c) += wgt;
                acc.at(r, c, 0) += wgt * t.flow.u(r, c);
                acc.at(r, c, 1) += wgt * t.flow.v(r, c);
            }
    }

    FlowField out(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double wgt = wsum.at(r, c);
            if (wgt > 0.0) {
                out.u(r, c) = acc.at(r, c, 0) / wgt;
                out.v(r, c) = acc.at(r, c, 1) / wgt;
            } else {
                out.set_valid(r, c, false);
            }
        }
    if (diag) {
        diag->specs = specs;
        diag->patch_flows = std::move(patch_flows);
        diag->weight_sum = std::move(wsum);
    }
    return out;
}

// --- seam scan ------------------------------------------------------------------

// Index of the patch with the largest blend weight at every pixel (-1 if none).
inline Raster<int> dominant_patch(const std::vector<TangentSpec>& specs, int height, int width,
                                  const BlendKernel& kernel = {}) {
    Raster<int> idx(height, width, 1, RasterKind::scalar_map, -1);
    parallel_for(0, height, [&](std::ptrdiff_t ri) {
        const int r = static_cast<int>(ri);
        for (int c = 0; c < width; ++c) {
            const LatLon ll = pixel_to_angular({static_cast<double>(r), static_cast<double>(c)}, height, width);
            double best = 0.0;
            for (std::size_t i = 0; i < specs.size(); ++i) {
                const TangentSpec& s = specs[i];
                const double cos_c = gnomonic_cos_c(ll.lon, ll.lat, s.lon0, s.lat0);
                if (!(cos_c > 0.0))
                    continue;
                const double wgt = kernel.weight(gnomonic_forward(ll.lon, ll.lat, s), cos_c, s);
                if (wgt > best) {
                    best = wgt;
                    idx.at(r, c) = static_cast<int>(i);
                }
            }
        }
    });
    return idx;
}

struct SeamReport {
    double max_jump = 0.0;  // largest |(a_p - a_q) - (b_p - b_q)| over seam pairs
    double mean_jump = 0.0;
    long long pairs = 0;
};

// Compares the step of `est` with the step of `ref` between 4-neighbours
// (columns wrap) whose dominant patch differs. On a smooth reference any
// excess step is a stitching discontinuity.
inline SeamReport seam_jumps(const FlowField& est, const FlowField& ref, const std::vector<TangentSpec>& specs,
                             const BlendKernel& kernel = {}) {
    if (!est.same_shape(ref))
        throw DimensionMismatch("seam scan: flow fields differ in size");
    const int h = est.height(), w = est.width();
    const Raster<int> dom = dominant_patch(specs, h, w, kernel);
    SeamReport rep;
    double sum = 0.0;
    auto visit = [&](int r0, int c0, int r1, int c1) {
        if (dom.at(r0, c0) == dom.at(r1, c1))
            return;
        if (!est.valid(r0, c0) || !est.valid(r1, c1) || !ref.valid(r0, c0) || !ref.valid(r1, c1))
            return;
        const double du = (est.u(r1, c1) - est.u(r0, c0)) - (ref.u(r1, c1) - ref.u(r0, c0));
        const double dv = (est.v(r1, c1) - est.v(r0, c0)) - (ref.v(r1, c1) - ref.v(r0, c0));
        const double j = std::hypot(du, dv);
        rep.max_jump = std::max(rep.max_jump, j);
        sum += j;
        ++rep.pairs;
    };
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            visit(r, c, r, (c + 1) % w);
            if (r + 1 < h)
                visit(r, c, r + 1, c);
        }
    rep.mean_jump = rep.pairs ? sum / static_cast<double>(rep.pairs) : 0.0;
    return rep;
}

} // namespace omniflow
