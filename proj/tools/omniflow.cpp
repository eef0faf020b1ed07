// omniflow command-line tool. Every subcommand prints one JSON object on
// stdout; failures print {"error": {...}} on stderr and exit with
//   2 input, 3 configuration (including bad flags), 4 numeric, 1 other.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "omniflow.hpp"

using namespace omniflow;
namespace fs = std::filesystem;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitConfig = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitOther = 1;

int exit_code(ErrorClass c) {
    switch (c) {
    case ErrorClass::input: return kExitInput;
    case ErrorClass::config: return kExitConfig;
    case ErrorClass::numeric: return kExitNumeric;
    }
    return kExitOther;
}

void emit(const Json& j, const std::string& path = "") {
    const std::string text = j.dump(2) + "\n";
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw InputError("cannot write " + path);
    f << text;
}

bool is_flo(const std::string& path) { return detail::lower_ext(path) == "flo"; }

RotationSpec rotation_of(double pitch, double roll, double yaw) { return {pitch, roll, yaw}; }

Json rotation_json(const RotationSpec& r) { return {{"pitch", r.pitch}, {"roll", r.roll}, {"yaw", r.yaw}}; }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw InputError("cannot create directory " + dir + ": " + ec.message());
}

// --- plots for `stats` ---------------------------------------------------------

ByteImage bar_plot(const Histogram& h, int height = 200) {
    const int nb = static_cast<int>(h.counts.size());
    const int bar = std::max(1, 512 / nb);
    ByteImage img(height, nb * bar, 1, RasterKind::frame, 255);
    std::uint64_t peak = 0;
    for (auto c : h.counts)
        peak = std::max(peak, c);
    if (peak == 0)
        return img;
    for (int b = 0; b < nb; ++b) {
        const int len = static_cast<int>(std::lround(
            static_cast<double>(h.counts[static_cast<std::size_t>(b)]) / static_cast<double>(peak) * (height - 1)));
        for (int r = height - len; r < height; ++r)
            for (int c = b * bar; c < (b + 1) * bar; ++c)
                img.at(r, c) = 40;
    }
    return img;
}

// Log-log scatter of the radial spectrum with the fitted line.
ByteImage spectrum_plot(const PowerSpectrum& ps, int size = 256) {
    ByteImage img(size, size, 1, RasterKind::frame, 255);
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < ps.frequency.size(); ++i)
        if (ps.power[i] > 0.0) {
            lx.push_back(std::log10(ps.frequency[i]));
            ly.push_back(std::log10(ps.power[i]));
        }
    if (lx.size() < 2)
        return img;
    const auto [xmin, xmax] = std::minmax_element(lx.begin(), lx.end());
    const auto [ymin, ymax] = std::minmax_element(ly.begin(), ly.end());
    const double x0 = *xmin, xs = std::max(*xmax - *xmin, 1e-12);
    const double y0 = *ymin, ys = std::max(*ymax - *ymin, 1e-12);
    auto plot = [&](double x, double y, std::uint8_t v) {
        const int c = static_cast<int>(std::lround((x - x0) / xs * (size - 1)));
        const int r = static_cast<int>(std::lround((1.0 - (y - y0) / ys) * (size - 1)));
        if (r >= 0 && r < size && c >= 0 && c < size)
            img.at(r, c) = v;
    };
    for (int c = 0; c < size; ++c) {
        const double x = x0 + xs * c / (size - 1);
        plot(x, ps.intercept + ps.slope * x, 150);
    }
    for (std::size_t i = 0; i < lx.size(); ++i)
        plot(lx[i], ly[i], 0);
    return img;
}

// --- subcommands ---------------------------------------------------------------

struct RotateArgs {
    std::string in, out, transport = "endpoint";
    double pitch = 0, roll = 0, yaw = 0;
    bool inverse = false;
};

int run_rotate(const RotateArgs& a) {
    const RotationSpec r = rotation_of(a.pitch, a.roll, a.yaw);
    Json j{{"command", "rotate"}, {"in", a.in}, {"out", a.out}, {"rotation", rotation_json(r)}, {"inverse", a.inverse}};
    if (is_flo(a.in)) {
        if (!is_flo(a.out))
            throw ConfigError("rotating a .flo file needs a .flo output");
        const FlowTransport t = a.transport == "remap" ? FlowTransport::remap : FlowTransport::endpoint;
        const FlowField f = read_flo(a.in);
        write_flo(a.inverse ? reverse_rotate_flow(f, r, t) : rotate_flow(f, r, t), a.out);
        j["kind"] = "flow";
        j["transport"] = a.transport;
    } else {
        const EquirectRaster img = read_image(a.in);
        EquirectRaster out;
        if (a.inverse && !r.is_identity())
            out = rotate_frame(img, rotation_from_spec(r).transposed());
        else
            out = rotate_frame(img, r);
        write_image(out, a.out);
        j["kind"] = "frame";
    }
    emit(j);
    return 0;
}

struct ProjectArgs {
    std::string in, out_dir, splat;
    int patches = 6, size = 0;
    double fov = kDefaultPatchFov;
};

int run_project(const ProjectArgs& a) {
    const EquirectRaster img = read_image(a.in);
    ensure_dir(a.out_dir);
    const std::vector<TangentPatch> patches = sample_patches(img, a.patches, a.fov, a.size);
    Json list = Json::array();
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const std::string path = (fs::path(a.out_dir) / ("patch_" + std::to_string(i) + ".png")).string();
        write_image(patches[i].raster, path);
        const TangentSpec& s = patches[i].spec;
        list.push_back({{"index", i},
                        {"path", path},
                        {"lon0", s.lon0},
                        {"lat0", s.lat0},
                        {"fov", s.fov},
                        {"height", s.height},
                        {"width", s.width}});
    }
    Json j{{"command", "project"}, {"in", a.in}, {"patches", list}};
    if (!a.splat.empty()) {
        write_image(blend_patches(patches, img.height(), img.width()), a.splat);
        j["splat"] = a.splat;
    }
    emit(j);
    return 0;
}

struct EvalArgs {
    std::string pred, gt, distortion = "upper", out;
};

int run_eval(const EvalArgs& a) {
    const FlowField pred = read_flo(a.pred);
    const FlowField gt = read_flo(a.gt);
    MetricsReport rep;
    if (a.distortion == "none") {
        rep = binned_report(pred, gt);
    } else {
        const DistortionMap dmap = build_distortion_map(gt.height(), gt.width(), DistortionRange::preset(a.distortion));
        rep = binned_report(pred, gt, &dmap);
    }
    Json j = to_json(rep);
    j["command"] = "eval";
    j["distortion"] = a.distortion;
    emit(j, a.out);
    return 0;
}

struct StatsArgs {
    std::vector<std::string> frames, flows;
    std::string out, plot_dir;
    int crop = 512;
    bool no_fallback = false;
};

int run_stats(const StatsArgs& a) {
    if (a.frames.empty() && a.flows.empty())
        throw ConfigError("stats: give --frames and/or --flows");
    Json j{{"command", "stats"}};
    std::optional<Histogram> lum;
    std::optional<PowerSpectrum> ps;
    std::optional<FlowStatistics> fst;
    if (!a.frames.empty()) {
        std::vector<EquirectRaster> frames;
        for (const std::string& p : a.frames)
            frames.push_back(read_image(p));
        lum = luminance_histogram(frames);
        ps = power_spectrum_slope(frames, a.crop, !a.no_fallback);
        j["luminance"] = to_json(*lum);
        j["power_spectrum"] = to_json(*ps);
        j["derivative_kurtosis"] = to_json(derivative_kurtosis(frames));
        j["frames"] = a.frames.size();
    }
    if (!a.flows.empty()) {
        std::vector<FlowField> flows;
        for (const std::string& p : a.flows)
            flows.push_back(read_flo(p));
        fst = flow_statistics(flows);
        j["flow"] = to_json(*fst);
        j["flows"] = a.flows.size();
    }
    if (!a.plot_dir.empty()) {
        ensure_dir(a.plot_dir);
        Json plots = Json::array();
        auto save = [&](const ByteImage& img, const std::string& name) {
            const std::string p = (fs::path(a.plot_dir) / name).string();
            write_image(img, p);
            plots.push_back(p);
        };
        if (lum)
            save(bar_plot(*lum), "luminance.png");
        if (ps)
            save(spectrum_plot(*ps), "power_spectrum.png");
        if (fst) {
            save(bar_plot(fst->speed), "speed.png");
            save(bar_plot(fst->direction), "direction.png");
            save(bar_plot(fst->du), "du.png");
            save(bar_plot(fst->dv), "dv.png");
        }
        j["plots"] = plots;
    }
    emit(j, a.out);
    return 0;
}

struct EstimateArgs {
    std::string in1, in2, out, backend = "builtin", cmd, transport = "jacobian";
    VariationalParams vp;
    double fov = kDefaultPatchFov;
    int patch_size = 0, backend_height = 368, backend_width = 496;
};

int run_estimate(const EstimateArgs& a) {
    if (a.backend == "external-cmd" && a.cmd.empty())
        throw ConfigError("--backend external-cmd needs --cmd");
    const EquirectRaster f1 = read_image(a.in1);
    const EquirectRaster f2 = read_image(a.in2);
    PipelineConfig cfg;
    cfg.fov = a.fov;
    cfg.patch_size = a.patch_size;
    cfg.backend_height = a.backend_height;
    cfg.backend_width = a.backend_width;
    cfg.transport = a.transport == "endpoint" ? TransportMode::endpoint : TransportMode::jacobian;

    Json j{{"command", "estimate"}, {"backend", a.backend}, {"out", a.out}, {"transport", a.transport}};
    FlowField flow;
    if (a.backend == "builtin") {
        const BuiltinBackend be(a.vp);
        flow = estimate_pano_flow(f1, f2, cfg, be);
        std::vector<int> low = be.low_confidence_patches();
        std::sort(low.begin(), low.end());
        j["low_confidence_patches"] = low;
        j["params"] = {{"alpha", a.vp.alpha},
                       {"iterations", a.vp.iterations},
                       {"pyramid_levels", a.vp.pyramid_levels},
                       {"warps", a.vp.warps}};
    } else {
        const ExternalCommandBackend be(a.cmd);
        flow = estimate_pano_flow(f1, f2, cfg, be);
    }
    write_flo(flow, a.out);
    emit(j);
    return 0;
}

struct SynthArgs {
    std::string texture = "noise", out_dir;
    std::uint64_t seed = 0;
    int height = 256;
    double pitch = 0, roll = 0, yaw = 0;
};

int run_synth(const SynthArgs& a) {
    SyntheticScene scene{texture_from_string(a.texture), a.seed, a.height, 2 * a.height};
    const RotationSpec r = rotation_of(a.pitch, a.roll, a.yaw);
    ensure_dir(a.out_dir);
    const FramePair pair = render_pair(scene, r);
    const fs::path dir(a.out_dir);
    write_image(pair.frame1, (dir / "frame1.png").string());
    write_image(pair.frame2, (dir / "frame2.png").string());
    write_flo(rotation_flow_gt(scene.height, scene.width, r), (dir / "gt.flo").string());
    emit({{"command", "synth"},
          {"texture", a.texture},
          {"seed", a.seed},
          {"height", scene.height},
          {"width", scene.width},
          {"rotation", rotation_json(r)},
          {"frame1", (dir / "frame1.png").string()},
          {"frame2", (dir / "frame2.png").string()},
          {"gt", (dir / "gt.flo").string()}});
    return 0;
}

struct LossCheckArgs {
    int instances = 100, dim = 64;
    std::uint64_t seed = 0;
    double tol = 1e-5;
};

int run_loss_check(const LossCheckArgs& a) {
    const GradientCheckResult g = run_gradient_check(a.instances, a.dim, a.seed, a.tol);
    Json j = to_json(g);
    j["command"] = "loss-check";
    j["sequence_weights_printed_n3"] = sequence_weights(3, 0.8, GammaConvention::printed);
    emit(j);
    return g.passed ? 0 : kExitNumeric;
}

struct VizArgs {
    std::string in, out, mode = "wheel";
    double clip = 0.0;
};

int run_viz(const VizArgs& a) {
    const FlowField f = read_flo(a.in);
    if (a.mode == "sphere")
        write_image(sphere_flow_to_rgba(f), a.out);
    else
        write_image(flow_to_color(f, a.clip > 0.0 ? std::optional<double>(a.clip) : std::nullopt), a.out);
    emit({{"command", "viz"}, {"in", a.in}, {"out", a.out}, {"mode", a.mode}, {"clip", a.clip}});
    return 0;
}

void fail_json(const std::string& cls, const std::string& msg) {
    std::cerr << Json{{"error", {{"class", cls}, {"message", msg}}}}.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optical flow toolkit for 360-degree equirectangular video", "omniflow"};
    app.require_subcommand(1);
    app.fallthrough();
    int threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (default: $OMNIFLOW_THREADS or all cores)")
        ->check(CLI::PositiveNumber);

    RotateArgs rot;
    auto* c_rot = app.add_subcommand("rotate", "Rotate an equirect frame or a .flo flow field");
    c_rot->add_option("--in", rot.in, "Input image (PNG/PPM/PGM) or .flo")->required();
    c_rot->add_option("--out", rot.out, "Output path, same kind as the input")->required();
    c_rot->add_option("--pitch", rot.pitch, "Rotation about X, radians");
    c_rot->add_option("--roll", rot.roll, "Rotation about Y, radians");
    c_rot->add_option("--yaw", rot.yaw, "Rotation about Z, radians");
    c_rot->add_flag("--inverse", rot.inverse, "Apply the inverse rotation");
    c_rot->add_option("--transport", rot.transport, "Flow vector transport")
        ->check(CLI::IsMember({"endpoint", "remap"}));

    ProjectArgs proj;
    auto* c_proj = app.add_subcommand("project", "Sample tangent patches and optionally blend them back");
    c_proj->add_option("--in", proj.in, "Input equirect image")->required();
    c_proj->add_option("--out-dir", proj.out_dir, "Directory for patch_<i>.png")->required();
    c_proj->add_option("--patches", proj.patches, "Number of patches (6)");
    c_proj->add_option("--fov", proj.fov, "Patch field of view, radians");
    c_proj->add_option("--size", proj.size, "Patch side in pixels (0: match equirect pitch)");
    c_proj->add_option("--splat", proj.splat, "Write the re-blended equirect image here");

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Compare a predicted .flo against ground truth");
    c_eval->add_option("--pred", ev.pred, "Predicted flow (.flo)")->required();
    c_eval->add_option("--gt", ev.gt, "Ground-truth flow (.flo)")->required();
    c_eval->add_option("--distortion", ev.distortion, "Distortion weighting: upper maps d to [0.5, 1), lower to [0, 0.5)")
        ->check(CLI::IsMember({"none", "upper", "lower"}));
    c_eval->add_option("--out", ev.out, "Write the JSON report here instead of stdout");

    StatsArgs st;
    auto* c_stats = app.add_subcommand("stats", "Frame and flow statistics");
    c_stats->add_option("--frames", st.frames, "Frame images");
    c_stats->add_option("--flows", st.flows, "Flow fields (.flo)");
    c_stats->add_option("--crop", st.crop, "Power spectrum crop side")->check(CLI::PositiveNumber);
    c_stats->add_flag("--no-fallback", st.no_fallback, "Fail when a frame is smaller than the crop");
    c_stats->add_option("--out", st.out, "Write the JSON report here instead of stdout");
    c_stats->add_option("--plot-dir", st.plot_dir, "Write histogram and spectrum plots here");

    EstimateArgs est;
    auto* c_est = app.add_subcommand("estimate", "Estimate 360-degree flow between two equirect frames");
    c_est->add_option("--in1", est.in1, "First frame")->required();
    c_est->add_option("--in2", est.in2, "Second frame")->required();
    c_est->add_option("--out", est.out, "Output .flo")->required();
    c_est->add_option("--backend", est.backend, "Patch flow backend")
        ->check(CLI::IsMember({"builtin", "external-cmd"}));
    c_est->add_option("--cmd", est.cmd, "External command, run as: CMD p1.png p2.png out.flo");
    c_est->add_option("--alpha", est.vp.alpha, "Builtin: smoothness weight")->check(CLI::PositiveNumber);
    c_est->add_option("--iters", est.vp.iterations, "Builtin: sweeps per level")->check(CLI::NonNegativeNumber);
    c_est->add_option("--levels", est.vp.pyramid_levels, "Builtin: pyramid levels")->check(CLI::PositiveNumber);
    c_est->add_option("--warps", est.vp.warps, "Builtin: warps per level")->check(CLI::PositiveNumber);
    c_est->add_option("--fov", est.fov, "Patch field of view, radians");
    c_est->add_option("--patch-size", est.patch_size, "Patch side in pixels (0: match equirect pitch)");
    c_est->add_option("--backend-height", est.backend_height, "Backend input height (0: native)");
    c_est->add_option("--backend-width", est.backend_width, "Backend input width (0: native)");
    c_est->add_option("--transport", est.transport, "Patch-to-equirect vector transport")
        ->check(CLI::IsMember({"jacobian", "endpoint"}));

    SynthArgs sy;
    auto* c_syn = app.add_subcommand("synth", "Write a synthetic rotation pair and its exact flow");
    c_syn->add_option("--texture", sy.texture, "Texture")->check(CLI::IsMember({"noise", "checker", "gradient"}));
    c_syn->add_option("--seed", sy.seed, "Texture seed");
    c_syn->add_option("--height", sy.height, "Frame height; width is twice this")->check(CLI::PositiveNumber);
    c_syn->add_option("--pitch", sy.pitch, "Rotation about X, radians");
    c_syn->add_option("--roll", sy.roll, "Rotation about Y, radians");
    c_syn->add_option("--yaw", sy.yaw, "Rotation about Z, radians");
    c_syn->add_option("--out-dir", sy.out_dir, "Output directory (frame1.png, frame2.png, gt.flo)")->required();

    LossCheckArgs lc;
    auto* c_loss = app.add_subcommand("loss-check", "Finite-difference check of the similarity loss gradient");
    c_loss->add_option("--instances", lc.instances, "Random instances")->check(CLI::PositiveNumber);
    c_loss->add_option("--dim", lc.dim, "Latent dimension")->check(CLI::PositiveNumber);
    c_loss->add_option("--seed", lc.seed, "Random seed");
    c_loss->add_option("--tol", lc.tol, "Relative tolerance")->check(CLI::PositiveNumber);

    VizArgs vz;
    auto* c_viz = app.add_subcommand("viz", "Colour-code a .flo flow field");
    c_viz->add_option("--in", vz.in, "Flow field (.flo)")->required();
    c_viz->add_option("--out", vz.out, "Output image")->required();
    c_viz->add_option("--mode", vz.mode, "wheel: Middlebury colours; sphere: RGBA sphere motion")
        ->check(CLI::IsMember({"wheel", "sphere"}));
    c_viz->add_option("--clip", vz.clip, "Wheel: normalising radius in pixels (0: largest vector)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        fail_json("config", e.what());
        return kExitConfig;
    }

    try {
        if (threads > 0)
            set_thread_count(threads);
        if (*c_rot) return run_rotate(rot);
        if (*c_proj) return run_project(proj);
        if (*c_eval) return run_eval(ev);
        if (*c_stats) return run_stats(st);
        if (*c_est) return run_estimate(est);
        if (*c_syn) return run_synth(sy);
        if (*c_loss) return run_loss_check(lc);
        if (*c_viz) return run_viz(vz);
    } catch (const BackendError& e) {
        std::cerr << Json{{"error", {{"class", to_string(e.error_class())}, {"message", e.what()}, {"patch", e.patch()}}}}.dump()
                  << "\n";
        return exit_code(e.error_class());
    } catch (const Error& e) {
        std::cerr << error_json(e).dump() << "\n";
        return exit_code(e.error_class());
    } catch (const std::exception& e) {
        fail_json("internal", e.what());
        return kExitOther;
    }
    return kExitOther;
}
