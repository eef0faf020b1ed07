#pragma once

// JSON encodings of the report types. Object keys come out sorted, so the
// text is a pure function of the values.

#include <optional>
#include <string>

#include "json.hpp"

#include "metrics.hpp"
#include "pano_pipeline.hpp"
#include "siamese.hpp"
#include "stats.hpp"

namespace omniflow {

using Json = nlohmann::json;

namespace detail {

inline Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

} // namespace detail

inline Json to_json(const DistortionRange& r) { return {{"lo", r.lo}, {"hi", r.hi}}; }

inline Json to_json(const MetricsReport& rep) {
    Json bins = Json::array();
    for (const MetricBin& b : rep.bins)
        bins.push_back({{"name", b.name},
                        {"count", b.count},
                        {"epe", detail::opt(b.epe)},
                        {"ae", detail::opt(b.ae)},
                        {"epe_d", detail::opt(b.epe_d)},
                        {"ae_d", detail::opt(b.ae_d)}});
    return {{"epe", rep.epe},
            {"ae", rep.ae},
            {"epe_d", detail::opt(rep.epe_d)},
            {"ae_d", detail::opt(rep.ae_d)},
            {"count", rep.count},
            {"distortion_range", rep.range ? to_json(*rep.range) : Json(nullptr)},
            {"bins", bins}};
}

inline Json to_json(const Histogram& h) {
    return {{"lo", h.lo}, {"hi", h.hi}, {"bins", h.counts.size()}, {"counts", h.counts}};
}

inline Json to_json(const PowerSpectrum& ps) {
    return {{"slope", ps.slope},
            {"intercept", ps.intercept},
            {"crop", ps.crop},
            {"fit_band", {ps.band_lo, ps.band_hi}},
            {"frequency", ps.frequency},
            {"power", ps.power}};
}

inline Json to_json(const DerivativeKurtosis& k) {
    return {{"spatial", detail::opt(k.spatial)}, {"temporal", detail::opt(k.temporal)}};
}

inline Json to_json(const FlowStatistics& st) {
    return {{"samples", st.samples},
            {"u", to_json(st.u)},
            {"v", to_json(st.v)},
            {"speed", to_json(st.speed)},
            {"direction", to_json(st.direction)},
            {"du", to_json(st.du)},
            {"dv", to_json(st.dv)}};
}

inline Json to_json(const GradientCheckResult& g) {
    return {{"instances", g.instances},
            {"dim", g.dim},
            {"step", g.step},
            {"tolerance", g.tolerance},
            {"max_rel_error", g.max_rel_error},
            {"max_self_error", g.max_self_error},
            {"passed", g.passed}};
}

inline Json to_json(const SeamReport& s) {
    return {{"max_jump", s.max_jump}, {"mean_jump", s.mean_jump}, {"pairs", s.pairs}};
}

inline Json error_json(const Error& e) {
    return {{"error", {{"class", to_string(e.error_class())}, {"message", e.what()}}}};
}

} // namespace omniflow
