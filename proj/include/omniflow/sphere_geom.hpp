#pragma once

// Coordinate systems on the unit sphere.
//
// Two angular conventions coexist:
//   * SphereDir (theta, phi): polar angle measured from +z and azimuth, as used
//     by the planar-to-sphere lift (sin t cos p, sin t sin p, cos t).
//   * LatLon (lat, lon): latitude/longitude used by equirectangular rasters.
// to_sphere_dir() / to_latlon() is the only bridge between them
// (theta = pi/2 - lat, phi = lon).

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "error.hpp"

namespace omniflow {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kHalfPi = 0.5 * std::numbers::pi;

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    double r = std::remainder(a, kTwoPi); // [-pi, pi]
    if (r <= -kPi)
        r += kTwoPi;
    return r;
}

struct SphereDir {
    double theta = 0.0; // polar angle from +z
    double phi = 0.0;   // azimuth, (-pi, pi]

    // A negative polar angle names the same direction as (-theta, phi + pi).
    SphereDir normalized() const {
        if (theta < 0.0)
            return {-theta, wrap_angle(phi + kPi)};
        return {theta, wrap_angle(phi)};
    }
};

struct UnitVec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 1.0;

    double dot(const UnitVec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    UnitVec3 normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n};
    }
};

struct CatadioptricPoint {
    double x = 0.0;
    double y = 0.0;
};

struct LatLon {
    double lat = 0.0; // [-pi/2, pi/2], +pi/2 is the top row
    double lon = 0.0; // (-pi, pi]
};

// Continuous pixel position; (0, 0) is the centre of the top-left pixel.
struct PixelCoord {
    double row = 0.0;
    double col = 0.0;
};

inline SphereDir to_sphere_dir(LatLon ll) { return {kHalfPi - ll.lat, ll.lon}; }
inline LatLon to_latlon(SphereDir d) { return {kHalfPi - d.theta, d.phi}; }

inline UnitVec3 angular_to_unitvec(SphereDir d) {
    const double st = std::sin(d.theta);
    return {st * std::cos(d.phi), st * std::sin(d.phi), std::cos(d.theta)};
}

// theta in [0, pi]; phi := 0 at the poles.
inline SphereDir unitvec_to_angular(UnitVec3 v) {
    const double rxy = std::hypot(v.x, v.y);
    const double theta = std::atan2(rxy, v.z);
    const double phi = rxy == 0.0 ? 0.0 : wrap_angle(std::atan2(v.y, v.x));
    return {theta, phi};
}

inline UnitVec3 latlon_to_unitvec(LatLon ll) {
    const double cl = std::cos(ll.lat);
    return {cl * std::cos(ll.lon), cl * std::sin(ll.lon), std::sin(ll.lat)};
}

inline LatLon unitvec_to_latlon(UnitVec3 v) {
    const double rxy = std::hypot(v.x, v.y);
    const double lon = rxy == 0.0 ? 0.0 : wrap_angle(std::atan2(v.y, v.x));
    return {std::atan2(v.z, rxy), lon};
}

// Stereographic projection from the +z pole.
inline CatadioptricPoint sphere_to_catadioptric(UnitVec3 v) {
    const double denom = 1.0 - v.z;
    if (!(denom > 0.0))
        throw SingularPointError("sphere_to_catadioptric: z_s == 1 has no image");
    return {v.x / denom, v.y / denom};
}

// Same map written with half-angle cotangents; agrees with the Cartesian form.
inline CatadioptricPoint catadioptric_from_angles(SphereDir d) {
    if (std::sin(0.5 * d.theta) == 0.0)
        throw SingularPointError("catadioptric_from_angles: theta == 0 has no image");
    const double cot_half = 1.0 / std::tan(0.5 * d.theta);
    return {cot_half * std::cos(d.phi), cot_half * std::sin(d.phi)};
}

struct RotationSpec {
    double pitch = 0.0; // about X
    double roll = 0.0;  // about Y
    double yaw = 0.0;   // about Z

    RotationSpec normalized() const {
        return {wrap_angle(pitch), wrap_angle(roll), wrap_angle(yaw)};
    }
    bool is_identity() const { return pitch == 0.0 && roll == 0.0 && yaw == 0.0; }
};

class RotationMatrix {
public:
    RotationMatrix() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}
    explicit RotationMatrix(const std::array<double, 9>& row_major) : m_(row_major) {}

    static RotationMatrix identity() { return {}; }

    static RotationMatrix about_x(double a) {
        const double c = std::cos(a), s = std::sin(a);
        return RotationMatrix({1, 0, 0, 0, c, -s, 0, s, c});
    }
    static RotationMatrix about_y(double a) {
        const double c = std::cos(a), s = std::sin(a);
        return RotationMatrix({c, 0, s, 0, 1, 0, -s, 0, c});
    }
    static RotationMatrix about_z(double a) {
        const double c = std::cos(a), s = std::sin(a);
        return RotationMatrix({c, -s, 0, s, c, 0, 0, 0, 1});
    }

    double operator()(int r, int c) const { return m_[static_cast<std::size_t>(3 * r + c)]; }
    const std::array<double, 9>& data() const { return m_; }

    UnitVec3 apply(const UnitVec3& v) const {
        return {m_[0] * v.x + m_[1] * v.y + m_[2] * v.z,
                m_[3] * v.x + m_[4] * v.y + m_[5] * v.z,
                m_[6] * v.x + m_[7] * v.y + m_[8] * v.z};
    }

    RotationMatrix transposed() const {
        return RotationMatrix({m_[0], m_[3], m_[6], m_[1], m_[4], m_[7], m_[2], m_[5], m_[8]});
    }
    RotationMatrix inverse() const { return transposed(); }

    RotationMatrix operator*(const RotationMatrix& o) const {
        std::array<double, 9> r{};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k)
                    s += (*this)(i, k) * o(k, j);
                r[static_cast<std::size_t>(3 * i + j)] = s;
            }
        return RotationMatrix(r);
    }

    double determinant() const {
        return m_[0] * (m_[4] * m_[8] - m_[5] * m_[7]) - m_[1] * (m_[3] * m_[8] - m_[5] * m_[6]) +
               m_[2] * (m_[3] * m_[7] - m_[4] * m_[6]);
    }

private:
    std::array<double, 9> m_;
};

// R = R_yaw(Z) * R_pitch(X) * R_roll(Y). The order is fixed.
inline RotationMatrix rotation_from_spec(const RotationSpec& r) {
    return RotationMatrix::about_z(r.yaw) * RotationMatrix::about_x(r.pitch) *
           RotationMatrix::about_y(r.roll);
}

// --- equirectangular pixel grid (pixel-centre convention) ------------------

// Column offset into (-W/2, W/2].
inline double wrap_shortest(double dcol, double width) {
    double r = std::remainder(dcol, width);
    if (r <= -0.5 * width)
        r += width;
    return r;
}

inline double wrap_col(double col, double width) {
    double c = std::fmod(col, width);
    if (c < 0.0)
        c += width;
    if (c >= width)
        c = 0.0;
    return c;
}

// Accepts any continuous position; rows past a pole give |lat| > pi/2, which
// latlon_to_unitvec() carries over the pole.
inline LatLon pixel_to_angular(PixelCoord p, int height, int width) {
    return {kHalfPi - (p.row + 0.5) / height * kPi,
            wrap_angle((p.col + 0.5) / width * kTwoPi - kPi)};
}

// Unclamped inverse: col in [-0.5, W - 0.5], row in [-0.5, H - 0.5].
inline PixelCoord angular_to_pixel_continuous(LatLon ll, int height, int width) {
    return {(kHalfPi - ll.lat) / kPi * height - 0.5, (ll.lon + kPi) / kTwoPi * width - 0.5};
}

// Canonical pixel: col wrapped into [0, W), row clamped to [0, H - 1].
inline PixelCoord angular_to_pixel(LatLon ll, int height, int width) {
    PixelCoord p = angular_to_pixel_continuous(ll, height, width);
    p.col = wrap_col(p.col, width);
    p.row = std::clamp(p.row, 0.0, static_cast<double>(height - 1));
    return p;
}

inline UnitVec3 pixel_to_unitvec(PixelCoord p, int height, int width) {
    return latlon_to_unitvec(pixel_to_angular(p, height, width));
}

inline PixelCoord unitvec_to_pixel(UnitVec3 v, int height, int width) {
    return angular_to_pixel_continuous(unitvec_to_latlon(v), height, width);
}

} // namespace omniflow
