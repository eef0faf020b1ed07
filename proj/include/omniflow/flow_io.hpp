#pragma once

// Middlebury .flo files: "PIEH" tag, int32 width, int32 height, then
// interleaved float32 (u, v) pairs in row-major order, all little-endian.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "error.hpp"
#include "raster.hpp"

namespace omniflow {

inline constexpr std::array<char, 4> kFloMagic{'P', 'I', 'E', 'H'};
// Components above this magnitude mark unknown flow.
inline constexpr double kFloUnknownThreshold = 1e9;
inline constexpr float kFloUnknownValue = 1e10f;

namespace detail {

inline std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big)
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    return v;
}

inline void put_u32(std::vector<char>& buf, std::uint32_t v) {
    v = to_le(v);
    char b[4];
    std::memcpy(b, &v, 4);
    buf.insert(buf.end(), b, b + 4);
}

inline std::uint32_t get_u32(const char* p) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return to_le(v);
}

} // namespace detail

inline std::vector<char> encode_flo(const FlowField& flow) {
    const int h = flow.height(), w = flow.width();
    std::vector<char> buf(kFloMagic.begin(), kFloMagic.end());
    buf.reserve(12 + 8 * static_cast<std::size_t>(h) * w);
    detail::put_u32(buf, static_cast<std::uint32_t>(w));
    detail::put_u32(buf, static_cast<std::uint32_t>(h));
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            float u = static_cast<float>(flow.u(r, c));
            float v = static_cast<float>(flow.v(r, c));
            if (!flow.valid(r, c)) {
                if (!(std::abs(u) > kFloUnknownThreshold))
                    u = kFloUnknownValue;
                if (!(std::abs(v) > kFloUnknownThreshold))
                    v = kFloUnknownValue;
            }
            detail::put_u32(buf, std::bit_cast<std::uint32_t>(u));
            detail::put_u32(buf, std::bit_cast<std::uint32_t>(v));
        }
    return buf;
}

inline FlowField decode_flo(const std::vector<char>& bytes) {
    if (bytes.size() < 12)
        throw FloTruncatedError("flo: file shorter than its 12-byte header");
    if (!std::equal(kFloMagic.begin(), kFloMagic.end(), bytes.begin()))
        throw FloMagicError("flo: magic tag mismatch (expected PIEH)");
    const auto w = static_cast<std::int32_t>(detail::get_u32(bytes.data() + 4));
    const auto h = static_cast<std::int32_t>(detail::get_u32(bytes.data() + 8));
    if (w <= 0 || h <= 0)
        throw FloDimensionError("flo: nonpositive dimensions " + std::to_string(w) + "x" +
                                std::to_string(h));
    const std::size_t expect = 12 + 8 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (bytes.size() != expect)
        throw FloTruncatedError("flo: payload is " + std::to_string(bytes.size()) +
                                " bytes, expected " + std::to_string(expect));

    FlowField flow(h, w);
    bool any_unknown = false;
    const char* p = bytes.data() + 12;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c, p += 8) {
            const float u = std::bit_cast<float>(detail::get_u32(p));
            const float v = std::bit_cast<float>(detail::get_u32(p + 4));
            flow.u(r, c) = u;
            flow.v(r, c) = v;
            const bool unknown = !(std::abs(u) <= kFloUnknownThreshold) ||
                                 !(std::abs(v) <= kFloUnknownThreshold);
            if (unknown || any_unknown) {
                any_unknown = true;
                flow.set_valid(r, c, !unknown);
            }
        }
    return flow;
}

inline void write_flo(const FlowField& flow, const std::string& path) {
    const std::vector<char> buf = encode_flo(flow);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw InputError("cannot open for writing: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out)
        throw InputError("write failed: " + path);
}

inline FlowField read_flo(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open: " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_flo(bytes);
}

} // namespace omniflow
