#pragma once

// 8-bit image files. PNG goes through libpng's simplified API; binary
// PGM/PPM (P5/P6) is handled directly. The format follows the extension.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "raster.hpp"

namespace omniflow {

using ByteImage = Raster<std::uint8_t>;

namespace detail {

inline std::string lower_ext(const std::string& path) {
    const auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return ext;
}

inline png_uint_32 png_format_for(int channels) {
    switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 2: return PNG_FORMAT_GA;
    case 3: return PNG_FORMAT_RGB;
    case 4: return PNG_FORMAT_RGBA;
    default: throw InputError("png: unsupported channel count " + std::to_string(channels));
    }
}

inline void write_png(const ByteImage& img, const std::string& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = png_format_for(img.channels());
    if (!png_image_write_to_file(&image, path.c_str(), 0, img.data().data(), 0, nullptr))
        throw InputError("png write failed for " + path + ": " + image.message);
}

inline ByteImage read_png(const std::string& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw InputError("png read failed for " + path + ": " + image.message);
    int channels = 3;
    if (image.format & PNG_FORMAT_FLAG_COLOR)
        channels = (image.format & PNG_FORMAT_FLAG_ALPHA) ? 4 : 3;
    else
        channels = (image.format & PNG_FORMAT_FLAG_ALPHA) ? 2 : 1;
    image.format = png_format_for(channels);
    ByteImage img(static_cast<int>(image.height), static_cast<int>(image.width), channels);
    if (!png_image_finish_read(&image, nullptr, img.data().data(), 0, nullptr)) {
        png_image_free(&image);
        throw InputError("png decode failed for " + path + ": " + image.message);
    }
    return img;
}

inline void write_pnm(const ByteImage& img, const std::string& path) {
    if (img.channels() != 1 && img.channels() != 3)
        throw InputError("pnm output needs 1 or 3 channels");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw InputError("cannot open for writing: " + path);
    out << (img.channels() == 1 ? "P5" : "P6") << '\n'
        << img.width() << ' ' << img.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data().data()),
              static_cast<std::streamsize>(img.data().size()));
    if (!out)
        throw InputError("write failed: " + path);
}

inline ByteImage read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open: " + path);
    auto token = [&in]() {
        std::string t;
        while (in >> std::ws && in.peek() == '#') {
            std::string skip;
            std::getline(in, skip);
        }
        in >> t;
        return t;
    };
    const std::string magic = token();
    if (magic != "P5" && magic != "P6")
        throw InputError("pnm: unsupported magic in " + path);
    const int w = std::stoi(token()), h = std::stoi(token()), maxval = std::stoi(token());
    if (maxval != 255)
        throw InputError("pnm: only 8-bit files are supported");
    in.get();
    ByteImage img(h, w, magic == "P5" ? 1 : 3);
    in.read(reinterpret_cast<char*>(img.data().data()), static_cast<std::streamsize>(img.data().size()));
    if (!in)
        throw InputError("pnm: truncated pixel data in " + path);
    return img;
}

} // namespace detail

inline ByteImage to_bytes(const EquirectRaster& img) {
    ByteImage out(img.height(), img.width(), img.channels());
    auto src = img.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i)
        dst[i] = static_cast<std::uint8_t>(std::clamp(std::lround(src[i]), 0L, 255L));
    return out;
}

inline EquirectRaster from_bytes(const ByteImage& img) {
    EquirectRaster out(img.height(), img.width(), img.channels());
    auto src = img.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i)
        dst[i] = src[i];
    return out;
}

inline void write_image(const ByteImage& img, const std::string& path) {
    const std::string ext = detail::lower_ext(path);
    if (ext == "png")
        detail::write_png(img, path);
    else if (ext == "ppm" || ext == "pgm" || ext == "pnm")
        detail::write_pnm(img, path);
    else
        throw InputError("unsupported image extension: " + path);
}

inline void write_image(const EquirectRaster& img, const std::string& path) {
    write_image(to_bytes(img), path);
}

inline ByteImage read_image_bytes(const std::string& path) {
    const std::string ext = detail::lower_ext(path);
    if (ext == "png")
        return detail::read_png(path);
    if (ext == "ppm" || ext == "pgm" || ext == "pnm")
        return detail::read_pnm(path);
    throw InputError("unsupported image extension: " + path);
}

inline EquirectRaster read_image(const std::string& path) { return from_bytes(read_image_bytes(path)); }

} // namespace omniflow
