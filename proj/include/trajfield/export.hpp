#ifndef TRAJFIELD_EXPORT_HPP
#define TRAJFIELD_EXPORT_HPP

#include "trajfield/derive.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>

namespace trajfield {

// Plain-text exporters for derived products: ASCII PLY point clouds and
// binary PGM masks. Formats are documented in the README.

namespace detail {

inline std::string format_g9(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", x);
    return buf;
}

}  // namespace detail

// ASCII PLY: xyz plus the (source frame, pixel) labels of each point.
inline void write_ply(const std::filesystem::path& path, std::span<const FusedPoint> cloud) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open PLY for writing: " + path.string());
    out << "ply\n"
        << "format ascii 1.0\n"
        << "comment produced by trajfield " << kToolVersion << "\n"
        << "element vertex " << cloud.size() << "\n"
        << "property float x\n"
        << "property float y\n"
        << "property float z\n"
        << "property int source_frame\n"
        << "property int u\n"
        << "property int v\n"
        << "end_header\n";
    for (const FusedPoint& p : cloud) {
        out << detail::format_g9(p.position.x()) << ' ' << detail::format_g9(p.position.y()) << ' '
            << detail::format_g9(p.position.z()) << ' ' << p.source_frame << ' ' << p.u << ' '
            << p.v << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

// Binary PGM (P5), maxval 255; dynamic pixels are white.
inline void write_pgm_mask(const std::filesystem::path& path, std::span<const std::uint8_t> mask,
                           int width, int height) {
    if (mask.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        throw ShapeError("mask size does not match the image dimensions");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open PGM for writing: " + path.string());
    out << "P5\n" << width << ' ' << height << "\n255\n";
    for (std::uint8_t m : mask) out.put(m ? static_cast<char>(255) : static_cast<char>(0));
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace trajfield

#endif  // TRAJFIELD_EXPORT_HPP
