#ifndef TRAJFIELD_BUNDLE_HPP
#define TRAJFIELD_BUNDLE_HPP

#include "trajfield/camera.hpp"
#include "trajfield/field.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace trajfield {

// Pixel pair observing the same material point from two source frames.
struct CorrespondencePair {
    int i = 0, u = 0, v = 0;
    int j = 0, u2 = 0, v2 = 0;
};

// Dense ground truth for one sequence: cross-frame positions X_{i->j} for
// every pixel of every frame, visibility and validity flags, static mask,
// rigid-segment labels, correspondences, cameras and depth maps.
struct GroundTruthBundle {
    int num_frames = 0;
    int height = 0;
    int width = 0;
    std::vector<double> timestamps;

    std::vector<double> positions;        // [i][j][v][u][xyz]
    std::vector<std::uint8_t> valid;      // [i][j][v][u]
    std::vector<std::uint8_t> visible;    // [i][j][v][u], subset of valid
    std::vector<std::uint8_t> static_mask;  // [i][v][u]
    std::vector<std::int32_t> rigid_labels; // [i][v][u], -1 = no rigid segment
    std::vector<double> depth;            // [i][v][u], camera-frame z
    std::vector<CorrespondencePair> correspondences;
    std::vector<Camera> cameras;          // per frame

    void allocate(int n, int h, int w) {
        num_frames = n;
        height = h;
        width = w;
        timestamps = default_timestamps(n);
        const std::size_t per_frame = pixels_per_frame();
        const std::size_t nn = static_cast<std::size_t>(n) * static_cast<std::size_t>(n) * per_frame;
        positions.assign(nn * 3, 0.0);
        valid.assign(nn, 0);
        visible.assign(nn, 0);
        static_mask.assign(static_cast<std::size_t>(n) * per_frame, 0);
        rigid_labels.assign(static_cast<std::size_t>(n) * per_frame, -1);
        depth.assign(static_cast<std::size_t>(n) * per_frame, 0.0);
        cameras.assign(static_cast<std::size_t>(n), Camera{});
    }

    std::size_t pixels_per_frame() const {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }
    std::size_t pixel_index(int i, int u, int v) const {
        return (static_cast<std::size_t>(i) * static_cast<std::size_t>(height) +
                static_cast<std::size_t>(v)) *
                   static_cast<std::size_t>(width) +
               static_cast<std::size_t>(u);
    }
    std::size_t cross_index(int i, int j, int u, int v) const {
        return ((static_cast<std::size_t>(i) * static_cast<std::size_t>(num_frames) +
                 static_cast<std::size_t>(j)) *
                    static_cast<std::size_t>(height) +
                static_cast<std::size_t>(v)) *
                   static_cast<std::size_t>(width) +
               static_cast<std::size_t>(u);
    }

    Vec3 position(int i, int j, int u, int v) const {
        const double* p = positions.data() + cross_index(i, j, u, v) * 3;
        return Vec3(p[0], p[1], p[2]);
    }
    void set_position(int i, int j, int u, int v, const Vec3& x) {
        double* p = positions.data() + cross_index(i, j, u, v) * 3;
        p[0] = x.x();
        p[1] = x.y();
        p[2] = x.z();
    }
    bool is_valid(int i, int j, int u, int v) const { return valid[cross_index(i, j, u, v)] != 0; }
    bool is_visible(int i, int j, int u, int v) const {
        return visible[cross_index(i, j, u, v)] != 0;
    }
    bool is_static(int i, int u, int v) const { return static_mask[pixel_index(i, u, v)] != 0; }
    std::int32_t rigid_label(int i, int u, int v) const {
        return rigid_labels[pixel_index(i, u, v)];
    }

    bool empty() const { return num_frames == 0 || positions.empty(); }

    // Bounding-box diagonal of the valid self positions X_{i->i}; the scale
    // reference for thresholds and tolerances.
    double scene_scale() const {
        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
        Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
        bool any = false;
        for (int i = 0; i < num_frames; ++i) {
            for (int v = 0; v < height; ++v) {
                for (int u = 0; u < width; ++u) {
                    if (!is_valid(i, i, u, v)) continue;
                    const Vec3 x = position(i, i, u, v);
                    lo = lo.cwiseMin(x);
                    hi = hi.cwiseMax(x);
                    any = true;
                }
            }
        }
        if (!any) return 0.0;
        return (hi - lo).norm();
    }
};

}  // namespace trajfield

#endif  // TRAJFIELD_BUNDLE_HPP
