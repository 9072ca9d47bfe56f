#ifndef TRAJFIELD_FIELD_HPP
#define TRAJFIELD_FIELD_HPP

#include "trajfield/curve.hpp"

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace trajfield {

// Pixel convention used across the toolkit: (u, v) = (column, row), origin at
// the top-left. Tensors are stored row-major with the row index before the
// column index, i.e. control points live at [frame][k][v][u][xyz].

inline std::vector<double> default_timestamps(int num_frames) {
    if (num_frames < 2) throw ConfigError("a trajectory field needs at least two frames");
    std::vector<double> ts(static_cast<std::size_t>(num_frames));
    for (int i = 0; i < num_frames; ++i)
        ts[static_cast<std::size_t>(i)] = static_cast<double>(i) / static_cast<double>(num_frames - 1);
    return ts;
}

struct PointMap {
    int height = 0;
    int width = 0;
    std::vector<Vec3> points;       // row-major, v * width + u
    std::vector<std::uint8_t> valid;

    const Vec3& at(int u, int v) const {
        return points[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) +
                      static_cast<std::size_t>(u)];
    }
    bool is_valid(int u, int v) const {
        return valid[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) +
                     static_cast<std::size_t>(u)] != 0;
    }
};

// Dense map [N] x [H] x [W] -> parametric 3D curve. Control points and
// per-control-point confidences are stored flat; queries are pure and safe to
// run concurrently once the field is built.
class TrajectoryField {
public:
    TrajectoryField() = default;

    TrajectoryField(int num_frames, int height, int width, CurveSpec spec,
                    std::vector<double> timestamps = {})
        : num_frames_(num_frames),
          height_(height),
          width_(width),
          spec_(std::move(spec)) {
        if (num_frames < 2) throw ConfigError("a trajectory field needs at least two frames");
        if (height < 1 || width < 1) throw ConfigError("field dimensions must be positive");
        spec_.validate();
        timestamps_ = timestamps.empty() ? default_timestamps(num_frames) : std::move(timestamps);
        if (timestamps_.size() != static_cast<std::size_t>(num_frames))
            throw ShapeError("timestamp count does not match the frame count");
        const std::size_t pixels = static_cast<std::size_t>(num_frames) * pixels_per_frame();
        control_points_.assign(pixels * static_cast<std::size_t>(spec_.num_control_points) * 3, 0.0);
        confidences_.assign(pixels * static_cast<std::size_t>(spec_.num_control_points), 1.0);
        valid_.assign(pixels, 1);
    }

    int num_frames() const { return num_frames_; }
    int height() const { return height_; }
    int width() const { return width_; }
    int num_control_points() const { return spec_.num_control_points; }
    const CurveSpec& spec() const { return spec_; }
    const std::vector<double>& timestamps() const { return timestamps_; }
    double timestamp(int i) const { return timestamps_[static_cast<std::size_t>(check_frame(i))]; }

    std::vector<double>& control_data() { return control_points_; }
    const std::vector<double>& control_data() const { return control_points_; }
    std::vector<double>& confidence_data() { return confidences_; }
    const std::vector<double>& confidence_data() const { return confidences_; }
    std::vector<std::uint8_t>& valid_data() { return valid_; }
    const std::vector<std::uint8_t>& valid_data() const { return valid_; }

    std::size_t pixels_per_frame() const {
        return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
    }
    std::size_t pixel_index(int i, int u, int v) const {
        return (static_cast<std::size_t>(i) * static_cast<std::size_t>(height_) +
                static_cast<std::size_t>(v)) *
                   static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(u);
    }
    std::size_t control_offset(int i, int k, int u, int v) const {
        return (((static_cast<std::size_t>(i) * static_cast<std::size_t>(spec_.num_control_points) +
                  static_cast<std::size_t>(k)) *
                     static_cast<std::size_t>(height_) +
                 static_cast<std::size_t>(v)) *
                    static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(u)) *
               3;
    }
    std::size_t confidence_offset(int i, int k, int u, int v) const {
        return ((static_cast<std::size_t>(i) * static_cast<std::size_t>(spec_.num_control_points) +
                 static_cast<std::size_t>(k)) *
                    static_cast<std::size_t>(height_) +
                static_cast<std::size_t>(v)) *
                   static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(u);
    }

    Vec3 control_point(int i, int k, int u, int v) const {
        const double* p = control_points_.data() + control_offset(i, k, u, v);
        return Vec3(p[0], p[1], p[2]);
    }
    void set_control_point(int i, int k, int u, int v, const Vec3& value) {
        double* p = control_points_.data() + control_offset(i, k, u, v);
        p[0] = value.x();
        p[1] = value.y();
        p[2] = value.z();
    }
    double confidence(int i, int k, int u, int v) const {
        return confidences_[confidence_offset(i, k, u, v)];
    }
    void set_confidence(int i, int k, int u, int v, double value) {
        confidences_[confidence_offset(i, k, u, v)] = value;
    }
    bool pixel_valid(int i, int u, int v) const { return valid_[pixel_index(i, u, v)] != 0; }
    void set_pixel_valid(int i, int u, int v, bool ok) {
        valid_[pixel_index(i, u, v)] = ok ? 1 : 0;
    }

    // Hot path: caller supplies precomputed basis weights for a fixed t.
    Vec3 query_with_weights(int i, int u, int v, std::span<const double> weights) const {
        Vec3 acc = Vec3::Zero();
        for (int k = 0; k < spec_.num_control_points; ++k) {
            const double* p = control_points_.data() + control_offset(i, k, u, v);
            const double w = weights[static_cast<std::size_t>(k)];
            acc.x() += w * p[0];
            acc.y() += w * p[1];
            acc.z() += w * p[2];
        }
        return acc;
    }

    Vec3 query_trajectory(int i, int u, int v, double t) const {
        check_pixel(i, u, v);
        const BasisWeights w = basis_eval(spec_, t);
        return query_with_weights(i, u, v, w.values);
    }

    Vec3 query_velocity(int i, int u, int v, double t) const {
        check_pixel(i, u, v);
        const std::vector<double> w = basis_derivative(spec_, t);
        return query_with_weights(i, u, v, w);
    }

    // X_{i->j}: frame i's trajectories evaluated at frame j's timestamp.
    PointMap query_cross_frame(int i, int j) const {
        check_frame(i);
        const double tj = timestamps_[static_cast<std::size_t>(check_frame(j))];
        const BasisWeights w = basis_eval(spec_, tj);
        PointMap map;
        map.height = height_;
        map.width = width_;
        map.points.resize(pixels_per_frame());
        map.valid.resize(pixels_per_frame());
        for (int v = 0; v < height_; ++v) {
            for (int u = 0; u < width_; ++u) {
                const std::size_t idx = static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) +
                                        static_cast<std::size_t>(u);
                map.points[idx] = query_with_weights(i, u, v, w.values);
                map.valid[idx] = valid_[pixel_index(i, u, v)];
            }
        }
        return map;
    }

    PointMap self_point_map(int i) const { return query_cross_frame(i, i); }

    double aggregate_confidence(int i, int u, int v, double t) const {
        check_pixel(i, u, v);
        const BasisWeights w = basis_eval(spec_, t);
        return aggregate_confidence_with_weights(i, u, v, w.values);
    }

    double aggregate_confidence_with_weights(int i, int u, int v,
                                             std::span<const double> weights) const {
        double acc = 0.0;
        for (int k = 0; k < spec_.num_control_points; ++k)
            acc += weights[static_cast<std::size_t>(k)] * confidences_[confidence_offset(i, k, u, v)];
        return acc;
    }

    void validate() const {
        if (timestamps_.front() != 0.0 || timestamps_.back() != 1.0)
            throw ConfigError("timestamps must start at 0 and end at 1");
        for (std::size_t i = 1; i < timestamps_.size(); ++i)
            if (!(timestamps_[i] > timestamps_[i - 1]))
                throw ConfigError("timestamps must be strictly increasing");
        for (double c : confidences_)
            if (!(c > 0.0)) throw ConfigError("confidences must be strictly positive");
        for (double x : control_points_)
            if (!std::isfinite(x)) throw ConfigError("control points must be finite");
    }

private:
    int check_frame(int i) const {
        if (i < 0 || i >= num_frames_) throw IndexError("frame index out of range");
        return i;
    }
    void check_pixel(int i, int u, int v) const {
        check_frame(i);
        if (u < 0 || u >= width_ || v < 0 || v >= height_)
            throw IndexError("pixel index out of range");
    }

    int num_frames_ = 0;
    int height_ = 0;
    int width_ = 0;
    CurveSpec spec_;
    std::vector<double> control_points_;   // [i][k][v][u][xyz]
    std::vector<double> confidences_;      // [i][k][v][u]
    std::vector<std::uint8_t> valid_;      // [i][v][u]
    std::vector<double> timestamps_;
};

}  // namespace trajfield

#endif  // TRAJFIELD_FIELD_HPP
