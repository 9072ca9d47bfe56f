#ifndef TRAJFIELD_DERIVE_HPP
#define TRAJFIELD_DERIVE_HPP

#include "trajfield/camera.hpp"
#include "trajfield/field.hpp"
#include "trajfield/loss.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace trajfield {

// Products derived from a trajectory field: 2D trajectories, dynamic masks,
// scene flow, velocity forecasting, canonical-frame fusion and camera-pose
// recovery from self point maps.

struct Projected2D {
    double t = 0.0;
    double u = 0.0;
    double v = 0.0;
    bool in_front = false;
};

// Projects pixel (i, u, v)'s trajectory at `samples` uniform parameters
// through the camera of the nearest frame timestamp. Samples behind (or at
// zero depth of) the camera are flagged, not thrown.
inline std::vector<Projected2D> project_2d(const TrajectoryField& field,
                                           std::span<const Camera> cameras, int i, int u, int v,
                                           int samples) {
    if (samples < 2) throw ConfigError("project_2d needs at least two samples");
    if (cameras.size() != static_cast<std::size_t>(field.num_frames()))
        throw ShapeError("one camera per frame is required");
    std::vector<Projected2D> out;
    out.reserve(static_cast<std::size_t>(samples));
    for (int s = 0; s < samples; ++s) {
        const double t = static_cast<double>(s) / static_cast<double>(samples - 1);
        // camera of the nearest frame timestamp (ties to the earlier frame)
        std::size_t best = 0;
        double best_gap = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < cameras.size(); ++j) {
            const double gap = std::abs(t - field.timestamps()[j]);
            if (gap < best_gap) {
                best_gap = gap;
                best = j;
            }
        }
        const Vec3 x = field.query_trajectory(i, u, v, t);
        const Camera::Projection proj = cameras[best].project(x);
        out.push_back({t, proj.u, proj.v, proj.in_front});
    }
    return out;
}

// Thresholds the per-pixel control-point variance (same variance as the
// static regularizer). 1 = dynamic.
inline std::vector<std::uint8_t> dynamic_mask(const TrajectoryField& field, double threshold) {
    if (!(threshold > 0.0)) throw ConfigError("dynamic_mask threshold must be positive");
    const int d = field.num_control_points();
    const double inv_d = 1.0 / static_cast<double>(d);
    std::vector<std::uint8_t> mask(
        static_cast<std::size_t>(field.num_frames()) * field.pixels_per_frame(), 0);
    for (int i = 0; i < field.num_frames(); ++i)
        for (int v = 0; v < field.height(); ++v)
            for (int u = 0; u < field.width(); ++u) {
                Vec3 centroid = Vec3::Zero();
                for (int k = 0; k < d; ++k) centroid += field.control_point(i, k, u, v);
                centroid *= inv_d;
                double var = 0.0;
                for (int k = 0; k < d; ++k)
                    var += (field.control_point(i, k, u, v) - centroid).squaredNorm();
                var *= inv_d;
                if (var > threshold) mask[field.pixel_index(i, u, v)] = 1;
            }
    return mask;
}

// Displacement between the two trajectory endpoints per pixel of frame i.
inline std::vector<Vec3> scene_flow(const TrajectoryField& field, int i) {
    const int d = field.num_control_points();
    std::vector<Vec3> flow(field.pixels_per_frame());
    for (int v = 0; v < field.height(); ++v)
        for (int u = 0; u < field.width(); ++u)
            flow[static_cast<std::size_t>(v) * static_cast<std::size_t>(field.width()) +
                 static_cast<std::size_t>(u)] =
                field.control_point(i, d - 1, u, v) - field.control_point(i, 0, u, v);
    return flow;
}

// First-order tangent continuation beyond t = 1.
inline Vec3 forecast(const TrajectoryField& field, int i, int u, int v, double dt) {
    if (dt < 0.0) throw DomainError("forecast horizon must be non-negative");
    const Vec3 end = field.query_trajectory(i, u, v, 1.0);
    if (dt == 0.0) return end;
    return end + dt * field.query_velocity(i, u, v, 1.0);
}

struct FusedPoint {
    Vec3 position = Vec3::Zero();
    int source_frame = 0;
    int u = 0;
    int v = 0;
};

// Evaluates every source frame's trajectories at frame j's timestamp and
// concatenates the valid pixels, labels preserved.
inline std::vector<FusedPoint> fuse_canonical(const TrajectoryField& field, int j,
                                              std::span<const int> source_frames) {
    if (source_frames.empty()) throw InputError("fuse_canonical needs at least one source frame");
    std::vector<FusedPoint> cloud;
    for (int i : source_frames) {
        const PointMap map = field.query_cross_frame(i, j);
        for (int v = 0; v < field.height(); ++v)
            for (int u = 0; u < field.width(); ++u) {
                if (!map.is_valid(u, v)) continue;
                cloud.push_back({map.at(u, v), i, u, v});
            }
    }
    return cloud;
}

// ---------------------------------------------------------------------------
// Camera recovery from self point maps
// ---------------------------------------------------------------------------

struct CameraEstimate {
    Camera camera;
    bool ok = false;
    double median_reproj_px = 0.0;
    std::string message;
};

namespace detail {

struct PnPData {
    std::vector<Vec3> world;
    std::vector<Eigen::Vector2d> pixel;
    double cx = 0.0;
    double cy = 0.0;
};

// Camera-from-world pose: X_cam = R * X_world + t.
struct PoseCW {
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    Vec3 t = Vec3::Zero();
};

inline Eigen::Matrix3d skew(const Vec3& w) {
    Eigen::Matrix3d s;
    s << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return s;
}

inline Eigen::Matrix3d rotation_exp(const Vec3& w) {
    const double angle = w.norm();
    if (angle < 1e-14) return Eigen::Matrix3d::Identity() + skew(w);
    return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

// Direct linear transform for the pose at a fixed focal length. Solves the
// 3x4 projection matrix from normalized image coordinates, then snaps the
// left 3x3 block to a rotation.
inline PoseCW dlt_pose(const PnPData& data, double focal) {
    const std::size_t n = data.world.size();

    Vec3 centroid = Vec3::Zero();
    for (const Vec3& x : data.world) centroid += x;
    centroid /= static_cast<double>(n);
    double spread = 0.0;
    for (const Vec3& x : data.world) spread += (x - centroid).norm();
    spread /= static_cast<double>(n);
    const double inv_spread = spread > 0.0 ? std::sqrt(3.0) / spread : 1.0;

    Eigen::Matrix<double, 12, 12> ata = Eigen::Matrix<double, 12, 12>::Zero();
    for (std::size_t k = 0; k < n; ++k) {
        const Vec3 xn = (data.world[k] - centroid) * inv_spread;
        const Eigen::Vector4d h(xn.x(), xn.y(), xn.z(), 1.0);
        const double mx = (data.pixel[k].x() - data.cx) / focal;
        const double my = (data.pixel[k].y() - data.cy) / focal;
        Eigen::Matrix<double, 2, 12> rows = Eigen::Matrix<double, 2, 12>::Zero();
        rows.block<1, 4>(0, 0) = h.transpose();
        rows.block<1, 4>(0, 8) = -mx * h.transpose();
        rows.block<1, 4>(1, 4) = h.transpose();
        rows.block<1, 4>(1, 8) = -my * h.transpose();
        ata += rows.transpose() * rows;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 12, 12>> eig(ata);
    Eigen::Matrix<double, 12, 1> p = eig.eigenvectors().col(0);

    Eigen::Matrix<double, 3, 4> proj;
    proj.row(0) = p.segment<4>(0).transpose();
    proj.row(1) = p.segment<4>(4).transpose();
    proj.row(2) = p.segment<4>(8).transpose();
    // undo the 3D normalization: X_n = inv_spread * (X - centroid)
    Eigen::Matrix4d denorm = Eigen::Matrix4d::Identity();
    denorm.block<3, 3>(0, 0) *= inv_spread;
    denorm.block<3, 1>(0, 3) = -inv_spread * centroid;
    proj = proj * denorm;

    if (proj.block<3, 3>(0, 0).determinant() < 0.0) proj = -proj;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(proj.block<3, 3>(0, 0),
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    PoseCW pose;
    pose.r = svd.matrixU() * svd.matrixV().transpose();
    const double scale = svd.singularValues().mean();
    pose.t = proj.col(3) / (scale > 0.0 ? scale : 1.0);
    return pose;
}

// One Huber-weighted Gauss-Newton pass over (rotation, translation) and
// optionally the focal length. Returns the squared parameter step.
inline double gn_step(const PnPData& data, double& focal, PoseCW& pose, bool refine_focal) {
    const int dims = refine_focal ? 7 : 6;
    Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(dims, dims);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dims);
    for (std::size_t k = 0; k < data.world.size(); ++k) {
        const Vec3 xc = pose.r * data.world[k] + pose.t;
        if (xc.z() <= 1e-9) continue;
        const double iz = 1.0 / xc.z();
        const Eigen::Vector2d res(focal * xc.x() * iz + data.cx - data.pixel[k].x(),
                                  focal * xc.y() * iz + data.cy - data.pixel[k].y());
        const double rn = res.norm();
        const double w = rn <= 1.0 ? 1.0 : 1.0 / rn;  // Huber, scale 1 px

        Eigen::Matrix<double, 2, 3> dpdx;
        dpdx << focal * iz, 0, -focal * xc.x() * iz * iz, 0, focal * iz,
            -focal * xc.y() * iz * iz;
        Eigen::Matrix<double, 2, Eigen::Dynamic> jac(2, dims);
        jac.block<2, 3>(0, 0) = -dpdx * skew(xc);  // left perturbation of R
        jac.block<2, 3>(0, 3) = dpdx;
        if (refine_focal) jac.col(6) = Eigen::Vector2d(xc.x() * iz, xc.y() * iz);

        hessian += w * jac.transpose() * jac;
        rhs -= w * jac.transpose() * res;
    }
    const Eigen::VectorXd delta = hessian.ldlt().solve(rhs);
    if (!delta.allFinite()) return 0.0;
    pose.r = rotation_exp(delta.segment<3>(0)) * pose.r;
    pose.t += delta.segment<3>(3);
    if (refine_focal) focal = std::max(1e-6, focal + delta(6));
    return delta.squaredNorm();
}

inline double median_reprojection_px(const PnPData& data, double focal, const PoseCW& pose) {
    std::vector<double> errs;
    errs.reserve(data.world.size());
    for (std::size_t k = 0; k < data.world.size(); ++k) {
        const Vec3 xc = pose.r * data.world[k] + pose.t;
        if (xc.z() <= 1e-9) {
            errs.push_back(1e9);
            continue;
        }
        const double iz = 1.0 / xc.z();
        errs.push_back(
            std::hypot(focal * xc.x() * iz + data.cx - data.pixel[k].x(),
                       focal * xc.y() * iz + data.cy - data.pixel[k].y()));
    }
    std::nth_element(errs.begin(), errs.begin() + static_cast<std::ptrdiff_t>(errs.size() / 2),
                     errs.end());
    return errs[errs.size() / 2];
}

inline double score_focal(const PnPData& data, double focal, PoseCW* best_pose) {
    PoseCW pose = dlt_pose(data, focal);
    double f = focal;
    for (int it = 0; it < 4; ++it) gn_step(data, f, pose, /*refine_focal=*/false);
    if (best_pose) *best_pose = pose;
    return median_reprojection_px(data, focal, pose);
}

}  // namespace detail

// Recovers per-frame pinhole cameras from the field's self point maps:
// coarse-to-fine 1-D search over the focal length (log grid 0.2-5x image
// width, then golden-section refinement), DLT pose per candidate, Huber IRLS
// polish, and a final joint (f, R, t) refinement. The principal point is
// fixed at the image center. Degenerate frames are flagged; the rest are
// returned.
inline std::vector<CameraEstimate> estimate_cameras(const TrajectoryField& field,
                                                    int threads = 1) {
    const int n = field.num_frames();
    const double cx = 0.5 * static_cast<double>(field.width() - 1);
    const double cy = 0.5 * static_cast<double>(field.height() - 1);
    std::vector<CameraEstimate> out(static_cast<std::size_t>(n));

    parallel_for_chunks(static_cast<std::size_t>(n), threads, [&](std::size_t begin,
                                                                  std::size_t end) {
        for (std::size_t fi = begin; fi < end; ++fi) {
            const int i = static_cast<int>(fi);
            CameraEstimate& est = out[fi];
            const PointMap self = field.self_point_map(i);

            detail::PnPData data;
            data.cx = cx;
            data.cy = cy;
            std::size_t n_valid = 0;
            for (int v = 0; v < field.height(); ++v)
                for (int u = 0; u < field.width(); ++u) n_valid += self.is_valid(u, v) ? 1 : 0;
            const std::size_t stride = std::max<std::size_t>(1, n_valid / 1500);
            std::size_t seen = 0;
            for (int v = 0; v < field.height(); ++v)
                for (int u = 0; u < field.width(); ++u) {
                    if (!self.is_valid(u, v)) continue;
                    if (seen++ % stride != 0) continue;
                    data.world.push_back(self.at(u, v));
                    data.pixel.emplace_back(static_cast<double>(u), static_cast<double>(v));
                }

            if (data.world.size() < 6) {
                est.message = "too few valid pixels for pose estimation";
                continue;
            }
            {
                Vec3 mean = Vec3::Zero();
                for (const Vec3& x : data.world) mean += x;
                mean /= static_cast<double>(data.world.size());
                Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
                for (const Vec3& x : data.world) cov += (x - mean) * (x - mean).transpose();
                const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
                if (eig.eigenvalues()(0) <= 1e-10 * std::max(eig.eigenvalues()(2), 1e-300)) {
                    est.message = "degenerate geometry: self point map is (near) planar";
                    continue;
                }
            }

            const double w_img = static_cast<double>(field.width());
            const int grid = 32;
            double best_f = 0.0;
            double best_err = std::numeric_limits<double>::infinity();
            const double log_lo = std::log(0.2 * w_img);
            const double log_hi = std::log(5.0 * w_img);
            for (int g = 0; g < grid; ++g) {
                const double f = std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(g) /
                                                       static_cast<double>(grid - 1));
                const double err = detail::score_focal(data, f, nullptr);
                if (err < best_err) {
                    best_err = err;
                    best_f = f;
                }
            }

            // golden-section refinement on log f around the best grid cell
            const double log_step = (log_hi - log_lo) / static_cast<double>(grid - 1);
            double a = std::log(best_f) - log_step;
            double b = std::log(best_f) + log_step;
            const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
            double c = b - phi * (b - a);
            double d = a + phi * (b - a);
            double fc = detail::score_focal(data, std::exp(c), nullptr);
            double fd = detail::score_focal(data, std::exp(d), nullptr);
            for (int it = 0; it < 28; ++it) {
                if (fc < fd) {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - phi * (b - a);
                    fc = detail::score_focal(data, std::exp(c), nullptr);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + phi * (b - a);
                    fd = detail::score_focal(data, std::exp(d), nullptr);
                }
            }
            double focal = std::exp(0.5 * (a + b));

            detail::PoseCW pose;
            detail::score_focal(data, focal, &pose);
            for (int it = 0; it < 30; ++it)
                if (detail::gn_step(data, focal, pose, /*refine_focal=*/true) < 1e-24) break;

            est.median_reproj_px = detail::median_reprojection_px(data, focal, pose);
            est.camera.focal = focal;
            est.camera.cx = cx;
            est.camera.cy = cy;
            est.camera.rotation = Quat(pose.r.transpose());
            est.camera.rotation.normalize();
            est.camera.translation = -(pose.r.transpose() * pose.t);
            est.ok = true;
        }
    });
    return out;
}

}  // namespace trajfield

#endif  // TRAJFIELD_DERIVE_HPP
