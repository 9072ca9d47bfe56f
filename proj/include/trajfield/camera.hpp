#ifndef TRAJFIELD_CAMERA_HPP
#define TRAJFIELD_CAMERA_HPP

#include "trajfield/common.hpp"

#include <cmath>

namespace trajfield {

// Pinhole camera. `rotation`/`translation` are the world-from-camera pose:
// X_world = R * X_cam + t, so `translation` is the camera center. The camera
// looks down its local +z axis; pixels follow the (u, v) = (column, row)
// convention with the origin at the top-left.
struct Camera {
    double focal = 1.0;  // pixels
    double cx = 0.0;
    double cy = 0.0;
    Quat rotation = Quat::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 world_to_camera(const Vec3& world) const {
        return rotation.conjugate() * (world - translation);
    }
    Vec3 camera_to_world(const Vec3& cam) const { return rotation * cam + translation; }
    Vec3 center() const { return translation; }

    struct Projection {
        double u = 0.0;
        double v = 0.0;
        double depth = 0.0;  // camera-frame z
        bool in_front = false;
    };

    Projection project(const Vec3& world) const {
        const Vec3 cam = world_to_camera(world);
        Projection p;
        p.depth = cam.z();
        p.in_front = cam.z() > 0.0;
        if (p.in_front) {
            p.u = focal * cam.x() / cam.z() + cx;
            p.v = focal * cam.y() / cam.z() + cy;
        }
        return p;
    }

    // Unit world-frame direction of the ray through continuous pixel (u, v).
    Vec3 ray_direction(double u, double v) const {
        const Vec3 cam((u - cx) / focal, (v - cy) / focal, 1.0);
        return (rotation * cam).normalized();
    }

    static Camera look_at(const Vec3& position, const Vec3& target, const Vec3& up, double focal,
                          double cx, double cy) {
        Camera c;
        c.focal = focal;
        c.cx = cx;
        c.cy = cy;
        c.translation = position;
        const Vec3 forward = (target - position).normalized();
        Vec3 right = forward.cross(up);
        if (right.norm() < 1e-12) right = forward.cross(Vec3(1, 0, 0));
        right.normalize();
        // +v runs down the image, so the camera's y axis points "down" in world terms.
        const Vec3 down = forward.cross(right).normalized();
        Eigen::Matrix3d r;
        r.col(0) = right;
        r.col(1) = down;
        r.col(2) = forward;
        c.rotation = Quat(r);
        c.rotation.normalize();
        return c;
    }
};

inline double quaternion_angle_deg(const Quat& a, const Quat& b) {
    const double dot = std::min(1.0, std::abs(a.normalized().dot(b.normalized())));
    return 2.0 * std::acos(dot) * 180.0 / M_PI;
}

}  // namespace trajfield

#endif  // TRAJFIELD_CAMERA_HPP
