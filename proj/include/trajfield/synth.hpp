#ifndef TRAJFIELD_SYNTH_HPP
#define TRAJFIELD_SYNTH_HPP

#include "trajfield/bundle.hpp"
#include "trajfield/camera.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

namespace trajfield {

// Analytic ray-cast scenes with rigid and non-rigid motion and a moving
// camera. Ground truth comes straight from the closed-form motion, so every
// trajectory is exact to roundoff and every annotation (masks, labels,
// visibility, correspondences) is derived from the same world model.
//
// Presets other than static_room drive all motion with profiles symmetric
// about t = 0.5, so the world state at frames i and N-1-i coincides exactly.
// Correspondence enumeration stays generic (project a material point into
// another frame, check the landed pixel sees the same point); the symmetric
// presets are what make exact matches plentiful.

enum class MotionProfile { none, linear, bump };

inline double motion_profile_value(MotionProfile p, double t) {
    switch (p) {
        case MotionProfile::none: return 0.0;
        case MotionProfile::linear: return t;
        case MotionProfile::bump: return 4.0 * t * (1.0 - t);
    }
    return 0.0;
}

// Rigid SE(3) path: rotation about `axis` through `pivot` by
// angle_amplitude * profile(t), plus a translation offset along
// translation_amplitude * profile(t).
struct MotionPath {
    Vec3 pivot = Vec3::Zero();
    Vec3 axis = Vec3::UnitY();
    double angle_amplitude = 0.0;  // radians
    Vec3 translation_amplitude = Vec3::Zero();
    MotionProfile profile = MotionProfile::none;

    bool is_identity() const {
        return profile == MotionProfile::none ||
               (angle_amplitude == 0.0 && translation_amplitude == Vec3::Zero());
    }
};

// Radial scale about the sphere center: s(t) = 1 + amplitude * sin(2 pi f t).
// Frequencies of the form k + 1/2 keep s symmetric about t = 0.5.
struct Pulsation {
    double amplitude = 0.0;
    double frequency = 0.0;

    double scale_at(double t) const {
        if (amplitude == 0.0) return 1.0;
        return 1.0 + amplitude * std::sin(2.0 * M_PI * frequency * t);
    }
};

enum class ShapeKind { sphere, box, plane };

struct Primitive {
    ShapeKind kind = ShapeKind::sphere;
    Vec3 center = Vec3::Zero();        // sphere/box rest center
    double radius = 1.0;               // sphere
    Vec3 half_extents = Vec3::Ones();  // box
    Vec3 plane_point = Vec3::Zero();   // plane
    Vec3 plane_normal = Vec3::UnitY();
    MotionPath motion;
    Pulsation pulsation;
    int segment_id = 0;
    bool is_static = true;

    bool is_rigid() const { return pulsation.amplitude == 0.0; }
};

// Rigid pose of a primitive at a fixed time, with the pulsation scale.
struct PrimitivePose {
    Quat rotation = Quat::Identity();
    Vec3 pivot = Vec3::Zero();
    Vec3 offset = Vec3::Zero();
    double scale = 1.0;
    bool identity = true;

    Vec3 to_world(const Vec3& rest) const {
        if (identity) return rest;
        return rotation * (rest - pivot) + pivot + offset;
    }
    Vec3 to_rest(const Vec3& world) const {
        if (identity) return world;
        return rotation.conjugate() * (world - pivot - offset) + pivot;
    }
};

inline PrimitivePose primitive_pose(const Primitive& prim, double t) {
    PrimitivePose pose;
    pose.scale = prim.pulsation.scale_at(t);
    if (prim.is_static || prim.motion.is_identity()) {
        pose.identity = prim.is_static;
        if (!pose.identity && pose.scale == 1.0) pose.identity = true;
        return pose;
    }
    const double a = motion_profile_value(prim.motion.profile, t);
    pose.rotation = Quat(Eigen::AngleAxisd(prim.motion.angle_amplitude * a,
                                           prim.motion.axis.normalized()));
    pose.pivot = prim.motion.pivot;
    pose.offset = prim.motion.translation_amplitude * a;
    pose.identity = false;
    return pose;
}

// Where the material point `rest` sits in the world at the pose. Pulsation
// scales radially about the (rigidly moved) sphere center.
inline Vec3 material_to_world(const Primitive& prim, const PrimitivePose& pose, const Vec3& rest) {
    if (prim.is_static) return rest;
    if (prim.kind == ShapeKind::sphere && pose.scale != 1.0) {
        const Vec3 scaled = prim.center + pose.scale * (rest - prim.center);
        return pose.to_world(scaled);
    }
    return pose.to_world(rest);
}

struct CameraPath {
    Vec3 base_position = Vec3(0, 1.5, 0);
    Vec3 sweep_amplitude = Vec3::Zero();
    MotionProfile profile = MotionProfile::none;
    Vec3 target = Vec3(0, 1, 5);
    double focal_rel = 0.9;  // focal = focal_rel * image width

    Camera at(double t, int width, int height) const {
        const Vec3 pos = base_position + sweep_amplitude * motion_profile_value(profile, t);
        return Camera::look_at(pos, target, Vec3::UnitY(), focal_rel * static_cast<double>(width),
                               0.5 * static_cast<double>(width - 1),
                               0.5 * static_cast<double>(height - 1));
    }
};

struct Scene {
    std::vector<Primitive> primitives;
    CameraPath camera_path;
    // Far clip for rays. Keeps the otherwise infinite ground plane from
    // stretching the scene bounding box (and every scale-relative threshold)
    // with grazing hits near the horizon.
    double max_ray_distance = 14.0;

    void validate() const {
        if (primitives.empty()) throw ConfigError("scene has no primitives");
        if (!(max_ray_distance > 0.0)) throw ConfigError("max_ray_distance must be positive");
        bool any_static = false;
        for (const Primitive& p : primitives) {
            any_static |= p.is_static;
            if (p.kind == ShapeKind::sphere && !(p.radius > 0.0))
                throw ConfigError("sphere radius must be positive");
            if (p.kind == ShapeKind::box && !(p.half_extents.minCoeff() > 0.0))
                throw ConfigError("box half-extents must be positive");
            if (p.kind == ShapeKind::plane && p.plane_normal.norm() < 1e-12)
                throw ConfigError("plane normal must be non-zero");
            if (p.pulsation.amplitude != 0.0 && p.kind != ShapeKind::sphere)
                throw ConfigError("pulsation is only supported on spheres");
            if (p.pulsation.amplitude != 0.0 && p.is_static)
                throw ConfigError("a pulsating primitive cannot be marked static");
            if (std::abs(p.pulsation.amplitude) >= 1.0)
                throw ConfigError("pulsation amplitude must keep the scale positive");
        }
        if (!any_static) throw ConfigError("scene needs at least one static primitive");
        if (!(camera_path.focal_rel > 0.0)) throw ConfigError("camera focal must be positive");
    }
};

// ---------------------------------------------------------------------------
// Ray casting
// ---------------------------------------------------------------------------

struct RayHit {
    bool hit = false;
    int primitive_index = -1;
    Vec3 material_point = Vec3::Zero();  // rest-frame coordinates
    Vec3 world_point = Vec3::Zero();
    double depth = 0.0;  // camera-frame z
};

namespace detail {

constexpr double kRayEps = 1e-9;

// Returns the smallest ray parameter > kRayEps, or a negative value on miss.
inline double intersect_in_rest_frame(const Primitive& prim, const PrimitivePose& pose,
                                      const Vec3& origin, const Vec3& dir, Vec3* rest_point) {
    const Vec3 o = pose.to_rest(origin);
    const Vec3 d = pose.identity ? dir : Vec3(pose.rotation.conjugate() * dir);
    switch (prim.kind) {
        case ShapeKind::sphere: {
            const double r = prim.radius * pose.scale;
            const Vec3 oc = o - prim.center;
            const double b = oc.dot(d);
            const double c = oc.squaredNorm() - r * r;
            const double disc = b * b - c;
            if (disc < 0.0) return -1.0;
            const double sq = std::sqrt(disc);
            double t = -b - sq;
            if (t <= kRayEps) t = -b + sq;
            if (t <= kRayEps) return -1.0;
            const Vec3 hit = o + t * d;
            // undo the radial pulsation to land on the rest sphere
            *rest_point = pose.scale == 1.0 ? hit
                                            : Vec3(prim.center + (hit - prim.center) / pose.scale);
            return t;
        }
        case ShapeKind::box: {
            double t_near = -std::numeric_limits<double>::infinity();
            double t_far = std::numeric_limits<double>::infinity();
            for (int a = 0; a < 3; ++a) {
                const double lo = prim.center[a] - prim.half_extents[a];
                const double hi = prim.center[a] + prim.half_extents[a];
                if (std::abs(d[a]) < 1e-15) {
                    if (o[a] < lo || o[a] > hi) return -1.0;
                    continue;
                }
                double t0 = (lo - o[a]) / d[a];
                double t1 = (hi - o[a]) / d[a];
                if (t0 > t1) std::swap(t0, t1);
                t_near = std::max(t_near, t0);
                t_far = std::min(t_far, t1);
                if (t_near > t_far) return -1.0;
            }
            double t = t_near;
            if (t <= kRayEps) t = t_far;
            if (t <= kRayEps) return -1.0;
            *rest_point = o + t * d;
            return t;
        }
        case ShapeKind::plane: {
            const double denom = d.dot(prim.plane_normal);
            if (std::abs(denom) < 1e-12) return -1.0;
            const double t = (prim.plane_point - o).dot(prim.plane_normal) / denom;
            if (t <= kRayEps) return -1.0;
            *rest_point = o + t * d;
            return t;
        }
    }
    return -1.0;
}

}  // namespace detail

inline RayHit ray_cast_with_poses(const Scene& scene, std::span<const PrimitivePose> poses,
                                  const Camera& camera, double u, double v) {
    const Vec3 origin = camera.center();
    const Vec3 dir = camera.ray_direction(u, v);
    RayHit best;
    double best_t = scene.max_ray_distance;
    for (std::size_t p = 0; p < scene.primitives.size(); ++p) {
        Vec3 rest;
        const double t =
            detail::intersect_in_rest_frame(scene.primitives[p], poses[p], origin, dir, &rest);
        if (t > 0.0 && t < best_t) {
            best_t = t;
            best.hit = true;
            best.primitive_index = static_cast<int>(p);
            best.material_point = rest;
        }
    }
    if (best.hit) {
        best.world_point = origin + best_t * dir;
        best.depth = camera.world_to_camera(best.world_point).z();
    }
    return best;
}

inline RayHit ray_cast(const Scene& scene, double t, const Camera& camera, double u, double v) {
    std::vector<PrimitivePose> poses;
    poses.reserve(scene.primitives.size());
    for (const Primitive& prim : scene.primitives) poses.push_back(primitive_pose(prim, t));
    return ray_cast_with_poses(scene, poses, camera, u, v);
}

// The exact ground-truth trajectory: the hit's rest-frame material point
// pushed through its primitive's motion at time t.
inline Vec3 material_trajectory(const Scene& scene, const RayHit& hit, double t) {
    if (!hit.hit) throw InputError("material_trajectory needs a valid hit");
    const Primitive& prim = scene.primitives[static_cast<std::size_t>(hit.primitive_index)];
    if (prim.is_static) return hit.material_point;
    return material_to_world(prim, primitive_pose(prim, t), hit.material_point);
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

inline Scene build_scene(const std::string& preset, std::uint64_t seed) {
    Rng rng(seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
    auto jitter = [&](double amp) { return rng.uniform(-amp, amp); };

    Scene scene;
    Primitive ground;
    ground.kind = ShapeKind::plane;
    ground.plane_point = Vec3(0, 0, 0);
    ground.plane_normal = Vec3::UnitY();
    ground.segment_id = 0;
    ground.is_static = true;
    scene.primitives.push_back(ground);

    auto static_box = [&](Vec3 center, Vec3 he, int segment) {
        Primitive b;
        b.kind = ShapeKind::box;
        b.center = center;
        b.half_extents = he;
        b.segment_id = segment;
        b.is_static = true;
        return b;
    };
    auto static_sphere = [&](Vec3 center, double r, int segment) {
        Primitive s;
        s.kind = ShapeKind::sphere;
        s.center = center;
        s.radius = r;
        s.segment_id = segment;
        s.is_static = true;
        return s;
    };

    scene.camera_path.base_position = Vec3(0.0 + jitter(0.2), 1.6 + jitter(0.1), -0.2);
    scene.camera_path.target = Vec3(0, 0.9, 5);
    scene.camera_path.focal_rel = 0.9;

    if (preset == "static_room") {
        scene.camera_path.sweep_amplitude = Vec3(1.4, 0.35, 0.8);
        scene.camera_path.profile = MotionProfile::linear;
        scene.primitives.push_back(
            static_box(Vec3(-1.4 + jitter(0.2), 0.5, 5.6 + jitter(0.3)), Vec3(0.5, 0.5, 0.5), 1));
        scene.primitives.push_back(
            static_box(Vec3(1.5 + jitter(0.2), 0.35, 4.9 + jitter(0.3)), Vec3(0.45, 0.35, 0.45), 2));
        scene.primitives.push_back(
            static_box(Vec3(0.1 + jitter(0.15), 0.3, 6.4 + jitter(0.3)), Vec3(0.9, 0.3, 0.4), 3));
        scene.primitives.push_back(
            static_sphere(Vec3(-0.1 + jitter(0.2), 0.95 + jitter(0.1), 4.4), 0.45, 4));
        scene.primitives.push_back(
            static_sphere(Vec3(0.9 + jitter(0.2), 1.35, 5.8 + jitter(0.2)), 0.4, 5));
    } else if (preset == "rigid_orbit") {
        scene.camera_path.sweep_amplitude = Vec3(0.9, 0.25, 0.4);
        scene.camera_path.profile = MotionProfile::bump;
        scene.primitives.push_back(
            static_box(Vec3(-1.3 + jitter(0.2), 0.45, 5.7 + jitter(0.3)), Vec3(0.5, 0.45, 0.5), 1));
        Primitive orbiter = static_sphere(Vec3(1.05 + jitter(0.1), 0.85 + jitter(0.1), 4.6), 0.45, 2);
        orbiter.is_static = false;
        orbiter.motion.pivot = Vec3(0.0, 0.85, 5.0);
        orbiter.motion.axis = Vec3::UnitY();
        orbiter.motion.angle_amplitude = 1.25 + jitter(0.15);
        orbiter.motion.translation_amplitude = Vec3(0, 0.3 + jitter(0.05), 0);
        orbiter.motion.profile = MotionProfile::bump;
        scene.primitives.push_back(orbiter);
    } else if (preset == "pulsing_sphere") {
        scene.camera_path.sweep_amplitude = Vec3(0.7, 0.2, 0.3);
        scene.camera_path.profile = MotionProfile::bump;
        scene.primitives.push_back(
            static_box(Vec3(1.4 + jitter(0.2), 0.4, 5.9 + jitter(0.3)), Vec3(0.45, 0.4, 0.45), 1));
        Primitive pulser = static_sphere(Vec3(-0.3 + jitter(0.15), 1.0, 4.9 + jitter(0.2)),
                                         0.75 + jitter(0.05), 2);
        pulser.is_static = false;
        pulser.pulsation.amplitude = 0.2;
        pulser.pulsation.frequency = 1.5;  // symmetric about t = 0.5
        scene.primitives.push_back(pulser);
    } else if (preset == "two_body_occlusion") {
        scene.camera_path.sweep_amplitude = Vec3(0.25, 0.1, 0.0);
        scene.camera_path.profile = MotionProfile::bump;
        Primitive crosser = static_sphere(Vec3(-1.5 + jitter(0.1), 0.8 + jitter(0.1), 4.1), 0.5, 1);
        crosser.is_static = false;
        crosser.motion.translation_amplitude = Vec3(2.9 + jitter(0.2), 0.0, 0.0);
        crosser.motion.profile = MotionProfile::bump;
        scene.primitives.push_back(crosser);
        scene.primitives.push_back(
            static_sphere(Vec3(0.3 + jitter(0.1), 0.85, 6.2 + jitter(0.2)), 0.7, 2));
    } else if (preset == "mixed") {
        scene.camera_path.sweep_amplitude = Vec3(0.8, 0.25, 0.35);
        scene.camera_path.profile = MotionProfile::bump;
        scene.primitives.push_back(
            static_box(Vec3(-1.45 + jitter(0.15), 0.5, 5.8 + jitter(0.2)), Vec3(0.5, 0.5, 0.5), 1));
        Primitive orbiter = static_box(Vec3(1.15 + jitter(0.1), 0.4, 4.7), Vec3(0.35, 0.4, 0.35), 2);
        orbiter.is_static = false;
        orbiter.motion.pivot = Vec3(0.2, 0.4, 5.1);
        orbiter.motion.axis = Vec3::UnitY();
        orbiter.motion.angle_amplitude = 1.1 + jitter(0.1);
        orbiter.motion.translation_amplitude = Vec3(0, 0.35, 0);
        orbiter.motion.profile = MotionProfile::bump;
        scene.primitives.push_back(orbiter);
        Primitive pulser = static_sphere(Vec3(-0.25 + jitter(0.1), 1.15, 4.5), 0.5, 3);
        pulser.is_static = false;
        pulser.pulsation.amplitude = 0.18;
        pulser.pulsation.frequency = 1.5;
        pulser.motion.translation_amplitude = Vec3(0.8 + jitter(0.1), 0.35, 0.0);
        pulser.motion.profile = MotionProfile::bump;
        scene.primitives.push_back(pulser);
    } else {
        throw ConfigError("unknown scene preset '" + preset +
                          "' (expected static_room, rigid_orbit, pulsing_sphere, "
                          "two_body_occlusion or mixed)");
    }
    scene.validate();
    return scene;
}

// ---------------------------------------------------------------------------
// Bundle generation
// ---------------------------------------------------------------------------

inline GroundTruthBundle generate_bundle(const Scene& scene, int num_frames, int height, int width,
                                         std::uint64_t seed, int threads = 1,
                                         int max_correspondences = 10000) {
    if (num_frames < 2) throw ConfigError("generate_bundle needs at least two frames");
    scene.validate();

    GroundTruthBundle gt;
    gt.allocate(num_frames, height, width);
    for (int i = 0; i < num_frames; ++i)
        gt.cameras[static_cast<std::size_t>(i)] =
            scene.camera_path.at(gt.timestamps[static_cast<std::size_t>(i)], width, height);

    const std::size_t per_frame = gt.pixels_per_frame();
    const std::size_t n_pixels = static_cast<std::size_t>(num_frames) * per_frame;

    struct PixelHit {
        std::uint8_t hit = 0;
        std::int32_t primitive = -1;
        Vec3 material = Vec3::Zero();
    };
    std::vector<PixelHit> hits(n_pixels);

    // Pose cache: one pose per (primitive, frame).
    const std::size_t n_prims = scene.primitives.size();
    std::vector<PrimitivePose> poses(n_prims * static_cast<std::size_t>(num_frames));
    for (std::size_t p = 0; p < n_prims; ++p)
        for (int j = 0; j < num_frames; ++j)
            poses[p * static_cast<std::size_t>(num_frames) + static_cast<std::size_t>(j)] =
                primitive_pose(scene.primitives[p], gt.timestamps[static_cast<std::size_t>(j)]);

    // Primary casts: depth maps, masks, labels, material points.
    parallel_for_chunks(n_pixels, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<PrimitivePose> frame_poses(n_prims);
        int cached_frame = -1;
        for (std::size_t idx = begin; idx < end; ++idx) {
            const int i = static_cast<int>(idx / per_frame);
            const std::size_t rem = idx % per_frame;
            const int v = static_cast<int>(rem / static_cast<std::size_t>(width));
            const int u = static_cast<int>(rem % static_cast<std::size_t>(width));
            if (i != cached_frame) {
                for (std::size_t p = 0; p < n_prims; ++p)
                    frame_poses[p] =
                        poses[p * static_cast<std::size_t>(num_frames) + static_cast<std::size_t>(i)];
                cached_frame = i;
            }
            const RayHit hit =
                ray_cast_with_poses(scene, frame_poses, gt.cameras[static_cast<std::size_t>(i)],
                                    static_cast<double>(u), static_cast<double>(v));
            if (!hit.hit) continue;
            const Primitive& prim = scene.primitives[static_cast<std::size_t>(hit.primitive_index)];
            hits[idx].hit = 1;
            hits[idx].primitive = hit.primitive_index;
            hits[idx].material = hit.material_point;
            gt.depth[idx] = hit.depth;
            gt.static_mask[idx] = prim.is_static ? 1 : 0;
            gt.rigid_labels[idx] = prim.is_rigid() ? prim.segment_id : -1;
        }
    });

    // Cross-frame positions from the exact motion. Static primitives copy the
    // material point directly so X_{i->j} is bitwise constant over j.
    parallel_for_chunks(n_pixels, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            if (!hits[idx].hit) continue;
            const int i = static_cast<int>(idx / per_frame);
            const std::size_t rem = idx % per_frame;
            const int v = static_cast<int>(rem / static_cast<std::size_t>(width));
            const int u = static_cast<int>(rem % static_cast<std::size_t>(width));
            const Primitive& prim = scene.primitives[static_cast<std::size_t>(hits[idx].primitive)];
            for (int j = 0; j < num_frames; ++j) {
                Vec3 x;
                if (prim.is_static) {
                    x = hits[idx].material;
                } else {
                    const PrimitivePose& pose =
                        poses[static_cast<std::size_t>(hits[idx].primitive) *
                                  static_cast<std::size_t>(num_frames) +
                              static_cast<std::size_t>(j)];
                    x = material_to_world(prim, pose, hits[idx].material);
                }
                gt.set_position(i, j, u, v, x);
                gt.valid[gt.cross_index(i, j, u, v)] = 1;
            }
        }
    });

    const double scale = gt.scene_scale();
    const double depth_tol = 1e-4 * scale;

    // Visibility: project X_{i->j} into frame j and depth-test against frame
    // j's depth, sampled exactly along the projected ray (a fresh cast through
    // the continuous pixel; rounding to the pixel grid would drown the tight
    // tolerance in slanted-surface depth gradients).
    parallel_for_chunks(n_pixels, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<PrimitivePose> frame_poses(n_prims);
        for (std::size_t idx = begin; idx < end; ++idx) {
            if (!hits[idx].hit) continue;
            const int i = static_cast<int>(idx / per_frame);
            const std::size_t rem = idx % per_frame;
            const int v = static_cast<int>(rem / static_cast<std::size_t>(width));
            const int u = static_cast<int>(rem % static_cast<std::size_t>(width));
            for (int j = 0; j < num_frames; ++j) {
                const Camera& cam = gt.cameras[static_cast<std::size_t>(j)];
                const Vec3 x = gt.position(i, j, u, v);
                const Camera::Projection proj = cam.project(x);
                if (!proj.in_front) continue;
                // pixel footprints extend half a pixel beyond the grid
                if (!(proj.u > -0.5 && proj.u < static_cast<double>(width) - 0.5 &&
                      proj.v > -0.5 && proj.v < static_cast<double>(height) - 0.5))
                    continue;
                for (std::size_t p = 0; p < n_prims; ++p)
                    frame_poses[p] = poses[p * static_cast<std::size_t>(num_frames) +
                                           static_cast<std::size_t>(j)];
                const RayHit occ = ray_cast_with_poses(scene, frame_poses, cam, proj.u, proj.v);
                const double dist_to_x = (x - cam.center()).norm();
                if (occ.hit && (occ.world_point - cam.center()).norm() < dist_to_x - depth_tol)
                    continue;
                gt.visible[gt.cross_index(i, j, u, v)] = 1;
            }
        }
    });

    // Correspondences: sample source pixels, project their material point into
    // another frame and keep pairs whose landed pixel records the same
    // material point. The tolerance is tight so recorded pairs share their
    // trajectory to roundoff.
    if (max_correspondences > 0 && num_frames >= 2) {
        Rng rng(seed ^ 0xc2b2ae3d27d4eb4full);
        const double match_tol = 1e-9 * std::max(scale, 1e-12);
        std::unordered_set<std::uint64_t> seen;
        const int attempts = 16 * max_correspondences;
        for (int a = 0; a < attempts; ++a) {
            if (static_cast<int>(gt.correspondences.size()) >= max_correspondences) break;
            const int i = static_cast<int>(rng.index(static_cast<std::uint64_t>(num_frames)));
            int j = static_cast<int>(rng.index(static_cast<std::uint64_t>(num_frames - 1)));
            if (j >= i) ++j;
            const int u = static_cast<int>(rng.index(static_cast<std::uint64_t>(width)));
            const int v = static_cast<int>(rng.index(static_cast<std::uint64_t>(height)));
            const std::size_t src = gt.pixel_index(i, u, v);
            if (!hits[src].hit) continue;
            const Camera::Projection proj =
                gt.cameras[static_cast<std::size_t>(j)].project(gt.position(i, j, u, v));
            if (!proj.in_front) continue;
            const int ur = static_cast<int>(std::lround(proj.u));
            const int vr = static_cast<int>(std::lround(proj.v));
            if (ur < 0 || ur >= width || vr < 0 || vr >= height) continue;
            const std::size_t tgt = gt.pixel_index(j, ur, vr);
            if (!hits[tgt].hit || hits[tgt].primitive != hits[src].primitive) continue;
            if ((hits[tgt].material - hits[src].material).norm() > match_tol) continue;

            CorrespondencePair pair{i, u, v, j, ur, vr};
            if (pair.j < pair.i) {
                std::swap(pair.i, pair.j);
                std::swap(pair.u, pair.u2);
                std::swap(pair.v, pair.v2);
            }
            const std::uint64_t key = (static_cast<std::uint64_t>(pair.i) << 56) |
                                      (static_cast<std::uint64_t>(pair.j) << 48) |
                                      (static_cast<std::uint64_t>(pair.u) << 36) |
                                      (static_cast<std::uint64_t>(pair.v) << 24) |
                                      (static_cast<std::uint64_t>(pair.u2) << 12) |
                                      static_cast<std::uint64_t>(pair.v2);
            if (!seen.insert(key).second) continue;
            gt.correspondences.push_back(pair);
        }
    }

    return gt;
}

}  // namespace trajfield

#endif  // TRAJFIELD_SYNTH_HPP
