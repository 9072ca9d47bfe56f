#include "trajfield/metrics.hpp"

#include "trajfield/fit.hpp"
#include "trajfield/synth.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace trajfield;
namespace fs = std::filesystem;

namespace {

// Perfect field + bundle pair: the bundle's positions are the field's own
// evaluations, so the field reproduces the ground truth bitwise.
struct PerfectPair {
    TrajectoryField field;
    GroundTruthBundle gt;
};

PerfectPair perfect_pair(int n, int h, int w, int d, std::uint64_t seed) {
    PerfectPair pp{TrajectoryField(n, h, w, CurveSpec::bspline(d)), GroundTruthBundle{}};
    pp.gt.allocate(n, h, w);
    Rng rng(seed);
    for (double& x : pp.field.control_data()) x = rng.uniform(-2, 2);
    for (int i = 0; i < n; ++i)
        for (int v = 0; v < h; ++v)
            for (int u = 0; u < w; ++u) {
                pp.gt.static_mask[pp.gt.pixel_index(i, u, v)] = rng.uniform01() < 0.5 ? 1 : 0;
                for (int j = 0; j < n; ++j) {
                    pp.gt.set_position(
                        i, j, u, v,
                        pp.field.query_trajectory(i, u, v,
                                                  pp.gt.timestamps[static_cast<std::size_t>(j)]));
                    pp.gt.valid[pp.gt.cross_index(i, j, u, v)] = 1;
                }
            }
    return pp;
}

void shift_field(TrajectoryField& field, const Vec3& d) {
    for (std::size_t x = 0; x < field.control_data().size(); x += 3) {
        field.control_data()[x] += d.x();
        field.control_data()[x + 1] += d.y();
        field.control_data()[x + 2] += d.z();
    }
}

void sim3_field(TrajectoryField& field, const Sim3& t) {
    // valid for partition-of-unity families: transforming the control points
    // transforms the curve
    for (std::size_t x = 0; x < field.control_data().size(); x += 3) {
        const Vec3 p(field.control_data()[x], field.control_data()[x + 1],
                     field.control_data()[x + 2]);
        const Vec3 q = t.apply(p);
        field.control_data()[x] = q.x();
        field.control_data()[x + 1] = q.y();
        field.control_data()[x + 2] = q.z();
    }
}

void rigid_bundle(GroundTruthBundle& gt, const Quat& r, const Vec3& d) {
    for (std::size_t x = 0; x < gt.positions.size(); x += 3) {
        const Vec3 p(gt.positions[x], gt.positions[x + 1], gt.positions[x + 2]);
        const Vec3 q = r * p + d;
        gt.positions[x] = q.x();
        gt.positions[x + 1] = q.y();
        gt.positions[x + 2] = q.z();
    }
}

}  // namespace

TEST_CASE("sim3_align identity and frozen similarity example") {
    Rng rng(4);
    std::vector<Vec3> gt_pts;
    for (int k = 0; k < 40; ++k)
        gt_pts.push_back(Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)));

    const Sim3 id = sim3_align(gt_pts, gt_pts);
    CHECK(id.scale == Catch::Approx(1.0).margin(1e-12));
    CHECK(quaternion_angle_deg(id.rotation, Quat::Identity()) <= 1e-8);
    CHECK(id.translation.norm() <= 1e-12);

    // pred = 2 gt + (1,0,0): the transform mapping pred onto gt has
    // s = 0.5, R = I, T = (-0.5, 0, 0)
    std::vector<Vec3> pred;
    for (const Vec3& g : gt_pts) pred.push_back(2.0 * g + Vec3(1, 0, 0));
    const Sim3 t = sim3_align(pred, gt_pts);
    CHECK(t.scale == Catch::Approx(0.5).margin(1e-12));
    CHECK(quaternion_angle_deg(t.rotation, Quat::Identity()) <= 1e-8);
    CHECK((t.translation - Vec3(-0.5, 0, 0)).norm() <= 1e-12);

    // collinear points are degenerate
    std::vector<Vec3> line, line_gt;
    for (int k = 0; k < 10; ++k) {
        line.push_back(Vec3(k, 0, 0));
        line_gt.push_back(Vec3(k, 1, 0));
    }
    CHECK_THROWS_AS(sim3_align(line, line_gt), AlignmentError);
    CHECK_THROWS_AS(sim3_align(std::vector<Vec3>(2, Vec3::Zero()),
                               std::vector<Vec3>(2, Vec3::Zero())),
                    AlignmentError);
}

TEST_CASE("epe on perfect and uniformly offset fields") {
    PerfectPair pp = perfect_pair(4, 6, 6, 4, 21);
    const EpeResult perfect = epe(pp.field, pp.gt);
    CHECK(perfect.mix == 0.0);
    CHECK(perfect.sta == 0.0);
    CHECK(perfect.dyn == 0.0);

    TrajectoryField offset = pp.field;
    shift_field(offset, Vec3(0.1, 0, 0));
    const EpeResult shifted = epe(offset, pp.gt, AlignMode::none);
    CHECK(shifted.mix == Catch::Approx(0.1).margin(1e-12));
    CHECK(shifted.sta == Catch::Approx(0.1).margin(1e-12));
    CHECK(shifted.dyn == Catch::Approx(0.1).margin(1e-12));

    Sim3 used;
    const EpeResult aligned = epe(offset, pp.gt, AlignMode::sim3, &used);
    CHECK(aligned.mix <= 1e-9);
    CHECK((used.translation - Vec3(-0.1, 0, 0)).norm() <= 1e-9);
}

TEST_CASE("epe invariances under rigid and similarity transforms") {
    PerfectPair pp = perfect_pair(3, 8, 8, 7, 33);
    TrajectoryField noisy = pp.field;
    Rng rng(5);
    for (double& x : noisy.control_data()) x += rng.uniform(-0.05, 0.05);

    const EpeResult base = epe(noisy, pp.gt);

    // joint rigid transform of predictions and ground truth
    const Quat r(Eigen::AngleAxisd(0.8, Vec3(0.2, 1, -0.5).normalized()));
    const Vec3 d(3, -1, 2);
    TrajectoryField moved_field = noisy;
    Sim3 rigid;
    rigid.rotation = r;
    rigid.translation = d;
    sim3_field(moved_field, rigid);
    GroundTruthBundle moved_gt = pp.gt;
    rigid_bundle(moved_gt, r, d);
    const EpeResult joint = epe(moved_field, moved_gt);
    CHECK(std::abs(joint.mix - base.mix) <= 1e-9);
    CHECK(std::abs(joint.sta - base.sta) <= 1e-9);
    CHECK(std::abs(joint.dyn - base.dyn) <= 1e-9);

    // prediction-only similarity, absorbed by sim3 alignment
    const EpeResult aligned_base = epe(noisy, pp.gt, AlignMode::sim3);
    Sim3 distort;
    distort.scale = 1.7;
    distort.rotation = Quat(Eigen::AngleAxisd(-0.4, Vec3(1, 0.3, 0).normalized()));
    distort.translation = Vec3(-2, 0.5, 4);
    TrajectoryField distorted = noisy;
    sim3_field(distorted, distort);
    const EpeResult aligned = epe(distorted, pp.gt, AlignMode::sim3);
    CHECK(std::abs(aligned.mix - aligned_base.mix) <= 1e-9);
}

TEST_CASE("epe respects the pair protocol gap") {
    PerfectPair pp = perfect_pair(6, 4, 4, 4, 9);
    const EpeResult all = epe(pp.field, pp.gt);
    CHECK(all.n_mix == 6 * 6 * 16);
    const EpeResult gapped = epe(pp.field, pp.gt, AlignMode::none, nullptr, 5);
    CHECK(gapped.n_mix == 1 * 16);  // only (0, 5) for N = 6
    CHECK_THROWS_AS(epe(pp.field, pp.gt, AlignMode::none, nullptr, 7), MetricError);
}

TEST_CASE("sdd: degenerate zero, two-point oscillation, error on empty mask") {
    TrajectoryField field(2, 1, 1, CurveSpec::bspline(4));
    std::vector<std::uint8_t> mask(2, 1);
    // degenerate trajectory: all control points identical
    for (int k = 0; k < 4; ++k) field.set_control_point(0, k, 0, 0, Vec3(1, 1, 1));
    for (int k = 0; k < 4; ++k) field.set_control_point(1, k, 0, 0, Vec3(1, 1, 1));
    CHECK(sdd(field, mask) == 0.0);

    // single static pixel oscillating +-(0.001,0,0) between the two frames
    std::vector<std::uint8_t> one(2, 0);
    one[0] = 1;
    field.set_control_point(0, 0, 0, 0, Vec3(0.001, 0, 0));
    field.set_control_point(0, 1, 0, 0, Vec3(0.001, 0, 0));
    field.set_control_point(0, 2, 0, 0, Vec3(-0.001, 0, 0));
    field.set_control_point(0, 3, 0, 0, Vec3(-0.001, 0, 0));
    CHECK(sdd(field, one) == Catch::Approx(0.001).margin(1e-15));

    std::vector<std::uint8_t> empty(2, 0);
    CHECK_THROWS_AS(sdd(field, empty), MetricError);
}

TEST_CASE("sdd of an oracle fit on a static scene is tiny") {
    const Scene scene = build_scene("static_room", 4);
    const GroundTruthBundle gt = generate_bundle(scene, 6, 24, 24, 4);
    const FieldFit fit = fit_field(gt, CurveSpec::bspline(10), 1e-8);
    CHECK(sdd(fit.field, gt.static_mask) <= 1e-6);
}

TEST_CASE("ca: identical and offset trajectories, empty-set error") {
    const int n = 2, h = 1, w = 2, d = 4;
    TrajectoryField field(n, h, w, CurveSpec::bspline(d));
    GroundTruthBundle gt;
    gt.allocate(n, h, w);
    gt.correspondences.push_back({0, 0, 0, 1, 1, 0});

    Rng rng(2);
    for (int k = 0; k < d; ++k) {
        const Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        field.set_control_point(0, k, 0, 0, p);
        field.set_control_point(1, k, 1, 0, p);
    }
    CHECK(ca(field, gt, false) == 0.0);

    const Vec3 offset(0.3, 0.4, 0);
    for (int k = 0; k < d; ++k)
        field.set_control_point(1, k, 1, 0, field.control_point(0, k, 0, 0) + offset);
    CHECK(ca(field, gt, false) == Catch::Approx(0.5).margin(1e-12));

    // both pixels static and dynamic_only set -> empty set
    gt.static_mask[gt.pixel_index(0, 0, 0)] = 1;
    gt.static_mask[gt.pixel_index(1, 1, 0)] = 1;
    CHECK_THROWS_AS(ca(field, gt, true), MetricError);
}

TEST_CASE("ca of an oracle fit stays within twice the fit residual") {
    const Scene scene = build_scene("mixed", 6);
    const GroundTruthBundle gt = generate_bundle(scene, 8, 32, 32, 6);
    const FieldFit fit = fit_field(gt, CurveSpec::bspline(10), 1e-8);
    REQUIRE(fit.residual_rms > 0.0);
    const double value = ca(fit.field, gt, true);
    CHECK(value <= 2.0 * fit.residual_rms);
}

TEST_CASE("apd_aj: perfect field on an unoccluded scene scores 1") {
    // A fronto-parallel wall: every pixel sees geometry, nothing occludes,
    // and the depth varies gently so the rounded-pixel self-depth test in the
    // predicted-visibility rule is well conditioned.
    Scene scene;
    Primitive wall;
    wall.kind = ShapeKind::plane;
    wall.plane_point = Vec3(0, 0, 8);
    wall.plane_normal = -Vec3::UnitZ();
    scene.primitives.push_back(wall);
    scene.camera_path.base_position = Vec3(0, 1.0, -0.5);
    scene.camera_path.sweep_amplitude = Vec3(0.02, 0.01, 0.0);
    scene.camera_path.profile = MotionProfile::bump;
    scene.camera_path.target = Vec3(0, 1, 8);
    scene.validate();

    const GroundTruthBundle gt = generate_bundle(scene, 4, 24, 24, 0);
    const FieldFit fit = fit_field(gt, CurveSpec::bspline(4), 1e-8);
    const ApdAjResult res = apd_aj(fit.field, gt);
    REQUIRE(res.apd.size() == 5);
    for (const auto& [thr, frac] : res.apd) CHECK(frac == 1.0);
    CHECK(res.aj == 1.0);
}

TEST_CASE("apd_aj: uniform error lands between thresholds") {
    const Scene scene = build_scene("static_room", 2);
    const GroundTruthBundle gt = generate_bundle(scene, 4, 24, 24, 2);
    const FieldFit fit = fit_field(gt, CurveSpec::bspline(4), 1e-8);
    const double scale = gt.scene_scale();

    TrajectoryField offset = fit.field;
    shift_field(offset, Vec3(0.3 * scale, 0, 0));
    const ApdAjResult res = apd_aj(offset, gt);
    REQUIRE(res.apd.size() == 5);
    CHECK(res.apd[0].second == 0.0);
    CHECK(res.apd[1].second == 0.0);
    CHECK(res.apd[2].second == 0.0);
    CHECK(res.apd[3].second == 1.0);
    CHECK(res.apd[4].second == 1.0);

    // APD fractions never decrease as the threshold grows; AJ <= min APD
    const ApdAjResult sane = apd_aj(fit.field, gt);
    double prev = 0.0;
    double min_apd = 1.0;
    for (const auto& [thr, frac] : sane.apd) {
        CHECK(frac >= prev);
        prev = frac;
        min_apd = std::min(min_apd, frac);
    }
    CHECK(sane.aj <= min_apd + 1e-12);

    // an empty visible set is a metric error
    GroundTruthBundle blind = gt;
    std::fill(blind.visible.begin(), blind.visible.end(), 0);
    CHECK_THROWS_AS(apd_aj(fit.field, blind), MetricError);
}

TEST_CASE("benchmark_run aggregates sequences and is byte-deterministic") {
    const fs::path root = fs::temp_directory_path() / "trajfield_bench";
    fs::remove_all(root);
    fs::create_directories(root / "gt");
    fs::create_directories(root / "pred");

    for (const std::string name : {"seq_a", "seq_b"}) {
        const std::uint64_t seed = name == "seq_a" ? 1 : 2;
        const Scene scene = build_scene(name == "seq_a" ? "mixed" : "rigid_orbit", seed);
        const GroundTruthBundle gt = generate_bundle(scene, 6, 24, 24, seed);
        tfz::Provenance prov;
        prov.seed = seed;
        prov.preset = "test";
        tfz::write_bundle(root / "gt" / name, gt, prov);
        const FieldFit fit = fit_field(gt, CurveSpec::bspline(10), 1e-8);
        tfz::write_field(root / "pred" / name, fit.field, prov);
    }

    BenchmarkOptions options;
    const MetricsReport report = benchmark_run(root / "pred", root / "gt", options);
    REQUIRE(report.sequences.size() == 2);
    CHECK(report.sequences[0].name == "seq_a");
    CHECK(report.sequences[1].name == "seq_b");
    for (const SequenceMetrics& s : report.sequences) {
        CHECK(s.has_epe);
        CHECK(s.has_sdd);
        CHECK(s.epe.mix <= 1e-3 * s.scene_scale);
        CHECK(s.sdd <= 1e-6);
    }
    CHECK(report.sequences[0].has_ca);  // mixed preset has dynamic pairs

    const std::string a = tfz::dump_json(report_to_json(report));
    const MetricsReport again = benchmark_run(root / "pred", root / "gt", options);
    const std::string b = tfz::dump_json(report_to_json(again));
    CHECK(a == b);

    // pair protocol restricts the evaluation tuples
    BenchmarkOptions pair_options;
    pair_options.protocol = Protocol::pair;
    pair_options.pair_gap = 5;
    const MetricsReport pair_report = benchmark_run(root / "pred", root / "gt", pair_options);
    REQUIRE(pair_report.sequences.size() == 2);
    CHECK(pair_report.sequences[0].epe.n_mix < report.sequences[0].epe.n_mix);

    CHECK_THROWS_AS(benchmark_run(root / "pred", root / "nope", BenchmarkOptions{}), InputError);
}
