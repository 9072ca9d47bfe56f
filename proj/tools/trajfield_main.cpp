// trajfield: trajectory-field toolkit CLI.
//
// Subcommands: synth, fit, optimize, eval, derive, gradcheck, info.
// Results go to files / standard output, logs to standard error. Exit codes:
// 0 success, 1 input error, 2 numeric or optimization error. All randomness
// is seeded; reruns with the same arguments produce byte-identical outputs.

#include "trajfield/derive.hpp"
#include "trajfield/export.hpp"
#include "trajfield/fit.hpp"
#include "trajfield/loss.hpp"
#include "trajfield/metrics.hpp"
#include "trajfield/synth.hpp"
#include "trajfield/tfz.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace trajfield;

namespace {

int default_threads() {
    if (const char* env = std::getenv("TRAJFIELD_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

CurveSpec make_spec(const std::string& family, int control_points, int degree) {
    const CurveFamily fam = curve_family_from_string(family);
    switch (fam) {
        case CurveFamily::bspline: return CurveSpec::bspline(control_points, degree);
        case CurveFamily::bezier: return CurveSpec::bezier(control_points);
        case CurveFamily::polynomial: return CurveSpec::polynomial(control_points);
    }
    throw ConfigError("unreachable curve family");
}

LossWeights load_weights(const std::string& config_path) {
    LossWeights weights;
    if (config_path.empty()) return weights;
    const tfz::json j = tfz::read_json_file(config_path);
    if (j.contains("alpha")) weights.alpha = j.at("alpha").get<double>();
    if (j.contains("lambda_time")) weights.lambda_time = j.at("lambda_time").get<double>();
    if (j.contains("lambda_static")) weights.lambda_static = j.at("lambda_static").get<double>();
    if (j.contains("lambda_rigid")) weights.lambda_rigid = j.at("lambda_rigid").get<double>();
    if (j.contains("lambda_corr")) weights.lambda_corr = j.at("lambda_corr").get<double>();
    if (j.contains("rigid_pair_samples"))
        weights.rigid_pair_samples = j.at("rigid_pair_samples").get<int>();
    weights.validate();
    return weights;
}

std::vector<double> parse_csv_doubles(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

std::string format_value(double x) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", x);
    return buf;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string preset = "mixed";
    std::uint64_t seed = 0;
    int frames = 8;
    int size = 64;
    int width = 0, height = 0;
    int max_correspondences = 10000;
    int threads = default_threads();
    std::string out;
};

int run_synth(const SynthArgs& args) {
    const int w = args.width > 0 ? args.width : args.size;
    const int h = args.height > 0 ? args.height : args.size;
    const Scene scene = build_scene(args.preset, args.seed);
    const GroundTruthBundle gt =
        generate_bundle(scene, args.frames, h, w, args.seed, args.threads,
                        args.max_correspondences);
    tfz::Provenance prov;
    prov.seed = args.seed;
    prov.preset = args.preset;
    tfz::write_bundle(args.out, gt, prov);
    std::cerr << "[synth] preset=" << args.preset << " seed=" << args.seed << " frames="
              << args.frames << " size=" << w << "x" << h << " correspondences="
              << gt.correspondences.size() << " scene_scale=" << format_value(gt.scene_scale())
              << "\n";
    std::cout << "wrote bundle " << args.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
    std::string gt;
    std::string out;
    std::string family = "bspline";
    int control_points = 10;
    int degree = 3;
    double ridge = 1e-8;
    std::uint64_t seed = 0;
    int threads = default_threads();
};

int run_fit(const FitArgs& args) {
    const GroundTruthBundle gt = tfz::read_bundle(args.gt);
    const CurveSpec spec = make_spec(args.family, args.control_points, args.degree);
    const FieldFit fit = fit_field(gt, spec, args.ridge, args.threads);
    tfz::Provenance prov;
    prov.seed = args.seed;
    tfz::write_field(args.out, fit.field, prov);
    std::cerr << "[fit] pixels=" << fit.pixels_fit << " invalid=" << fit.pixels_invalid << "\n";
    std::cout << "residual_rms " << format_value(fit.residual_rms) << "\n";
    std::cout << "wrote field " << args.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

struct OptimizeArgs {
    std::string gt;
    std::string out;
    std::string history;
    std::string weights_config;
    std::string family = "bspline";
    std::string init = "centroid";
    int control_points = 10;
    int degree = 3;
    int iters = 500;
    double step = 1.0;
    double step_growth = 2.0;
    double alpha = -1.0;  // <0: keep config/default
    double lambda_time = -1.0, lambda_static = -1.0, lambda_rigid = -1.0, lambda_corr = -1.0;
    int rigid_pairs = -1;
    std::uint64_t seed = 0;
    int threads = default_threads();
};

int run_optimize(const OptimizeArgs& args) {
    const GroundTruthBundle gt = tfz::read_bundle(args.gt);
    const CurveSpec spec = make_spec(args.family, args.control_points, args.degree);

    LossWeights weights = load_weights(args.weights_config);
    if (args.alpha >= 0.0) weights.alpha = args.alpha;
    if (args.lambda_time >= 0.0) weights.lambda_time = args.lambda_time;
    if (args.lambda_static >= 0.0) weights.lambda_static = args.lambda_static;
    if (args.lambda_rigid >= 0.0) weights.lambda_rigid = args.lambda_rigid;
    if (args.lambda_corr >= 0.0) weights.lambda_corr = args.lambda_corr;
    if (args.rigid_pairs > 0) weights.rigid_pair_samples = args.rigid_pairs;
    weights.validate();

    OptimizeConfig config;
    config.iters = args.iters;
    config.step = args.step;
    config.step_growth = args.step_growth;
    config.init = field_init_from_string(args.init);
    config.seed = args.seed;
    config.threads = args.threads;

    const OptimizeResult result = optimize_field(gt, spec, weights, config);
    tfz::Provenance prov;
    prov.seed = args.seed;
    tfz::write_field(args.out, result.field, prov);

    if (!args.history.empty()) {
        tfz::json hist;
        hist["schema_version"] = 1;
        hist["role"] = "report";
        hist["kind"] = "loss_history";
        hist["accepted_steps"] = result.accepted_steps;
        hist["loss"] = result.loss_history;
        tfz::write_json_file(args.history, hist);
    }
    std::cerr << "[optimize] iters=" << args.iters << " accepted=" << result.accepted_steps
              << " final_step=" << format_value(result.final_step) << "\n";
    std::cout << "loss_initial " << format_value(result.loss_history.front()) << "\n";
    std::cout << "loss_final " << format_value(result.loss_history.back()) << "\n";
    std::cout << "wrote field " << args.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::string align = "none";
    std::string protocol = "video";
    int pair_gap = 5;
    std::string thresholds;  // CSV of scene_scale multiples
    std::string out;
    bool timings = false;
};

int run_eval(const EvalArgs& args) {
    BenchmarkOptions options;
    options.align = align_mode_from_string(args.align);
    options.protocol = protocol_from_string(args.protocol);
    options.pair_gap = args.pair_gap;
    options.include_timings = args.timings;
    if (!args.thresholds.empty()) options.threshold_multiples = parse_csv_doubles(args.thresholds);

    const MetricsReport report = benchmark_run(args.pred, args.gt, options);
    const tfz::json j = report_to_json(report);
    if (!args.out.empty()) tfz::write_json_file(args.out, j);

    // Display conventions: CA in 1e-2, SDD in 1e-3; storage stays raw.
    const tfz::json& agg = j.at("aggregate");
    auto print_if = [&](const char* key, const char* label, double display_scale) {
        if (!agg.contains(key)) return;
        std::cout << label << " " << format_value(agg.at(key).get<double>() * display_scale)
                  << "\n";
    };
    std::cout << "sequences " << report.sequences.size() << "\n";
    print_if("epe_mix", "epe_mix", 1.0);
    print_if("epe_sta", "epe_sta", 1.0);
    print_if("epe_dyn", "epe_dyn", 1.0);
    print_if("ca", "ca_x1e2", 1e2);
    print_if("sdd", "sdd_x1e3", 1e3);
    print_if("aj", "aj", 1.0);
    if (!args.out.empty()) std::cout << "wrote report " << args.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// derive
// ---------------------------------------------------------------------------

struct DeriveArgs {
    std::string field;
    std::string gt;  // optional: ground-truth cameras for projection
    std::string out = ".";
    bool mask = false;
    double threshold = -1.0;  // <0: 1e-4 * scene_scale^2 (needs --gt) or 1e-4
    bool flow = false;
    std::string project;  // "i,u,v"
    int samples = 16;
    double forecast_dt = -1.0;
    int frame = 0;
    int fuse_frame = -1;
    bool cameras = false;
    int threads = default_threads();
};

int run_derive(const DeriveArgs& args) {
    const TrajectoryField field = tfz::read_field(args.field);
    fs::create_directories(args.out);
    const fs::path out_dir(args.out);
    bool did_anything = false;

    GroundTruthBundle gt;
    if (!args.gt.empty()) gt = tfz::read_bundle(args.gt);

    if (args.mask) {
        double threshold = args.threshold;
        if (threshold <= 0.0) {
            if (!gt.empty()) {
                const double s = gt.scene_scale();
                threshold = 1e-4 * s * s;
            } else {
                threshold = 1e-4;
            }
        }
        const std::vector<std::uint8_t> mask = dynamic_mask(field, threshold);
        for (int i = 0; i < field.num_frames(); ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "mask_%03d.pgm", i);
            const std::size_t offset = static_cast<std::size_t>(i) * field.pixels_per_frame();
            write_pgm_mask(out_dir / name,
                           std::span<const std::uint8_t>(mask.data() + offset,
                                                         field.pixels_per_frame()),
                           field.width(), field.height());
        }
        std::cout << "wrote masks (threshold " << format_value(threshold) << ") to " << args.out
                  << "\n";
        did_anything = true;
    }

    if (args.flow) {
        std::vector<float> flow_data;
        flow_data.reserve(static_cast<std::size_t>(field.num_frames()) *
                          field.pixels_per_frame() * 3);
        for (int i = 0; i < field.num_frames(); ++i)
            for (const Vec3& f : scene_flow(field, i)) {
                flow_data.push_back(static_cast<float>(f.x()));
                flow_data.push_back(static_cast<float>(f.y()));
                flow_data.push_back(static_cast<float>(f.z()));
            }
        const std::uint32_t shape[] = {static_cast<std::uint32_t>(field.num_frames()),
                                       static_cast<std::uint32_t>(field.height()),
                                       static_cast<std::uint32_t>(field.width()), 3};
        tfz::write_tensor(out_dir / "scene_flow.tfz", flow_data, shape);
        std::cout << "wrote scene_flow.tfz\n";
        did_anything = true;
    }

    if (!args.project.empty()) {
        const std::vector<double> coords = parse_csv_doubles(args.project);
        if (coords.size() != 3) throw ConfigError("--project expects 'frame,u,v'");
        std::vector<Camera> cams;
        if (!gt.empty()) {
            cams = gt.cameras;
        } else {
            for (const CameraEstimate& est : estimate_cameras(field, args.threads)) {
                if (!est.ok)
                    throw EstimationError("camera estimation failed: " + est.message +
                                          " (pass --gt for ground-truth cameras)");
                cams.push_back(est.camera);
            }
        }
        const auto traj =
            project_2d(field, cams, static_cast<int>(coords[0]), static_cast<int>(coords[1]),
                       static_cast<int>(coords[2]), args.samples);
        tfz::json j;
        j["schema_version"] = 1;
        j["role"] = "report";
        j["kind"] = "trajectory_2d";
        j["pixel"] = {{"frame", static_cast<int>(coords[0])},
                      {"u", static_cast<int>(coords[1])},
                      {"v", static_cast<int>(coords[2])}};
        tfz::json pts = tfz::json::array();
        for (const Projected2D& p : traj)
            pts.push_back({{"t", p.t}, {"u", p.u}, {"v", p.v}, {"in_front", p.in_front}});
        j["points"] = pts;
        tfz::write_json_file(out_dir / "trajectory_2d.json", j);
        std::cout << "wrote trajectory_2d.json\n";
        did_anything = true;
    }

    if (args.forecast_dt >= 0.0) {
        std::vector<FusedPoint> cloud;
        for (int v = 0; v < field.height(); ++v)
            for (int u = 0; u < field.width(); ++u) {
                if (!field.pixel_valid(args.frame, u, v)) continue;
                cloud.push_back({forecast(field, args.frame, u, v, args.forecast_dt), args.frame,
                                 u, v});
            }
        write_ply(out_dir / "forecast.ply", cloud);
        std::cout << "wrote forecast.ply (" << cloud.size() << " points)\n";
        did_anything = true;
    }

    if (args.fuse_frame >= 0) {
        std::vector<int> sources(static_cast<std::size_t>(field.num_frames()));
        for (int i = 0; i < field.num_frames(); ++i) sources[static_cast<std::size_t>(i)] = i;
        const auto cloud = fuse_canonical(field, args.fuse_frame, sources);
        write_ply(out_dir / "fused.ply", cloud);
        std::cout << "wrote fused.ply (" << cloud.size() << " points)\n";
        did_anything = true;
    }

    if (args.cameras) {
        const auto estimates = estimate_cameras(field, args.threads);
        tfz::json j;
        j["schema_version"] = 1;
        j["role"] = "report";
        j["kind"] = "cameras";
        tfz::json list = tfz::json::array();
        for (std::size_t i = 0; i < estimates.size(); ++i) {
            const CameraEstimate& est = estimates[i];
            tfz::json e;
            e["frame"] = i;
            e["ok"] = est.ok;
            if (est.ok) {
                e["focal"] = est.camera.focal;
                e["cx"] = est.camera.cx;
                e["cy"] = est.camera.cy;
                e["rotation_wxyz"] = {est.camera.rotation.w(), est.camera.rotation.x(),
                                      est.camera.rotation.y(), est.camera.rotation.z()};
                e["translation"] = {est.camera.translation.x(), est.camera.translation.y(),
                                    est.camera.translation.z()};
                e["median_reproj_px"] = est.median_reproj_px;
            } else {
                e["message"] = est.message;
            }
            list.push_back(e);
        }
        j["cameras"] = list;
        tfz::write_json_file(out_dir / "cameras.json", j);
        std::cout << "wrote cameras.json\n";
        did_anything = true;
    }

    if (!did_anything)
        throw ConfigError(
            "derive: nothing to do (pass --mask, --flow, --project, --forecast, --fuse or "
            "--cameras)");
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckArgs {
    std::uint64_t seed = 0;
    int trials = 150;
    double eps = 1e-4;
    double tolerance = 1e-5;
    int frames = 3;
    int size = 8;
    int control_points = 0;  // 0 = run 4, 7 and 10
};

int run_gradcheck(const GradcheckArgs& args) {
    std::vector<int> sizes;
    if (args.control_points > 0) {
        sizes.push_back(args.control_points);
    } else {
        sizes = {4, 7, 10};
    }

    double worst = 0.0;
    for (int d : sizes) {
        TrajectoryField field(args.frames, args.size, args.size, CurveSpec::bspline(d));
        GroundTruthBundle gt;
        gt.allocate(args.frames, args.size, args.size);
        Rng rng(args.seed * 1000003ull + static_cast<std::uint64_t>(d));
        for (double& x : field.control_data()) x = rng.uniform(-1, 1);
        for (double& c : field.confidence_data()) c = rng.uniform(0.5, 2.0);
        for (int i = 0; i < args.frames; ++i)
            for (int j = 0; j < args.frames; ++j)
                for (int v = 0; v < args.size; ++v)
                    for (int u = 0; u < args.size; ++u) {
                        gt.set_position(i, j, u, v,
                                        Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                             rng.uniform(-1, 1)));
                        gt.valid[gt.cross_index(i, j, u, v)] = rng.uniform01() < 0.9 ? 1 : 0;
                    }
        for (int i = 0; i < args.frames; ++i)
            for (int v = 0; v < args.size; ++v)
                for (int u = 0; u < args.size; ++u) {
                    gt.static_mask[gt.pixel_index(i, u, v)] = rng.uniform01() < 0.4 ? 1 : 0;
                    gt.rigid_labels[gt.pixel_index(i, u, v)] =
                        rng.uniform01() < 0.7 ? static_cast<std::int32_t>(rng.index(2)) : -1;
                }
        for (int c = 0; c < 10; ++c)
            gt.correspondences.push_back(
                {static_cast<int>(rng.index(static_cast<std::uint64_t>(args.frames))),
                 static_cast<int>(rng.index(static_cast<std::uint64_t>(args.size))),
                 static_cast<int>(rng.index(static_cast<std::uint64_t>(args.size))),
                 static_cast<int>(rng.index(static_cast<std::uint64_t>(args.frames))),
                 static_cast<int>(rng.index(static_cast<std::uint64_t>(args.size))),
                 static_cast<int>(rng.index(static_cast<std::uint64_t>(args.size)))});

        LossWeights weights;
        const GradCheckReport report =
            grad_check(field, gt, weights, args.eps, args.trials, args.seed);
        std::cout << "D=" << d << " max_rel_error " << format_value(report.max_rel_error) << "\n";
        worst = std::max(worst, report.max_rel_error);
    }
    std::cout << "max_rel_error " << format_value(worst) << "\n";
    if (worst > args.tolerance)
        throw NumericDomainError("gradient check failed: max relative error " +
                                 format_value(worst) + " exceeds " +
                                 format_value(args.tolerance));
    return 0;
}

// ---------------------------------------------------------------------------
// info
// ---------------------------------------------------------------------------

int run_info(const std::string& path) {
    const tfz::json manifest = tfz::read_manifest(path);
    const std::string role = manifest.value("role", "?");
    std::cout << "role " << role << "\n";
    std::cout << "schema_version " << manifest.at("schema_version").get<int>() << "\n";
    if (manifest.contains("provenance")) {
        const tfz::json& prov = manifest.at("provenance");
        std::cout << "tool_version " << prov.value("tool_version", "?") << "\n";
        std::cout << "seed " << prov.value("seed", 0ull) << "\n";
        if (!prov.value("preset", std::string()).empty())
            std::cout << "preset " << prov.at("preset").get<std::string>() << "\n";
    }
    if (manifest.contains("curve")) {
        const tfz::json& curve = manifest.at("curve");
        std::cout << "curve " << curve.at("family").get<std::string>() << " degree "
                  << curve.at("degree").get<int>() << " control_points "
                  << curve.at("num_control_points").get<int>() << "\n";
    }
    if (manifest.contains("timestamps"))
        std::cout << "frames " << manifest.at("timestamps").size() << "\n";
    if (manifest.contains("tensors")) {
        for (const tfz::json& t : manifest.at("tensors")) {
            std::cout << "tensor " << t.at("name").get<std::string>() << " shape [";
            const auto shape = t.at("shape").get<std::vector<std::uint32_t>>();
            for (std::size_t k = 0; k < shape.size(); ++k)
                std::cout << (k ? "," : "") << shape[k];
            std::cout << "] " << t.at("file").get<std::string>() << "\n";
        }
    }
    if (manifest.contains("aggregate")) {
        for (const auto& [key, value] : manifest.at("aggregate").items())
            std::cout << key << " " << format_value(value.get<double>()) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trajfield: spline trajectory-field toolkit"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic ground-truth bundle");
    synth->add_option("--preset", synth_args.preset,
                      "static_room, rigid_orbit, pulsing_sphere, two_body_occlusion or mixed");
    synth->add_option("--seed", synth_args.seed, "random seed");
    synth->add_option("--frames", synth_args.frames, "number of frames")->check(CLI::Range(2, 100000));
    synth->add_option("--size", synth_args.size, "square image size in pixels");
    synth->add_option("--width", synth_args.width, "image width (overrides --size)");
    synth->add_option("--height", synth_args.height, "image height (overrides --size)");
    synth->add_option("--max-correspondences", synth_args.max_correspondences,
                      "cap on recorded correspondence pairs");
    synth->add_option("--threads", synth_args.threads, "worker threads");
    synth->add_option("--out", synth_args.out, "output bundle directory")->required();

    FitArgs fit_args;
    CLI::App* fit = app.add_subcommand("fit", "least-squares fit of a field to ground truth");
    fit->add_option("--gt", fit_args.gt, "ground-truth bundle directory")->required();
    fit->add_option("--out", fit_args.out, "output field directory")->required();
    fit->add_option("--control-points", fit_args.control_points, "control points per trajectory");
    fit->add_option("--family", fit_args.family, "bspline, bezier or polynomial");
    fit->add_option("--degree", fit_args.degree, "spline degree (bspline only)");
    fit->add_option("--ridge", fit_args.ridge, "ridge toward the sample centroid");
    fit->add_option("--seed", fit_args.seed, "seed recorded in provenance");
    fit->add_option("--threads", fit_args.threads, "worker threads");

    OptimizeArgs opt_args;
    CLI::App* optimize =
        app.add_subcommand("optimize", "gradient-descent fit of a field to ground truth");
    optimize->add_option("--gt", opt_args.gt, "ground-truth bundle directory")->required();
    optimize->add_option("--out", opt_args.out, "output field directory")->required();
    optimize->add_option("--control-points", opt_args.control_points, "control points");
    optimize->add_option("--family", opt_args.family, "curve family");
    optimize->add_option("--degree", opt_args.degree, "spline degree (bspline only)");
    optimize->add_option("--iters", opt_args.iters, "gradient-descent iterations");
    optimize->add_option("--step", opt_args.step, "initial step size");
    optimize->add_option("--step-growth", opt_args.step_growth, "step growth on acceptance");
    optimize->add_option("--init", opt_args.init, "centroid, gt_first_frame or random");
    optimize->add_option("--weights", opt_args.weights_config, "loss weights JSON file");
    optimize->add_option("--alpha", opt_args.alpha, "confidence trade-off");
    optimize->add_option("--lambda-time", opt_args.lambda_time, "timestamp loss weight");
    optimize->add_option("--lambda-static", opt_args.lambda_static, "static regularizer weight");
    optimize->add_option("--lambda-rigid", opt_args.lambda_rigid, "rigidity regularizer weight");
    optimize->add_option("--lambda-corr", opt_args.lambda_corr, "correspondence weight");
    optimize->add_option("--rigid-pairs", opt_args.rigid_pairs, "sampled pairs per segment");
    optimize->add_option("--history", opt_args.history, "write the loss history JSON here");
    optimize->add_option("--seed", opt_args.seed, "random seed");
    optimize->add_option("--threads", opt_args.threads, "worker threads");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a field against ground truth");
    eval->add_option("--pred", eval_args.pred, "field container (or directory of them)")
        ->required();
    eval->add_option("--gt", eval_args.gt, "bundle container (or directory of them)")->required();
    eval->add_option("--align", eval_args.align, "none or sim3");
    eval->add_option("--protocol", eval_args.protocol, "video or pair");
    eval->add_option("--pair-gap", eval_args.pair_gap, "frame gap for the pair protocol");
    eval->add_option("--thresholds", eval_args.thresholds,
                     "CSV of APD thresholds as scene-scale multiples");
    eval->add_option("--out", eval_args.out, "write the report JSON here");
    eval->add_flag("--timings", eval_args.timings,
                   "include wall-clock timings in the report (breaks rerun byte-identity)");

    DeriveArgs derive_args;
    CLI::App* derive = app.add_subcommand("derive", "derive products from a field");
    derive->add_option("--field", derive_args.field, "field container")->required();
    derive->add_option("--gt", derive_args.gt, "bundle for cameras / scale (optional)");
    derive->add_option("--out", derive_args.out, "output directory");
    derive->add_flag("--mask", derive_args.mask, "dynamic masks as PGM");
    derive->add_option("--threshold", derive_args.threshold, "dynamic-mask variance threshold");
    derive->add_flag("--flow", derive_args.flow, "scene flow tensor");
    derive->add_option("--project", derive_args.project, "project pixel 'frame,u,v' to 2D");
    derive->add_option("--samples", derive_args.samples, "2D trajectory sample count");
    derive->add_option("--forecast", derive_args.forecast_dt, "tangent forecast horizon dt");
    derive->add_option("--frame", derive_args.frame, "source frame for --forecast");
    derive->add_option("--fuse", derive_args.fuse_frame, "fuse all frames into this frame");
    derive->add_flag("--cameras", derive_args.cameras, "estimate per-frame cameras");
    derive->add_option("--threads", derive_args.threads, "worker threads");

    GradcheckArgs grad_args;
    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference check of the loss gradients");
    gradcheck->add_option("--seed", grad_args.seed, "random seed");
    gradcheck->add_option("--trials", grad_args.trials, "random coordinates to probe");
    gradcheck->add_option("--eps", grad_args.eps, "finite-difference step");
    gradcheck->add_option("--tolerance", grad_args.tolerance, "max allowed relative error");
    gradcheck->add_option("--frames", grad_args.frames, "test field frames");
    gradcheck->add_option("--size", grad_args.size, "test field size");
    gradcheck->add_option("--control-points", grad_args.control_points,
                          "test one control-point count (default: 4, 7 and 10)");

    std::string info_path;
    CLI::App* info = app.add_subcommand("info", "print a container manifest summary");
    info->add_option("path", info_path, "container directory or manifest/report path")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (synth->parsed()) return run_synth(synth_args);
        if (fit->parsed()) return run_fit(fit_args);
        if (optimize->parsed()) return run_optimize(opt_args);
        if (eval->parsed()) return run_eval(eval_args);
        if (derive->parsed()) return run_derive(derive_args);
        if (gradcheck->parsed()) return run_gradcheck(grad_args);
        if (info->parsed()) return run_info(info_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::input ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
