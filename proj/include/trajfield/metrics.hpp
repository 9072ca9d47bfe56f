#ifndef TRAJFIELD_METRICS_HPP
#define TRAJFIELD_METRICS_HPP

#include "trajfield/bundle.hpp"
#include "trajfield/field.hpp"
#include "trajfield/tfz.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace trajfield {

// Benchmark protocol: all-to-all end-point errors (mix / static / dynamic),
// Static Degeneracy Deviation, Correspondence Agreement, simplified APD/AJ
// tracking scores, optional Sim(3) pre-alignment, machine-readable reports.

// ---------------------------------------------------------------------------
// Sim(3) alignment (closed form, least squares over point pairs)
// ---------------------------------------------------------------------------

struct Sim3 {
    double scale = 1.0;
    Quat rotation = Quat::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
};

// Transform mapping `pred` onto `gt`: argmin sum ||s R p + T - g||^2.
inline Sim3 sim3_align(std::span<const Vec3> pred, std::span<const Vec3> gt) {
    if (pred.size() != gt.size()) throw ShapeError("sim3_align: point lists differ in length");
    const std::size_t n = pred.size();
    if (n < 3) throw AlignmentError("sim3_align needs at least 3 point pairs");

    Vec3 mu_p = Vec3::Zero(), mu_g = Vec3::Zero();
    for (std::size_t k = 0; k < n; ++k) {
        mu_p += pred[k];
        mu_g += gt[k];
    }
    mu_p /= static_cast<double>(n);
    mu_g /= static_cast<double>(n);

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    double var_p = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const Vec3 dp = pred[k] - mu_p;
        const Vec3 dg = gt[k] - mu_g;
        cov += dg * dp.transpose();
        var_p += dp.squaredNorm();
    }
    cov /= static_cast<double>(n);
    var_p /= static_cast<double>(n);
    if (!(var_p > 0.0)) throw AlignmentError("sim3_align: source points are all identical");

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 d = svd.singularValues();
    if (d(1) <= 1e-12 * std::max(d(0), 1e-300))
        throw AlignmentError("sim3_align: degenerate (collinear) point configuration");

    Eigen::Matrix3d s_fix = Eigen::Matrix3d::Identity();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s_fix(2, 2) = -1.0;

    Sim3 out;
    const Eigen::Matrix3d r = svd.matrixU() * s_fix * svd.matrixV().transpose();
    out.rotation = Quat(r);
    out.rotation.normalize();
    out.scale = (d.asDiagonal() * s_fix).trace() / var_p;
    if (!(out.scale > 0.0)) throw AlignmentError("sim3_align: non-positive scale");
    out.translation = mu_g - out.scale * (r * mu_p);
    return out;
}

enum class AlignMode { none, sim3 };

inline AlignMode align_mode_from_string(const std::string& s) {
    if (s == "none") return AlignMode::none;
    if (s == "sim3") return AlignMode::sim3;
    throw ConfigError("unknown align mode '" + s + "' (expected none or sim3)");
}

// Fits the alignment on static, valid self-point-map pairs (dynamic pixels
// would bias the scale).
inline Sim3 fit_alignment_on_static(const TrajectoryField& field, const GroundTruthBundle& gt) {
    std::vector<Vec3> pred, ref;
    for (int i = 0; i < gt.num_frames; ++i) {
        const PointMap self = field.self_point_map(i);
        for (int v = 0; v < gt.height; ++v)
            for (int u = 0; u < gt.width; ++u) {
                if (!gt.is_valid(i, i, u, v) || !gt.is_static(i, u, v)) continue;
                if (!self.is_valid(u, v)) continue;
                pred.push_back(self.at(u, v));
                ref.push_back(gt.position(i, i, u, v));
            }
    }
    return sim3_align(pred, ref);
}

// ---------------------------------------------------------------------------
// End-point error
// ---------------------------------------------------------------------------

struct EpeResult {
    double mix = 0.0;
    double sta = 0.0;
    double dyn = 0.0;
    std::size_t n_mix = 0;
    std::size_t n_sta = 0;
    std::size_t n_dyn = 0;
};

namespace detail {

inline bool pair_selected(int i, int j, int pair_gap) {
    return pair_gap < 0 || j - i == pair_gap;
}

inline void check_shapes(const TrajectoryField& field, const GroundTruthBundle& gt) {
    if (field.num_frames() != gt.num_frames || field.height() != gt.height ||
        field.width() != gt.width)
        throw ShapeError("field and ground truth disagree in shape");
}

}  // namespace detail

// Mean unsquared Euclidean distance between predicted and ground-truth
// cross-frame positions over all / static / dynamic source pixels.
// pair_gap < 0 evaluates every ordered (i, j); otherwise only j = i + gap.
inline EpeResult epe(const TrajectoryField& field, const GroundTruthBundle& gt,
                     AlignMode align = AlignMode::none, Sim3* used_alignment = nullptr,
                     int pair_gap = -1) {
    detail::check_shapes(field, gt);
    Sim3 transform;
    if (align == AlignMode::sim3) transform = fit_alignment_on_static(field, gt);
    if (used_alignment) *used_alignment = transform;

    const int n = gt.num_frames;
    std::vector<std::vector<double>> basis_rows(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j)
        basis_rows[static_cast<std::size_t>(j)] =
            basis_eval(field.spec(), gt.timestamps[static_cast<std::size_t>(j)]).values;

    // Two-level tree reduction: pairwise over each (i, j) block of H*W terms,
    // then pairwise over the block sums. Keeps memory at one frame of terms.
    EpeResult out;
    std::vector<double> mix_block(gt.pixels_per_frame()), sta_block(gt.pixels_per_frame()),
        dyn_block(gt.pixels_per_frame());
    std::vector<double> mix_sums, sta_sums, dyn_sums;

    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (!detail::pair_selected(i, j, pair_gap)) continue;
            const std::vector<double>& w = basis_rows[static_cast<std::size_t>(j)];
            std::fill(mix_block.begin(), mix_block.end(), 0.0);
            std::fill(sta_block.begin(), sta_block.end(), 0.0);
            std::fill(dyn_block.begin(), dyn_block.end(), 0.0);
            for (int v = 0; v < gt.height; ++v)
                for (int u = 0; u < gt.width; ++u) {
                    if (!gt.is_valid(i, j, u, v) || !field.pixel_valid(i, u, v)) continue;
                    Vec3 pred = field.query_with_weights(i, u, v, w);
                    if (align == AlignMode::sim3) pred = transform.apply(pred);
                    const double err = (pred - gt.position(i, j, u, v)).norm();
                    const std::size_t slot =
                        static_cast<std::size_t>(v) * static_cast<std::size_t>(gt.width) +
                        static_cast<std::size_t>(u);
                    mix_block[slot] = err;
                    ++out.n_mix;
                    if (gt.is_static(i, u, v)) {
                        sta_block[slot] = err;
                        ++out.n_sta;
                    } else {
                        dyn_block[slot] = err;
                        ++out.n_dyn;
                    }
                }
            mix_sums.push_back(pairwise_sum(mix_block));
            sta_sums.push_back(pairwise_sum(sta_block));
            dyn_sums.push_back(pairwise_sum(dyn_block));
        }

    if (out.n_mix == 0) throw MetricError("epe: no valid evaluation terms");
    out.mix = pairwise_sum(mix_sums) / static_cast<double>(out.n_mix);
    if (out.n_sta > 0) out.sta = pairwise_sum(sta_sums) / static_cast<double>(out.n_sta);
    if (out.n_dyn > 0) out.dyn = pairwise_sum(dyn_sums) / static_cast<double>(out.n_dyn);
    return out;
}

// ---------------------------------------------------------------------------
// Static Degeneracy Deviation
// ---------------------------------------------------------------------------

// Mean over static pixels of the RMS deviation of the trajectory about its
// temporal mean. sample_count <= 0 evaluates at the frame timestamps (the
// benchmark convention); positive values use that many uniform samples.
inline double sdd(const TrajectoryField& field, std::span<const std::uint8_t> static_mask,
                  int sample_count = 0) {
    const std::size_t n_pixels =
        static_cast<std::size_t>(field.num_frames()) * field.pixels_per_frame();
    if (static_mask.size() != n_pixels) throw ShapeError("static mask must have shape N x H x W");

    std::vector<double> ts;
    if (sample_count > 1) {
        ts.resize(static_cast<std::size_t>(sample_count));
        for (int s = 0; s < sample_count; ++s)
            ts[static_cast<std::size_t>(s)] =
                static_cast<double>(s) / static_cast<double>(sample_count - 1);
    } else {
        ts = field.timestamps();
    }
    std::vector<std::vector<double>> rows(ts.size());
    for (std::size_t s = 0; s < ts.size(); ++s) rows[s] = basis_eval(field.spec(), ts[s]).values;

    std::vector<double> terms;
    terms.reserve(n_pixels);
    const std::size_t per_frame = field.pixels_per_frame();
    std::vector<Vec3> samples(ts.size());
    for (std::size_t idx = 0; idx < n_pixels; ++idx) {
        if (!static_mask[idx]) continue;
        const int i = static_cast<int>(idx / per_frame);
        const std::size_t rem = idx % per_frame;
        const int v = static_cast<int>(rem / static_cast<std::size_t>(field.width()));
        const int u = static_cast<int>(rem % static_cast<std::size_t>(field.width()));
        if (!field.pixel_valid(i, u, v)) continue;
        Vec3 mean = Vec3::Zero();
        for (std::size_t s = 0; s < ts.size(); ++s) {
            samples[s] = field.query_with_weights(i, u, v, rows[s]);
            mean += samples[s];
        }
        mean /= static_cast<double>(ts.size());
        double acc = 0.0;
        for (const Vec3& x : samples) acc += (x - mean).squaredNorm();
        terms.push_back(std::sqrt(acc / static_cast<double>(ts.size())));
    }
    if (terms.empty()) throw MetricError("sdd: no static pixels to evaluate");
    return pairwise_mean(terms);
}

// ---------------------------------------------------------------------------
// Correspondence Agreement
// ---------------------------------------------------------------------------

// Mean over ground-truth-corresponding pixel pairs and frame timestamps of
// the distance between the two predicted trajectories.
inline double ca(const TrajectoryField& field, const GroundTruthBundle& gt,
                 bool dynamic_only = true) {
    detail::check_shapes(field, gt);
    std::vector<const CorrespondencePair*> pairs;
    for (const CorrespondencePair& c : gt.correspondences) {
        if (dynamic_only && (gt.is_static(c.i, c.u, c.v) || gt.is_static(c.j, c.u2, c.v2)))
            continue;
        if (!field.pixel_valid(c.i, c.u, c.v) || !field.pixel_valid(c.j, c.u2, c.v2)) continue;
        pairs.push_back(&c);
    }
    if (pairs.empty())
        throw MetricError(dynamic_only ? "ca: no dynamic correspondence pairs"
                                       : "ca: no correspondence pairs");

    const int n = field.num_frames();
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j)
        rows[static_cast<std::size_t>(j)] =
            basis_eval(field.spec(), field.timestamps()[static_cast<std::size_t>(j)]).values;

    std::vector<double> terms;
    terms.reserve(pairs.size() * static_cast<std::size_t>(n));
    for (const CorrespondencePair* c : pairs)
        for (int j = 0; j < n; ++j) {
            const std::vector<double>& w = rows[static_cast<std::size_t>(j)];
            const Vec3 a = field.query_with_weights(c->i, c->u, c->v, w);
            const Vec3 b = field.query_with_weights(c->j, c->u2, c->v2, w);
            terms.push_back((a - b).norm());
        }
    return pairwise_mean(terms);
}

// ---------------------------------------------------------------------------
// Simplified tracking metrics: APD_3D and average Jaccard
// ---------------------------------------------------------------------------

struct ApdAjResult {
    std::vector<std::pair<double, double>> apd;  // (threshold, fraction)
    double aj = 0.0;
    double scene_scale = 0.0;
};

inline std::vector<double> default_apd_thresholds(double scene_scale) {
    return {0.05 * scene_scale, 0.1 * scene_scale, 0.2 * scene_scale, 0.4 * scene_scale,
            0.8 * scene_scale};
}

// APD_3D(delta): fraction of valid, ground-truth-visible evaluations with
// error below delta. AJ: mean over thresholds of TP/(TP+FP+FN), with
// predicted visibility from depth-testing the prediction against the
// predicted self point map of the target frame (tolerance 0.05 scene_scale).
inline ApdAjResult apd_aj(const TrajectoryField& field, const GroundTruthBundle& gt,
                          std::vector<double> thresholds = {}, int pair_gap = -1) {
    detail::check_shapes(field, gt);
    const double scale = gt.scene_scale();
    if (thresholds.empty()) thresholds = default_apd_thresholds(scale);
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
        if (!(thresholds[k] > 0.0)) throw ConfigError("apd thresholds must be positive");
        if (k > 0 && thresholds[k] <= thresholds[k - 1])
            throw ConfigError("apd thresholds must be strictly ascending");
    }
    const double tau = 0.05 * scale;

    const int n = gt.num_frames;
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j)
        rows[static_cast<std::size_t>(j)] =
            basis_eval(field.spec(), gt.timestamps[static_cast<std::size_t>(j)]).values;

    // Predicted self depth per frame; invalid pixels never occlude.
    std::vector<std::vector<double>> pred_depth(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const PointMap self = field.self_point_map(j);
        std::vector<double>& dm = pred_depth[static_cast<std::size_t>(j)];
        dm.assign(gt.pixels_per_frame(), std::numeric_limits<double>::infinity());
        for (int v = 0; v < gt.height; ++v)
            for (int u = 0; u < gt.width; ++u) {
                if (!self.is_valid(u, v)) continue;
                dm[static_cast<std::size_t>(v) * static_cast<std::size_t>(gt.width) +
                   static_cast<std::size_t>(u)] =
                    gt.cameras[static_cast<std::size_t>(j)].world_to_camera(self.at(u, v)).z();
            }
    }

    std::vector<std::size_t> within(thresholds.size(), 0);
    std::vector<std::size_t> tp(thresholds.size(), 0), fp(thresholds.size(), 0),
        fn(thresholds.size(), 0);
    std::size_t n_gt_visible = 0;

    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (!detail::pair_selected(i, j, pair_gap)) continue;
            const std::vector<double>& w = rows[static_cast<std::size_t>(j)];
            for (int v = 0; v < gt.height; ++v)
                for (int u = 0; u < gt.width; ++u) {
                    if (!gt.is_valid(i, j, u, v) || !field.pixel_valid(i, u, v)) continue;
                    const Vec3 pred = field.query_with_weights(i, u, v, w);
                    const double err = (pred - gt.position(i, j, u, v)).norm();
                    const bool gt_vis = gt.is_visible(i, j, u, v);

                    bool pred_vis = false;
                    const Camera::Projection proj =
                        gt.cameras[static_cast<std::size_t>(j)].project(pred);
                    if (proj.in_front && proj.u > -0.5 &&
                        proj.u < static_cast<double>(gt.width) - 0.5 && proj.v > -0.5 &&
                        proj.v < static_cast<double>(gt.height) - 0.5) {
                        const int ur = std::clamp(static_cast<int>(std::lround(proj.u)), 0,
                                                  gt.width - 1);
                        const int vr = std::clamp(static_cast<int>(std::lround(proj.v)), 0,
                                                  gt.height - 1);
                        const double occ =
                            pred_depth[static_cast<std::size_t>(j)]
                                      [static_cast<std::size_t>(vr) *
                                           static_cast<std::size_t>(gt.width) +
                                       static_cast<std::size_t>(ur)];
                        pred_vis = proj.depth <= occ + tau;
                    }

                    if (gt_vis) ++n_gt_visible;
                    for (std::size_t k = 0; k < thresholds.size(); ++k) {
                        const bool close = err < thresholds[k];
                        if (gt_vis && close) ++within[k];
                        if (pred_vis && gt_vis && close) ++tp[k];
                        if (pred_vis && !(gt_vis && close)) ++fp[k];
                        if (gt_vis && !(pred_vis && close)) ++fn[k];
                    }
                }
        }

    if (n_gt_visible == 0) throw MetricError("apd_aj: no visible ground-truth evaluations");

    ApdAjResult out;
    out.scene_scale = scale;
    double aj_acc = 0.0;
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
        out.apd.emplace_back(thresholds[k],
                             static_cast<double>(within[k]) / static_cast<double>(n_gt_visible));
        const double denom = static_cast<double>(tp[k] + fp[k] + fn[k]);
        aj_acc += denom > 0.0 ? static_cast<double>(tp[k]) / denom : 0.0;
    }
    out.aj = aj_acc / static_cast<double>(thresholds.size());
    return out;
}

// ---------------------------------------------------------------------------
// Reports and the benchmark harness
// ---------------------------------------------------------------------------

enum class Protocol { video, pair };

inline Protocol protocol_from_string(const std::string& s) {
    if (s == "video") return Protocol::video;
    if (s == "pair") return Protocol::pair;
    throw ConfigError("unknown protocol '" + s + "' (expected video or pair)");
}

struct SequenceMetrics {
    std::string name;
    bool has_epe = false;
    EpeResult epe;
    bool has_sdd = false;
    double sdd = 0.0;
    bool has_ca = false;
    double ca = 0.0;
    bool has_apd = false;
    ApdAjResult apd_aj;
    bool has_alignment = false;
    Sim3 alignment;
    double scene_scale = 0.0;
    double fit_residual_rms = -1.0;  // informational, < 0 when unknown
};

struct BenchmarkOptions {
    Protocol protocol = Protocol::video;
    int pair_gap = 5;
    AlignMode align = AlignMode::none;
    std::vector<double> threshold_multiples;  // of scene_scale; empty = default
    bool include_timings = false;
};

struct MetricsReport {
    std::vector<SequenceMetrics> sequences;
    BenchmarkOptions options;
    std::map<std::string, double> wall_times;  // stage -> seconds

    // Unweighted means over sequences where a metric is present.
    template <class Get>
    std::pair<double, std::size_t> mean_over(Get get) const {
        double acc = 0.0;
        std::size_t count = 0;
        for (const SequenceMetrics& s : sequences) {
            const auto [present, value] = get(s);
            if (!present) continue;
            acc += value;
            ++count;
        }
        return {count > 0 ? acc / static_cast<double>(count) : 0.0, count};
    }
};

inline tfz::json sim3_json(const Sim3& t) {
    return tfz::json{{"scale", t.scale},
                     {"rotation_wxyz", {t.rotation.w(), t.rotation.x(), t.rotation.y(), t.rotation.z()}},
                     {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

// Report schema: see README. Raw values are stored; the CLI formatter applies
// the display conventions (CA in 1e-2, SDD in 1e-3).
inline tfz::json report_to_json(const MetricsReport& report) {
    tfz::json j;
    j["schema_version"] = 1;
    j["role"] = "report";
    j["protocol"] = report.options.protocol == Protocol::video ? "video" : "pair";
    if (report.options.protocol == Protocol::pair) j["pair_gap"] = report.options.pair_gap;
    j["align"] = report.options.align == AlignMode::sim3 ? "sim3" : "none";

    tfz::json agg;
    const auto epe_mix = report.mean_over([](const SequenceMetrics& s) {
        return std::make_pair(s.has_epe, s.epe.mix);
    });
    const auto epe_sta = report.mean_over([](const SequenceMetrics& s) {
        return std::make_pair(s.has_epe && s.epe.n_sta > 0, s.epe.sta);
    });
    const auto epe_dyn = report.mean_over([](const SequenceMetrics& s) {
        return std::make_pair(s.has_epe && s.epe.n_dyn > 0, s.epe.dyn);
    });
    const auto sdd_mean = report.mean_over([](const SequenceMetrics& s) {
        return std::make_pair(s.has_sdd, s.sdd);
    });
    const auto ca_mean = report.mean_over([](const SequenceMetrics& s) {
        return std::make_pair(s.has_ca, s.ca);
    });
    const auto aj_mean = report.mean_over([](const SequenceMetrics& s) {
        return std::make_pair(s.has_apd, s.apd_aj.aj);
    });
    auto put = [](tfz::json& dst, const char* key, std::pair<double, std::size_t> v) {
        if (v.second > 0) dst[key] = v.first;
    };
    put(agg, "epe_mix", epe_mix);
    put(agg, "epe_sta", epe_sta);
    put(agg, "epe_dyn", epe_dyn);
    put(agg, "sdd", sdd_mean);
    put(agg, "ca", ca_mean);
    put(agg, "aj", aj_mean);
    j["aggregate"] = agg;

    tfz::json seqs = tfz::json::array();
    for (const SequenceMetrics& s : report.sequences) {
        tfz::json e;
        e["name"] = s.name;
        e["scene_scale"] = s.scene_scale;
        if (s.has_epe) {
            e["epe_mix"] = s.epe.mix;
            if (s.epe.n_sta > 0) e["epe_sta"] = s.epe.sta;
            if (s.epe.n_dyn > 0) e["epe_dyn"] = s.epe.dyn;
            e["epe_terms"] = s.epe.n_mix;
        }
        if (s.has_sdd) e["sdd"] = s.sdd;
        if (s.has_ca) e["ca"] = s.ca;
        if (s.has_apd) {
            tfz::json apd = tfz::json::array();
            for (const auto& [thr, frac] : s.apd_aj.apd) apd.push_back({{"threshold", thr}, {"fraction", frac}});
            e["apd3d"] = apd;
            e["aj"] = s.apd_aj.aj;
        }
        if (s.fit_residual_rms >= 0.0) e["fit_residual_rms"] = s.fit_residual_rms;
        e["alignment"] = s.has_alignment ? sim3_json(s.alignment) : tfz::json("none");
        seqs.push_back(e);
    }
    j["sequences"] = seqs;

    if (report.options.include_timings) {
        tfz::json times;
        for (const auto& [stage, seconds] : report.wall_times) times[stage] = seconds;
        j["wall_times"] = times;
    }
    return j;
}

// Evaluates one field against one bundle. Metrics whose inputs are missing
// (no static pixels, no dynamic correspondences, no visibility) are reported
// as absent rather than failing the run.
inline SequenceMetrics evaluate_sequence(const TrajectoryField& field, const GroundTruthBundle& gt,
                                         const BenchmarkOptions& options,
                                         std::map<std::string, double>* wall_times = nullptr) {
    using clock = std::chrono::steady_clock;
    auto timed = [&](const char* stage, auto&& fn) {
        const auto start = clock::now();
        fn();
        if (wall_times)
            (*wall_times)[stage] += std::chrono::duration<double>(clock::now() - start).count();
    };

    SequenceMetrics out;
    out.scene_scale = gt.scene_scale();
    const int gap = options.protocol == Protocol::pair ? options.pair_gap : -1;
    if (gap >= gt.num_frames)
        throw ConfigError("pair gap must be smaller than the frame count");

    timed("epe", [&] {
        Sim3 used;
        out.epe = epe(field, gt, options.align, &used, gap);
        out.has_epe = true;
        if (options.align == AlignMode::sim3) {
            out.alignment = used;
            out.has_alignment = true;
        }
    });
    timed("sdd", [&] {
        try {
            out.sdd = sdd(field, gt.static_mask);
            out.has_sdd = true;
        } catch (const MetricError&) {
        }
    });
    timed("ca", [&] {
        try {
            out.ca = ca(field, gt, /*dynamic_only=*/true);
            out.has_ca = true;
        } catch (const MetricError&) {
        }
    });
    timed("apd_aj", [&] {
        try {
            std::vector<double> thresholds;
            for (double m : options.threshold_multiples) thresholds.push_back(m * out.scene_scale);
            out.apd_aj = apd_aj(field, gt, thresholds, gap);
            out.has_apd = true;
        } catch (const MetricError&) {
        }
    });
    return out;
}

// Runs the benchmark over one sequence (gt dir holds manifest.json directly)
// or a directory of sequences (one container subdirectory each, matched by
// name under the prediction directory).
inline MetricsReport benchmark_run(const std::filesystem::path& pred_source,
                                   const std::filesystem::path& gt_dir,
                                   const BenchmarkOptions& options) {
    namespace fs = std::filesystem;
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();

    std::vector<std::pair<std::string, fs::path>> gt_sequences;
    if (fs::exists(gt_dir / "manifest.json")) {
        gt_sequences.emplace_back(gt_dir.filename().string(), gt_dir);
    } else if (fs::is_directory(gt_dir)) {
        for (const auto& entry : fs::directory_iterator(gt_dir))
            if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
                gt_sequences.emplace_back(entry.path().filename().string(), entry.path());
        std::sort(gt_sequences.begin(), gt_sequences.end());
    }
    if (gt_sequences.empty())
        throw InputError("no ground-truth containers under " + gt_dir.string());

    MetricsReport report;
    report.options = options;
    for (const auto& [name, gt_path] : gt_sequences) {
        const fs::path pred_path =
            fs::exists(pred_source / "manifest.json") ? pred_source : pred_source / name;
        const auto t_load = clock::now();
        const GroundTruthBundle gt = tfz::read_bundle(gt_path);
        const TrajectoryField field = tfz::read_field(pred_path);
        report.wall_times["load"] +=
            std::chrono::duration<double>(clock::now() - t_load).count();

        SequenceMetrics seq = evaluate_sequence(field, gt, options, &report.wall_times);
        seq.name = name;
        report.sequences.push_back(std::move(seq));
    }
    report.wall_times["total"] = std::chrono::duration<double>(clock::now() - t0).count();
    return report;
}

}  // namespace trajfield

#endif  // TRAJFIELD_METRICS_HPP
