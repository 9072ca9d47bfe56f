#ifndef TRAJFIELD_LOSS_HPP
#define TRAJFIELD_LOSS_HPP

#include "trajfield/bundle.hpp"
#include "trajfield/field.hpp"

#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace trajfield {

// Training objective: confidence-weighted trajectory supervision plus static,
// rigidity and correspondence regularizers, all with analytic gradients with
// respect to control points and raw confidences. A gradient-descent driver
// fits a field directly to a ground-truth bundle.
//
// Note the confidence term: the weighted residual is paired with -alpha *
// log(sigma), giving the interior minimum sigma = alpha / l that downweights
// uncertain predictions without rewarding overconfidence.

struct LossWeights {
    double alpha = 0.2;
    double lambda_time = 0.0;
    double lambda_static = 0.1;
    double lambda_rigid = 0.1;
    double lambda_corr = 0.1;
    int rigid_pair_samples = 512;

    void validate() const {
        if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
        if (lambda_time < 0.0 || lambda_static < 0.0 || lambda_rigid < 0.0 || lambda_corr < 0.0)
            throw ConfigError("loss weights must be non-negative");
        if (rigid_pair_samples < 1) throw ConfigError("rigid_pair_samples must be at least 1");
    }
};

// Component values are stored unweighted; `total` applies the lambdas.
// Components whose lambda is zero are skipped and reported as 0.
struct LossBreakdown {
    double traj_conf = 0.0;
    double time = 0.0;
    double static_reg = 0.0;
    double rigid = 0.0;
    double corr = 0.0;
    double total = 0.0;
    std::size_t n_traj_terms = 0;
    std::size_t n_static_pixels = 0;
    std::size_t n_rigid_pairs = 0;
    std::size_t n_corr_pairs = 0;
};

// Gradient buffers matching the field layout. d_confidence is taken with
// respect to the raw (positive) confidence values; the optimizer converts to
// its log parameterization by the chain rule.
struct FieldGradients {
    std::vector<double> d_control;
    std::vector<double> d_confidence;

    static FieldGradients zeros_like(const TrajectoryField& field) {
        FieldGradients g;
        g.d_control.assign(field.control_data().size(), 0.0);
        g.d_confidence.assign(field.confidence_data().size(), 0.0);
        return g;
    }
};

inline double traj_loss(const Vec3& pred, const Vec3& gt) {
    if (!pred.allFinite() || !gt.allFinite()) throw InputError("traj_loss needs finite inputs");
    return (pred - gt).squaredNorm();
}

inline double time_loss(std::span<const double> pred, std::span<const double> gt) {
    if (pred.size() != gt.size()) throw ShapeError("timestamp lists differ in length");
    if (pred.empty()) throw InputError("time_loss needs at least one timestamp");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - gt[i]);
    return acc / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Confidence-adjusted trajectory loss
// ---------------------------------------------------------------------------

inline double conf_traj_loss(const TrajectoryField& field, const GroundTruthBundle& gt,
                             double alpha, FieldGradients* grads = nullptr, int threads = 1,
                             std::size_t* term_count = nullptr) {
    if (gt.empty()) throw InputError("conf_traj_loss: empty ground-truth bundle");
    if (field.num_frames() != gt.num_frames || field.height() != gt.height ||
        field.width() != gt.width)
        throw ShapeError("field and ground truth disagree in shape");
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");

    const int n = gt.num_frames;
    const int d = field.num_control_points();

    // Supervision times are the ground-truth frame timestamps.
    std::vector<std::vector<double>> basis_rows(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j)
        basis_rows[static_cast<std::size_t>(j)] =
            basis_eval(field.spec(), gt.timestamps[static_cast<std::size_t>(j)]).values;

    std::size_t omega = 0;
    for (std::uint8_t f : gt.valid) omega += f;
    if (omega == 0) throw InputError("conf_traj_loss: no valid supervision tuples");
    if (term_count) *term_count = omega;
    const double scale = 1.0 / static_cast<double>(omega);

    const std::size_t per_frame = gt.pixels_per_frame();
    const std::size_t n_pixels = static_cast<std::size_t>(n) * per_frame;
    std::vector<double> pixel_partial(n_pixels, 0.0);

    parallel_for_chunks(n_pixels, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const int i = static_cast<int>(idx / per_frame);
            const std::size_t rem = idx % per_frame;
            const int v = static_cast<int>(rem / static_cast<std::size_t>(gt.width));
            const int u = static_cast<int>(rem % static_cast<std::size_t>(gt.width));
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                if (!gt.is_valid(i, j, u, v)) continue;
                const std::vector<double>& w = basis_rows[static_cast<std::size_t>(j)];
                const Vec3 pred = field.query_with_weights(i, u, v, w);
                const Vec3 res = pred - gt.position(i, j, u, v);
                const double l = res.squaredNorm();
                const double sigma = field.aggregate_confidence_with_weights(i, u, v, w);
                if (!(sigma > 0.0))
                    throw NumericDomainError(
                        "aggregated confidence is non-positive; stored confidences must stay "
                        "positive");
                acc += sigma * l - alpha * std::log(sigma);
                if (grads) {
                    const Vec3 dres = (2.0 * scale * sigma) * res;
                    const double dsigma = scale * (l - alpha / sigma);
                    for (int k = 0; k < d; ++k) {
                        const double wk = w[static_cast<std::size_t>(k)];
                        double* gp = grads->d_control.data() + field.control_offset(i, k, u, v);
                        gp[0] += wk * dres.x();
                        gp[1] += wk * dres.y();
                        gp[2] += wk * dres.z();
                        grads->d_confidence[field.confidence_offset(i, k, u, v)] += wk * dsigma;
                    }
                }
            }
            pixel_partial[idx] = acc;
        }
    });

    return scale * pairwise_sum(pixel_partial);
}

// ---------------------------------------------------------------------------
// Regularizers
// ---------------------------------------------------------------------------

// Mean over masked pixels of the control-point variance (mean squared
// distance to the centroid, population 1/D). `weight` scales the gradient
// contribution; the returned value is unweighted.
inline double static_reg(const TrajectoryField& field, std::span<const std::uint8_t> mask,
                         FieldGradients* grads = nullptr, double weight = 1.0, int threads = 1,
                         std::size_t* pixel_count = nullptr) {
    const std::size_t n_pixels =
        static_cast<std::size_t>(field.num_frames()) * field.pixels_per_frame();
    if (mask.size() != n_pixels) throw ShapeError("static mask must have shape N x H x W");
    std::size_t count = 0;
    for (std::uint8_t m : mask) count += m ? 1 : 0;
    if (pixel_count) *pixel_count = count;
    if (count == 0) {
        std::cerr << "[trajfield] static_reg: empty mask, contributing 0\n";
        return 0.0;
    }

    const int d = field.num_control_points();
    const double inv_d = 1.0 / static_cast<double>(d);
    const double grad_scale = weight * 2.0 * inv_d / static_cast<double>(count);
    const std::size_t per_frame = field.pixels_per_frame();
    std::vector<double> pixel_partial(n_pixels, 0.0);

    parallel_for_chunks(n_pixels, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            if (!mask[idx]) continue;
            const int i = static_cast<int>(idx / per_frame);
            const std::size_t rem = idx % per_frame;
            const int v = static_cast<int>(rem / static_cast<std::size_t>(field.width()));
            const int u = static_cast<int>(rem % static_cast<std::size_t>(field.width()));
            Vec3 centroid = Vec3::Zero();
            for (int k = 0; k < d; ++k) centroid += field.control_point(i, k, u, v);
            centroid *= inv_d;
            double var = 0.0;
            for (int k = 0; k < d; ++k) {
                const Vec3 dev = field.control_point(i, k, u, v) - centroid;
                var += dev.squaredNorm();
                if (grads) {
                    double* gp = grads->d_control.data() + field.control_offset(i, k, u, v);
                    gp[0] += grad_scale * dev.x();
                    gp[1] += grad_scale * dev.y();
                    gp[2] += grad_scale * dev.z();
                }
            }
            pixel_partial[idx] = var * inv_d;
        }
    });
    return pairwise_sum(pixel_partial) / static_cast<double>(count);
}

namespace detail {

struct PixelRef {
    int u = 0;
    int v = 0;
};

// Same-frame pixel pairs per rigid segment, uniform without replacement,
// deterministic under the seed. Segments of size < 2 are skipped.
inline std::vector<std::pair<std::size_t, std::size_t>> sample_segment_pairs(
    std::size_t segment_size, int want, Rng& rng) {
    const std::size_t all = segment_size * (segment_size - 1) / 2;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (all <= static_cast<std::size_t>(want)) {
        pairs.reserve(all);
        for (std::size_t a = 0; a < segment_size; ++a)
            for (std::size_t b = a + 1; b < segment_size; ++b) pairs.emplace_back(a, b);
        return pairs;
    }
    std::unordered_set<std::uint64_t> seen;
    pairs.reserve(static_cast<std::size_t>(want));
    while (pairs.size() < static_cast<std::size_t>(want)) {
        std::size_t a = rng.index(segment_size);
        std::size_t b = rng.index(segment_size - 1);
        if (b >= a) ++b;
        if (a > b) std::swap(a, b);
        const std::uint64_t key = static_cast<std::uint64_t>(a) << 32 | static_cast<std::uint64_t>(b);
        if (!seen.insert(key).second) continue;
        pairs.emplace_back(a, b);
    }
    return pairs;
}

}  // namespace detail

// Mean over sampled same-segment pixel pairs of the variance (over k) of the
// control-point pairwise distance. Segments are (frame, label) groups with
// label >= 0.
inline double rigid_reg(const TrajectoryField& field, std::span<const std::int32_t> labels,
                        int pair_samples, std::uint64_t seed, FieldGradients* grads = nullptr,
                        double weight = 1.0, std::size_t* pair_count = nullptr) {
    const std::size_t n_pixels =
        static_cast<std::size_t>(field.num_frames()) * field.pixels_per_frame();
    if (labels.size() != n_pixels) throw ShapeError("rigid labels must have shape N x H x W");
    if (pair_samples < 1) throw ConfigError("pair_samples must be at least 1");

    // (frame, label) -> pixels, deterministic order.
    std::map<std::pair<int, std::int32_t>, std::vector<detail::PixelRef>> segments;
    for (int i = 0; i < field.num_frames(); ++i)
        for (int v = 0; v < field.height(); ++v)
            for (int u = 0; u < field.width(); ++u) {
                const std::int32_t label = labels[field.pixel_index(i, u, v)];
                if (label < 0) continue;
                segments[{i, label}].push_back({u, v});
            }

    const int d = field.num_control_points();
    const double inv_d = 1.0 / static_cast<double>(d);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);

    struct PairTerm {
        int frame;
        detail::PixelRef p, q;
    };
    std::vector<PairTerm> terms;
    for (const auto& [key, pixels] : segments) {
        if (pixels.size() < 2) continue;
        for (const auto& [a, b] : detail::sample_segment_pairs(pixels.size(), pair_samples, rng))
            terms.push_back({key.first, pixels[a], pixels[b]});
    }
    if (pair_count) *pair_count = terms.size();
    if (terms.empty()) return 0.0;

    const double grad_scale = weight * 2.0 * inv_d / static_cast<double>(terms.size());
    std::vector<double> values(terms.size(), 0.0);
    std::vector<double> dist(static_cast<std::size_t>(d));
    for (std::size_t p = 0; p < terms.size(); ++p) {
        const PairTerm& term = terms[p];
        double mean = 0.0;
        for (int k = 0; k < d; ++k) {
            const Vec3 diff = field.control_point(term.frame, k, term.p.u, term.p.v) -
                              field.control_point(term.frame, k, term.q.u, term.q.v);
            dist[static_cast<std::size_t>(k)] = diff.norm();
            mean += dist[static_cast<std::size_t>(k)];
        }
        mean *= inv_d;
        double var = 0.0;
        for (int k = 0; k < d; ++k) {
            const double dev = dist[static_cast<std::size_t>(k)] - mean;
            var += dev * dev;
            if (grads && dist[static_cast<std::size_t>(k)] > 1e-300) {
                const Vec3 diff = field.control_point(term.frame, k, term.p.u, term.p.v) -
                                  field.control_point(term.frame, k, term.q.u, term.q.v);
                const Vec3 g = (grad_scale * dev / dist[static_cast<std::size_t>(k)]) * diff;
                double* gp =
                    grads->d_control.data() + field.control_offset(term.frame, k, term.p.u, term.p.v);
                double* gq =
                    grads->d_control.data() + field.control_offset(term.frame, k, term.q.u, term.q.v);
                gp[0] += g.x();
                gp[1] += g.y();
                gp[2] += g.z();
                gq[0] -= g.x();
                gq[1] -= g.y();
                gq[2] -= g.z();
            }
        }
        values[p] = var * inv_d;
    }
    return pairwise_mean(values);
}

// Mean over correspondence pairs of the mean squared control-point gap.
inline double corr_reg(const TrajectoryField& field,
                       std::span<const CorrespondencePair> correspondences,
                       FieldGradients* grads = nullptr, double weight = 1.0,
                       std::size_t* pair_count = nullptr) {
    if (pair_count) *pair_count = correspondences.size();
    if (correspondences.empty()) return 0.0;
    const int d = field.num_control_points();
    const double inv_d = 1.0 / static_cast<double>(d);
    const double grad_scale = weight * 2.0 * inv_d / static_cast<double>(correspondences.size());

    std::vector<double> values(correspondences.size(), 0.0);
    for (std::size_t p = 0; p < correspondences.size(); ++p) {
        const CorrespondencePair& c = correspondences[p];
        double acc = 0.0;
        for (int k = 0; k < d; ++k) {
            const Vec3 diff =
                field.control_point(c.i, k, c.u, c.v) - field.control_point(c.j, k, c.u2, c.v2);
            acc += diff.squaredNorm();
            if (grads) {
                double* gp = grads->d_control.data() + field.control_offset(c.i, k, c.u, c.v);
                double* gq = grads->d_control.data() + field.control_offset(c.j, k, c.u2, c.v2);
                gp[0] += grad_scale * diff.x();
                gp[1] += grad_scale * diff.y();
                gp[2] += grad_scale * diff.z();
                gq[0] -= grad_scale * diff.x();
                gq[1] -= grad_scale * diff.y();
                gq[2] -= grad_scale * diff.z();
            }
        }
        values[p] = acc * inv_d;
    }
    return pairwise_mean(values);
}

// ---------------------------------------------------------------------------
// Combined objective
// ---------------------------------------------------------------------------

inline LossBreakdown total_loss(const TrajectoryField& field, const GroundTruthBundle& gt,
                                const LossWeights& weights, std::uint64_t seed = 0,
                                FieldGradients* grads = nullptr, int threads = 1) {
    weights.validate();
    LossBreakdown out;
    out.traj_conf = conf_traj_loss(field, gt, weights.alpha, grads, threads, &out.n_traj_terms);
    if (weights.lambda_time > 0.0) out.time = time_loss(field.timestamps(), gt.timestamps);
    if (weights.lambda_static > 0.0)
        out.static_reg = static_reg(field, gt.static_mask, grads, weights.lambda_static, threads,
                                    &out.n_static_pixels);
    if (weights.lambda_rigid > 0.0)
        out.rigid = rigid_reg(field, gt.rigid_labels, weights.rigid_pair_samples, seed, grads,
                              weights.lambda_rigid, &out.n_rigid_pairs);
    if (weights.lambda_corr > 0.0)
        out.corr = corr_reg(field, gt.correspondences, grads, weights.lambda_corr,
                            &out.n_corr_pairs);
    out.total = out.traj_conf + weights.lambda_time * out.time +
                weights.lambda_static * out.static_reg + weights.lambda_rigid * out.rigid +
                weights.lambda_corr * out.corr;
    return out;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

struct GradCheckReport {
    double max_rel_error = 0.0;
    double max_abs_analytic = 0.0;
    std::size_t trials = 0;
    std::size_t control_trials = 0;
    std::size_t confidence_trials = 0;
};

inline GradCheckReport grad_check(const TrajectoryField& field, const GroundTruthBundle& gt,
                                  const LossWeights& weights, double eps, int trials,
                                  std::uint64_t seed) {
    if (!(eps > 0.0)) throw ConfigError("grad_check eps must be positive");
    FieldGradients grads = FieldGradients::zeros_like(field);
    total_loss(field, gt, weights, seed, &grads);

    GradCheckReport report;
    for (double g : grads.d_control) report.max_abs_analytic = std::max(report.max_abs_analytic, std::abs(g));
    for (double g : grads.d_confidence)
        report.max_abs_analytic = std::max(report.max_abs_analytic, std::abs(g));

    const std::size_t n_control = grads.d_control.size();
    const std::size_t n_conf = grads.d_confidence.size();
    Rng rng(seed);
    TrajectoryField probe = field;
    for (int t = 0; t < trials; ++t) {
        const std::size_t coord = rng.index(n_control + n_conf);
        double* slot;
        double analytic;
        if (coord < n_control) {
            slot = &probe.control_data()[coord];
            analytic = grads.d_control[coord];
            ++report.control_trials;
        } else {
            slot = &probe.confidence_data()[coord - n_control];
            analytic = grads.d_confidence[coord - n_control];
            if (*slot - eps <= 0.0) continue;  // keep the probe confidence positive
            ++report.confidence_trials;
        }
        const double saved = *slot;
        *slot = saved + eps;
        const double up = total_loss(probe, gt, weights, seed).total;
        *slot = saved - eps;
        const double down = total_loss(probe, gt, weights, seed).total;
        *slot = saved;
        const double fd = (up - down) / (2.0 * eps);
        const double rel =
            std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
        report.max_rel_error = std::max(report.max_rel_error, rel);
    }
    report.trials = static_cast<std::size_t>(trials);
    return report;
}

// ---------------------------------------------------------------------------
// Direct field optimization
// ---------------------------------------------------------------------------

enum class FieldInit { centroid, gt_first_frame, random };

inline FieldInit field_init_from_string(const std::string& s) {
    if (s == "centroid") return FieldInit::centroid;
    if (s == "gt_first_frame") return FieldInit::gt_first_frame;
    if (s == "random") return FieldInit::random;
    throw ConfigError("unknown init '" + s + "' (expected centroid, gt_first_frame or random)");
}

struct OptimizeConfig {
    int iters = 500;
    double step = 1.0;          // initial step; adapted by halving/growth
    double step_growth = 2.0;   // applied after each accepted step
    FieldInit init = FieldInit::centroid;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct OptimizeResult {
    TrajectoryField field;
    std::vector<double> loss_history;  // accepted loss after each iteration
    LossBreakdown final_breakdown;
    int accepted_steps = 0;
    double final_step = 0.0;
};

namespace detail {

inline TrajectoryField init_field(const GroundTruthBundle& gt, const CurveSpec& spec,
                                  FieldInit init, std::uint64_t seed) {
    TrajectoryField field(gt.num_frames, gt.height, gt.width, spec, gt.timestamps);
    Vec3 centroid = Vec3::Zero();
    std::size_t n_valid = 0;
    for (int i = 0; i < gt.num_frames; ++i)
        for (int j = 0; j < gt.num_frames; ++j)
            for (int v = 0; v < gt.height; ++v)
                for (int u = 0; u < gt.width; ++u)
                    if (gt.is_valid(i, j, u, v)) {
                        centroid += gt.position(i, j, u, v);
                        ++n_valid;
                    }
    if (n_valid == 0) throw InputError("optimize_field: ground truth has no valid positions");
    centroid /= static_cast<double>(n_valid);

    const double spread = 0.1 * std::max(gt.scene_scale(), 1e-9);
    Rng rng(seed ^ 0x7f4a7c15ull);
    for (int i = 0; i < gt.num_frames; ++i)
        for (int v = 0; v < gt.height; ++v)
            for (int u = 0; u < gt.width; ++u) {
                Vec3 base = centroid;
                if (init == FieldInit::gt_first_frame) {
                    if (gt.is_valid(i, 0, u, v)) {
                        base = gt.position(i, 0, u, v);
                    } else {
                        for (int j = 1; j < gt.num_frames; ++j)
                            if (gt.is_valid(i, j, u, v)) {
                                base = gt.position(i, j, u, v);
                                break;
                            }
                    }
                }
                for (int k = 0; k < spec.num_control_points; ++k) {
                    Vec3 value = base;
                    if (init == FieldInit::random)
                        value += Vec3(rng.uniform(-spread, spread), rng.uniform(-spread, spread),
                                      rng.uniform(-spread, spread));
                    field.set_control_point(i, k, u, v, value);
                }
            }
    return field;
}

}  // namespace detail

// Gradient descent with per-iteration step halving on non-decrease; the
// accepted-loss history is non-increasing by construction. Confidences move
// through a log parameterization so they stay positive. Returns the
// best-loss field seen.
inline OptimizeResult optimize_field(const GroundTruthBundle& gt, const CurveSpec& spec,
                                     const LossWeights& weights, const OptimizeConfig& config) {
    if (config.iters < 1) throw ConfigError("optimize_field needs at least one iteration");
    if (!(config.step > 0.0)) throw ConfigError("initial step must be positive");
    weights.validate();
    spec.validate();

    OptimizeResult result;
    result.field = detail::init_field(gt, spec, config.init, config.seed);
    TrajectoryField& field = result.field;

    FieldGradients grads = FieldGradients::zeros_like(field);
    LossBreakdown current =
        total_loss(field, gt, weights, config.seed, &grads, config.threads);
    if (!std::isfinite(current.total))
        throw OptimizationError("loss is not finite at iteration 0");

    double step = config.step;
    result.loss_history.push_back(current.total);

    TrajectoryField candidate = field;
    FieldGradients scratch = FieldGradients::zeros_like(field);
    for (int it = 1; it <= config.iters; ++it) {
        for (double g : grads.d_control)
            if (!std::isfinite(g))
                throw OptimizationError("gradient diverged at iteration " + std::to_string(it));
        for (double g : grads.d_confidence)
            if (!std::isfinite(g))
                throw OptimizationError("gradient diverged at iteration " + std::to_string(it));

        // candidate = current parameters stepped along the negative gradient;
        // log-confidence step sigma <- sigma * exp(-step * dL/dlog sigma).
        std::vector<double>& ccp = candidate.control_data();
        const std::vector<double>& fcp = field.control_data();
        for (std::size_t x = 0; x < ccp.size(); ++x) ccp[x] = fcp[x] - step * grads.d_control[x];
        std::vector<double>& cconf = candidate.confidence_data();
        const std::vector<double>& fconf = field.confidence_data();
        for (std::size_t x = 0; x < cconf.size(); ++x) {
            const double g_log = grads.d_confidence[x] * fconf[x];
            cconf[x] = fconf[x] * std::exp(-step * g_log);
        }

        std::fill(scratch.d_control.begin(), scratch.d_control.end(), 0.0);
        std::fill(scratch.d_confidence.begin(), scratch.d_confidence.end(), 0.0);
        const LossBreakdown trial =
            total_loss(candidate, gt, weights, config.seed, &scratch, config.threads);
        if (std::isfinite(trial.total) && trial.total < current.total) {
            field.control_data().swap(candidate.control_data());
            field.confidence_data().swap(candidate.confidence_data());
            grads.d_control.swap(scratch.d_control);
            grads.d_confidence.swap(scratch.d_confidence);
            current = trial;
            step *= config.step_growth;
            ++result.accepted_steps;
        } else {
            step *= 0.5;
            if (step < 1e-300)
                throw OptimizationError("step underflowed at iteration " + std::to_string(it));
        }
        result.loss_history.push_back(current.total);
    }

    result.final_breakdown = current;
    result.final_step = step;
    return result;
}

}  // namespace trajfield

#endif  // TRAJFIELD_LOSS_HPP
