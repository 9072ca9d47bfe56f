#ifndef TRAJFIELD_FIT_HPP
#define TRAJFIELD_FIT_HPP

#include "trajfield/bundle.hpp"
#include "trajfield/curve.hpp"
#include "trajfield/field.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace trajfield {

// Linear least-squares recovery of control points from sampled trajectories:
// the brute-force counterpart of what a predictor would learn, and the
// reference producer of near-ideal fields for metric calibration.

struct TrajectorySample {
    double t = 0.0;
    Vec3 position = Vec3::Zero();
    double weight = 1.0;
};

using TrajectorySamples = std::vector<TrajectorySample>;

struct PixelFit {
    Eigen::Matrix<double, Eigen::Dynamic, 3> control_points;  // D x 3
    double residual_rms = 0.0;
};

namespace detail {

using MatD = Eigen::MatrixXd;

struct FitSystem {
    MatD basis;              // n_samples x D
    Eigen::VectorXd weights; // n_samples
    MatD gram;               // D x D, ridge included
    Eigen::LDLT<MatD> ldlt;
    double ridge = 0.0;
    double weight_sum = 0.0;
};

inline FitSystem build_fit_system(std::span<const double> ts, std::span<const double> ws,
                                  const CurveSpec& spec, double ridge) {
    const int d = spec.num_control_points;
    FitSystem sys;
    sys.ridge = ridge;
    sys.basis.resize(static_cast<Eigen::Index>(ts.size()), d);
    sys.weights.resize(static_cast<Eigen::Index>(ts.size()));
    for (std::size_t r = 0; r < ts.size(); ++r) {
        const BasisWeights w = basis_eval(spec, ts[r]);
        for (int k = 0; k < d; ++k)
            sys.basis(static_cast<Eigen::Index>(r), k) = w.values[static_cast<std::size_t>(k)];
        sys.weights(static_cast<Eigen::Index>(r)) = ws[r];
        sys.weight_sum += ws[r];
    }
    sys.gram = sys.basis.transpose() * sys.weights.asDiagonal() * sys.basis;
    if (ridge > 0.0) sys.gram.diagonal().array() += ridge;
    if (ridge == 0.0) {
        // Rank check up front: without regularization a deficient Gram matrix
        // has no unique minimizer.
        Eigen::FullPivLU<MatD> lu(sys.gram);
        lu.setThreshold(1e-10);
        if (lu.rank() < d)
            throw RankDeficiencyError(
                "fit is rank-deficient (too few distinct sample parameters for the requested "
                "control-point count); use ridge > 0");
    }
    sys.ldlt.compute(sys.gram);
    return sys;
}

// Solves for the D x 3 control points given sample positions. The ridge term
// pulls toward the weighted sample centroid so degenerate inputs produce
// degenerate control points. One refinement pass keeps the normal-equation
// round trip at the 1e-12 level.
inline PixelFit solve_fit(const FitSystem& sys, const std::vector<Vec3>& positions) {
    const Eigen::Index n = sys.basis.rows();
    const int d = static_cast<int>(sys.basis.cols());
    MatD y(n, 3);
    for (Eigen::Index r = 0; r < n; ++r) y.row(r) = positions[static_cast<std::size_t>(r)].transpose();

    Vec3 centroid = Vec3::Zero();
    if (sys.weight_sum > 0.0) {
        for (Eigen::Index r = 0; r < n; ++r)
            centroid += sys.weights(r) * positions[static_cast<std::size_t>(r)];
        centroid /= sys.weight_sum;
    }

    MatD rhs = sys.basis.transpose() * sys.weights.asDiagonal() * y;
    if (sys.ridge > 0.0) rhs.rowwise() += sys.ridge * centroid.transpose();

    PixelFit fit;
    fit.control_points = sys.ldlt.solve(rhs);
    fit.control_points += sys.ldlt.solve(rhs - sys.gram * fit.control_points);

    const MatD resid = sys.basis * fit.control_points - y;
    double acc = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) acc += sys.weights(r) * resid.row(r).squaredNorm();
    fit.residual_rms = sys.weight_sum > 0.0 ? std::sqrt(acc / sys.weight_sum) : 0.0;
    if (!fit.control_points.allFinite())
        throw RankDeficiencyError("fit produced non-finite control points; use ridge > 0");
    return fit;
}

}  // namespace detail

inline PixelFit fit_pixel(const TrajectorySamples& samples, const CurveSpec& spec, double ridge) {
    spec.validate();
    if (samples.empty()) throw InputError("fit_pixel needs at least one sample");
    if (ridge < 0.0) throw ConfigError("ridge must be non-negative");
    std::vector<double> ts, ws;
    std::vector<Vec3> ys;
    ts.reserve(samples.size());
    ws.reserve(samples.size());
    ys.reserve(samples.size());
    for (const TrajectorySample& s : samples) {
        if (!(s.weight > 0.0)) throw InputError("sample weights must be positive");
        ts.push_back(s.t);
        ws.push_back(s.weight);
        ys.push_back(s.position);
    }
    const detail::FitSystem sys = detail::build_fit_system(ts, ws, spec, ridge);
    return detail::solve_fit(sys, ys);
}

struct FieldFit {
    TrajectoryField field;
    double residual_rms = 0.0;   // over all valid samples of all pixels
    std::size_t pixels_fit = 0;
    std::size_t pixels_invalid = 0;
};

// Per-pixel least squares over the samples {(t_j, X_{i->j}(u,v))}_j. All
// pixels of a frame with full validity share one factorization; pixels with
// dropped samples build their own. Confidences are set to 1.
inline FieldFit fit_field(const GroundTruthBundle& gt, const CurveSpec& spec, double ridge = 1e-8,
                          int threads = 1) {
    if (gt.empty()) throw InputError("fit_field: ground-truth bundle is empty");
    spec.validate();
    const int n = gt.num_frames;
    const int h = gt.height;
    const int w = gt.width;

    FieldFit out{TrajectoryField(n, h, w, spec, gt.timestamps), 0.0, 0, 0};
    TrajectoryField& field = out.field;

    // Every frame samples the same timestamps, so one factorization covers
    // all fully-valid pixels.
    std::vector<double> full_w(static_cast<std::size_t>(n), 1.0);
    const detail::FitSystem shared = detail::build_fit_system(gt.timestamps, full_w, spec, ridge);

    const std::size_t total_pixels = static_cast<std::size_t>(n) * gt.pixels_per_frame();
    std::vector<double> sq_residual(total_pixels, 0.0);
    std::vector<double> sample_count(total_pixels, 0.0);
    std::vector<std::uint8_t> invalid_flags(total_pixels, 0);

    parallel_for_chunks(total_pixels, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<Vec3> ys;
        std::vector<double> ts, ws;
        for (std::size_t idx = begin; idx < end; ++idx) {
            const int i = static_cast<int>(idx / gt.pixels_per_frame());
            const std::size_t rem = idx % gt.pixels_per_frame();
            const int v = static_cast<int>(rem / static_cast<std::size_t>(w));
            const int u = static_cast<int>(rem % static_cast<std::size_t>(w));

            ys.clear();
            ts.clear();
            ws.clear();
            for (int j = 0; j < n; ++j) {
                if (!gt.is_valid(i, j, u, v)) continue;
                ts.push_back(gt.timestamps[static_cast<std::size_t>(j)]);
                ws.push_back(1.0);
                ys.push_back(gt.position(i, j, u, v));
            }
            if (ys.empty()) {
                field.set_pixel_valid(i, u, v, false);
                invalid_flags[idx] = 1;
                continue;
            }
            PixelFit fit;
            if (ys.size() == static_cast<std::size_t>(n)) {
                fit = detail::solve_fit(shared, ys);
            } else {
                const detail::FitSystem own = detail::build_fit_system(ts, ws, spec, ridge);
                fit = detail::solve_fit(own, ys);
            }
            for (int k = 0; k < spec.num_control_points; ++k)
                field.set_control_point(i, k, u, v, fit.control_points.row(k).transpose());
            sq_residual[idx] = fit.residual_rms * fit.residual_rms * static_cast<double>(ys.size());
            sample_count[idx] = static_cast<double>(ys.size());
        }
    });

    const double total_sq = pairwise_sum(sq_residual);
    const double total_n = pairwise_sum(sample_count);
    out.residual_rms = total_n > 0.0 ? std::sqrt(total_sq / total_n) : 0.0;
    for (std::uint8_t f : invalid_flags) out.pixels_invalid += f;
    out.pixels_fit = total_pixels - out.pixels_invalid;
    return out;
}

}  // namespace trajfield

#endif  // TRAJFIELD_FIT_HPP
