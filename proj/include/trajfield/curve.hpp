#ifndef TRAJFIELD_CURVE_HPP
#define TRAJFIELD_CURVE_HPP

#include "trajfield/common.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace trajfield {

// Parametric-curve bases over t in [0, 1]: clamped B-splines (Cox-de Boor),
// Bezier (Bernstein polynomials) and plain monomials. All arithmetic is
// double precision; downstream gradient checks need the headroom.

enum class CurveFamily { bspline, bezier, polynomial };

inline const char* to_string(CurveFamily f) {
    switch (f) {
        case CurveFamily::bspline: return "bspline";
        case CurveFamily::bezier: return "bezier";
        case CurveFamily::polynomial: return "polynomial";
    }
    return "?";
}

inline CurveFamily curve_family_from_string(const std::string& s) {
    if (s == "bspline") return CurveFamily::bspline;
    if (s == "bezier") return CurveFamily::bezier;
    if (s == "polynomial") return CurveFamily::polynomial;
    throw ConfigError("unknown curve family '" + s + "' (expected bspline, bezier or polynomial)");
}

// Clamped knot vectors for cubic B-splines with D control points. Only the
// three supported sizes; internal knots carry multiplicity 3 so segments meet
// with C^0 continuity.
inline std::vector<double> make_knot_vector(int num_control_points) {
    switch (num_control_points) {
        case 4:
            return {0, 0, 0, 0, 1, 1, 1, 1};
        case 7:
            return {0, 0, 0, 0, 0.5, 0.5, 0.5, 1, 1, 1, 1};
        case 10:
            return {0, 0, 0, 0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0,
                    2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 1, 1, 1, 1};
        default: {
            std::ostringstream msg;
            msg << "unsupported control-point count " << num_control_points
                << " for the built-in clamped cubic knot vectors (supported: 4, 7, 10)";
            throw ConfigError(msg.str());
        }
    }
}

struct CurveSpec {
    CurveFamily family = CurveFamily::bspline;
    int degree = 3;
    int num_control_points = 10;
    std::vector<double> knots;  // length D + degree + 1 for bspline; empty otherwise

    static CurveSpec bspline(int num_control_points, int degree = 3) {
        CurveSpec spec;
        spec.family = CurveFamily::bspline;
        spec.degree = degree;
        spec.num_control_points = num_control_points;
        if (degree == 3) {
            spec.knots = make_knot_vector(num_control_points);
        } else {
            throw ConfigError("bspline specs with degree != 3 require an explicit knot vector");
        }
        spec.validate();
        return spec;
    }

    static CurveSpec bspline_custom(int num_control_points, int degree, std::vector<double> knots) {
        CurveSpec spec;
        spec.family = CurveFamily::bspline;
        spec.degree = degree;
        spec.num_control_points = num_control_points;
        spec.knots = std::move(knots);
        spec.validate();
        return spec;
    }

    static CurveSpec bezier(int num_control_points) {
        CurveSpec spec;
        spec.family = CurveFamily::bezier;
        spec.num_control_points = num_control_points;
        spec.degree = num_control_points - 1;
        spec.validate();
        return spec;
    }

    // Monomial basis {1, t, ..., t^(D-1)}; D = degree + 1.
    static CurveSpec polynomial(int num_control_points) {
        CurveSpec spec;
        spec.family = CurveFamily::polynomial;
        spec.num_control_points = num_control_points;
        spec.degree = num_control_points - 1;
        spec.validate();
        return spec;
    }

    void validate() const {
        if (num_control_points < 1) throw ConfigError("curve spec needs at least one control point");
        if (degree < 0) throw ConfigError("curve degree must be non-negative");
        switch (family) {
            case CurveFamily::bspline: {
                if (num_control_points < degree + 1)
                    throw ConfigError("bspline needs at least degree+1 control points");
                const std::size_t want = static_cast<std::size_t>(num_control_points + degree + 1);
                if (knots.size() != want)
                    throw ConfigError("bspline knot vector must have D + degree + 1 entries");
                for (std::size_t i = 1; i < knots.size(); ++i)
                    if (knots[i] < knots[i - 1]) throw ConfigError("knots must be non-decreasing");
                for (int i = 0; i <= degree; ++i) {
                    if (knots[static_cast<std::size_t>(i)] != 0.0)
                        throw ConfigError("clamped knot vector must start with degree+1 zeros");
                    if (knots[knots.size() - 1 - static_cast<std::size_t>(i)] != 1.0)
                        throw ConfigError("clamped knot vector must end with degree+1 ones");
                }
                // Internal multiplicity must stay <= degree, otherwise the
                // curve tears apart.
                int run = 1;
                for (std::size_t i = degree + 1; i + degree + 1 < knots.size(); ++i) {
                    run = (knots[i] == knots[i - 1]) ? run + 1 : 1;
                    if (knots[i] > 0.0 && knots[i] < 1.0 && run > degree)
                        throw ConfigError("internal knot multiplicity must not exceed the degree");
                }
                break;
            }
            case CurveFamily::bezier:
            case CurveFamily::polynomial:
                if (degree != num_control_points - 1)
                    throw ConfigError("bezier/polynomial specs require D == degree + 1");
                if (!knots.empty())
                    throw ConfigError("bezier/polynomial specs take no knot vector");
                break;
        }
    }
};

struct BasisWeights {
    std::vector<double> values;  // one weight per control point
    double t = 0.0;
};

namespace detail {

inline void check_t(double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw DomainError("curve parameter t must lie in [0, 1]; extrapolation is a separate operation");
}

// Cox-de Boor, bottom-up over the full zeroth-order table. Zero-denominator
// terms are dropped. The span containing t = 1 is treated as closed on the
// right so the curve interpolates its last control point.
inline void bspline_basis(const CurveSpec& spec, double t, int up_to_degree,
                          std::vector<double>& level) {
    const std::vector<double>& kn = spec.knots;
    const std::size_t m = kn.size();
    const double t_max = kn.back();
    level.assign(m - 1, 0.0);
    for (std::size_t k = 0; k + 1 < m; ++k) {
        if (kn[k] <= t && t < kn[k + 1]) {
            level[k] = 1.0;
        } else if (t == t_max && kn[k] < t && t == kn[k + 1]) {
            level[k] = 1.0;  // closing rule for the final span
        }
    }
    std::vector<double> next;
    for (int d = 1; d <= up_to_degree; ++d) {
        next.assign(m - 1 - static_cast<std::size_t>(d), 0.0);
        for (std::size_t k = 0; k < next.size(); ++k) {
            double acc = 0.0;
            const double den_left = kn[k + d] - kn[k];
            if (den_left > 0.0) acc += (t - kn[k]) / den_left * level[k];
            const double den_right = kn[k + d + 1] - kn[k + 1];
            if (den_right > 0.0) acc += (kn[k + d + 1] - t) / den_right * level[k + 1];
            next[k] = acc;
        }
        level.swap(next);
    }
}

inline std::vector<double> bernstein(int degree, double t) {
    // de Casteljau-style incremental evaluation; exact at the endpoints.
    std::vector<double> b(static_cast<std::size_t>(degree) + 1, 0.0);
    b[0] = 1.0;
    const double u = 1.0 - t;
    for (int d = 1; d <= degree; ++d) {
        b[static_cast<std::size_t>(d)] = t * b[static_cast<std::size_t>(d - 1)];
        for (int k = d - 1; k > 0; --k)
            b[static_cast<std::size_t>(k)] =
                t * b[static_cast<std::size_t>(k - 1)] + u * b[static_cast<std::size_t>(k)];
        b[0] *= u;
    }
    return b;
}

}  // namespace detail

inline BasisWeights basis_eval(const CurveSpec& spec, double t) {
    detail::check_t(t);
    BasisWeights out;
    out.t = t;
    switch (spec.family) {
        case CurveFamily::bspline: {
            std::vector<double> level;
            detail::bspline_basis(spec, t, spec.degree, level);
            out.values.assign(level.begin(),
                              level.begin() + static_cast<std::ptrdiff_t>(spec.num_control_points));
            break;
        }
        case CurveFamily::bezier:
            out.values = detail::bernstein(spec.degree, t);
            break;
        case CurveFamily::polynomial: {
            out.values.resize(static_cast<std::size_t>(spec.num_control_points));
            double power = 1.0;
            for (int k = 0; k < spec.num_control_points; ++k) {
                out.values[static_cast<std::size_t>(k)] = power;
                power *= t;
            }
            break;
        }
    }
    return out;
}

inline std::vector<double> basis_derivative(const CurveSpec& spec, double t) {
    detail::check_t(t);
    std::vector<double> out(static_cast<std::size_t>(spec.num_control_points), 0.0);
    switch (spec.family) {
        case CurveFamily::bspline: {
            // d/dt N_{k,p} = p/(t_{k+p}-t_k) N_{k,p-1} - p/(t_{k+p+1}-t_{k+1}) N_{k+1,p-1}
            if (spec.degree == 0) return out;
            std::vector<double> lower;
            detail::bspline_basis(spec, t, spec.degree - 1, lower);
            const std::vector<double>& kn = spec.knots;
            const double p = static_cast<double>(spec.degree);
            for (int k = 0; k < spec.num_control_points; ++k) {
                const std::size_t ku = static_cast<std::size_t>(k);
                double acc = 0.0;
                const double den_left = kn[ku + static_cast<std::size_t>(spec.degree)] - kn[ku];
                if (den_left > 0.0) acc += p / den_left * lower[ku];
                const double den_right =
                    kn[ku + static_cast<std::size_t>(spec.degree) + 1] - kn[ku + 1];
                if (den_right > 0.0) acc -= p / den_right * lower[ku + 1];
                out[ku] = acc;
            }
            break;
        }
        case CurveFamily::bezier: {
            // d/dt B_{k,d} = d * (B_{k-1,d-1} - B_{k,d-1})
            if (spec.degree == 0) return out;
            const std::vector<double> lower = detail::bernstein(spec.degree - 1, t);
            const double d = static_cast<double>(spec.degree);
            for (int k = 0; k <= spec.degree; ++k) {
                double acc = 0.0;
                if (k > 0) acc += lower[static_cast<std::size_t>(k - 1)];
                if (k < spec.degree) acc -= lower[static_cast<std::size_t>(k)];
                out[static_cast<std::size_t>(k)] = d * acc;
            }
            break;
        }
        case CurveFamily::polynomial: {
            double power = 1.0;
            for (int k = 1; k < spec.num_control_points; ++k) {
                out[static_cast<std::size_t>(k)] = static_cast<double>(k) * power;
                power *= t;
            }
            break;
        }
    }
    return out;
}

// Single accumulation path shared by every curve/field query. Plain ordered
// summation keeps the clamped endpoint identities bitwise exact: at t = 0 the
// weights are exactly {1, 0, ..., 0}.
inline Vec3 accumulate_weighted(std::span<const Vec3> points, std::span<const double> weights) {
    if (points.size() != weights.size())
        throw ShapeError("control-point count does not match the basis weight count");
    Vec3 acc = Vec3::Zero();
    for (std::size_t k = 0; k < points.size(); ++k) acc += weights[k] * points[k];
    return acc;
}

inline Vec3 eval_curve(std::span<const Vec3> points, const CurveSpec& spec, double t) {
    if (points.size() != static_cast<std::size_t>(spec.num_control_points))
        throw ShapeError("eval_curve: control-point count does not match the curve spec");
    const BasisWeights w = basis_eval(spec, t);
    return accumulate_weighted(points, w.values);
}

inline Vec3 eval_curve_velocity(std::span<const Vec3> points, const CurveSpec& spec, double t) {
    if (points.size() != static_cast<std::size_t>(spec.num_control_points))
        throw ShapeError("eval_curve_velocity: control-point count does not match the curve spec");
    const std::vector<double> w = basis_derivative(spec, t);
    return accumulate_weighted(points, w);
}

}  // namespace trajfield

#endif  // TRAJFIELD_CURVE_HPP
