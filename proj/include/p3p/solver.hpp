#pragma once

#include <cassert>
#include <optional>
#include <vector>

#include "p3p/core.hpp"
#include "p3p/polyroots.hpp"

namespace p3p {

/// The three feature points are (nearly) collinear.
struct DegenerateCollinearFeatures : Error {
    using Error::Error;
};
/// Two bearing measurements (nearly) coincide.
struct DegenerateBearings : Error {
    using Error::Error;
};
/// The baseline direction k1 is (nearly) parallel to the bearing-plane
/// normal k3, so k2 is undefined.
struct DegenerateParallel : Error {
    using Error::Error;
};
/// Bearing 3 lies in the plane of bearings 1 and 2; the sine sign rule
/// cannot decide a branch.
struct SignUndetermined : Error {
    using Error::Error;
};
/// The stacked least-squares system has numerical rank below 6.
struct RankDeficient : Error {
    using Error::Error;
};

/// One P3P problem instance: three world points and the corresponding
/// camera-frame unit bearings.
struct FeatureTriad {
    Vec3 p1, p2, p3;
    UnitVec3 b1, b2, b3;
};

enum class PositionMethod { direct, least_squares };

struct SolverOptions {
    int polish_iters = kDefaultPolishIters;
    PositionMethod position_method = PositionMethod::direct;
    double degeneracy_eps = 1e-9;  ///< cutoff on normalized cross-product magnitudes
};

/// Everything the solver precomputes once per problem instance.
struct IntermediateFrame {
    UnitVec3 k1, k2, k3, k3pp;
    Vec3 u1, u2, v1, v2;
    double delta;
    double f11, f21, f22, f13, f23, f24, f15, f25;
    double g1, g2, g3, g4, g5, g6, g7;
    RotMat Cbar;     ///< columns (k1, k3'', k1 x k3'')
    RotMat Cbarbar;  ///< rows (b1, k3, b1 x k3)
};

/// One candidate camera pose.
struct PoseSolution {
    RotMat rotation;  ///< camera-to-global
    Vec3 position;    ///< camera center in the global frame
    double cos_t1p, sin_t1p;
    double d3;  ///< distance from the camera to feature 3; > 0 for valid poses

    /// The opposite (world-to-camera) rotation convention.
    RotMat world_to_camera_rotation() const { return rotation.transposed(); }
};

enum class Degeneracy { none, bearings, collinear_features, parallel };

/// Classify the instance against the frame-construction preconditions.
/// All cutoffs apply to normalized cross-product magnitudes.
inline Degeneracy classify_triad(const FeatureTriad& t, double eps) {
    if (t.b1.cross(t.b2).norm() <= eps || t.b1.cross(t.b3).norm() <= eps ||
        t.b2.cross(t.b3).norm() <= eps)
        return Degeneracy::bearings;
    const Vec3 u1 = t.p1 - t.p3;
    const UnitVec3 k1 = UnitVec3::normalized(t.p1 - t.p2);
    if (u1.cross(k1).norm() <= eps * u1.norm()) return Degeneracy::collinear_features;
    const UnitVec3 k3 = UnitVec3::normalized(t.b1.cross(t.b2));
    if (k1.cross(k3).norm() <= eps) return Degeneracy::parallel;
    return Degeneracy::none;
}

/// Build the intermediate frame: the orthogonal direction triple
/// (k1, k2, k3), the auxiliary axis k3'', and the scalar coefficients
/// feeding the quartic. Throws the matching degeneracy error when the
/// instance is singular.
inline IntermediateFrame build_frame(const FeatureTriad& t, double eps = SolverOptions{}.degeneracy_eps) {
    if (!t.p1.finite() || !t.p2.finite() || !t.p3.finite())
        throw InvalidInput("build_frame: non-finite feature position");
    if ((t.p1 - t.p2).norm() <= eps || (t.p1 - t.p3).norm() <= eps || (t.p2 - t.p3).norm() <= eps)
        throw InvalidInput("build_frame: feature positions are not pairwise distinct");

    switch (classify_triad(t, eps)) {
        case Degeneracy::bearings:
            throw DegenerateBearings("build_frame: two bearings (nearly) coincide");
        case Degeneracy::collinear_features:
            throw DegenerateCollinearFeatures("build_frame: feature points (nearly) collinear");
        case Degeneracy::parallel:
            throw DegenerateParallel("build_frame: k1 (nearly) parallel to k3");
        case Degeneracy::none:
            break;
    }

    const Vec3 u1 = t.p1 - t.p3;
    const Vec3 u2 = t.p2 - t.p3;
    const UnitVec3 k1 = UnitVec3::normalized(t.p1 - t.p2);
    const Vec3 b1xb2 = t.b1.cross(t.b2);
    const UnitVec3 k3 = UnitVec3::normalized(b1xb2);
    const UnitVec3 k2 = UnitVec3::normalized(k1.cross(k3));
    const Vec3 v1 = t.b1.cross(t.b3);
    const Vec3 v2 = t.b2.cross(t.b3);

    const Vec3 u1xk1 = u1.cross(k1);
    const double delta = u1xk1.norm();
    const UnitVec3 k3pp(u1xk1 / delta, UnitVec3::unchecked_tag{});

    const double kb3 = k3.dot(t.b3);
    const double b12 = t.b1.dot(t.b2);
    const double nb12 = b1xb2.norm();
    const double u1k1 = u1.dot(k1);
    const double u2k1 = u2.dot(k1);

    IntermediateFrame fr{
        k1, k2, k3, k3pp, u1, u2, v1, v2, delta,
        /*f11=*/delta * kb3,
        /*f21=*/delta * b12 * kb3,
        /*f22=*/delta * kb3 * nb12,
        /*f13=*/delta * v1.dot(k3),
        /*f23=*/delta * v2.dot(k3),
        /*f24=*/u2k1 * kb3 * nb12,
        /*f15=*/-u1k1 * kb3,
        /*f25=*/-u2k1 * b12 * kb3,
        0, 0, 0, 0, 0, 0, 0,
        RotMat(Mat3::from_columns(k1, k3pp, k1.cross(k3pp)), RotMat::unchecked_tag{}),
        RotMat(Mat3::from_rows(t.b1, k3, t.b1.cross(k3)), RotMat::unchecked_tag{})};

    fr.g1 = fr.f13 * fr.f22;
    fr.g2 = detail::diff_of_products(fr.f13, fr.f25, fr.f15, fr.f23);
    fr.g3 = detail::diff_of_products(fr.f11, fr.f23, fr.f13, fr.f21);
    fr.g4 = -fr.f13 * fr.f24;
    fr.g5 = fr.f11 * fr.f22;
    fr.g6 = detail::diff_of_products(fr.f11, fr.f25, fr.f15, fr.f21);
    fr.g7 = -fr.f15 * fr.f24;
    return fr;
}

namespace detail {

/// Neumaier-compensated sum of exact products.
class ProductSum {
public:
    void add(double a, double b) {
        const double p = a * b;
        err_ += std::fma(a, b, -p);
        const double t = sum_ + p;
        err_ += (std::abs(sum_) >= std::abs(p)) ? (sum_ - t) + p : (p - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + err_; }

private:
    double sum_ = 0, err_ = 0;
};

}  // namespace detail

/// Quartic in cos(theta1') whose real roots select the candidate poses.
/// Coefficients are assembled with compensated products; the cancellations
/// here otherwise dominate the solver's error at nearly multiple roots.
inline QuarticPoly quartic_from_frame(const IntermediateFrame& fr) {
    detail::ProductSum a0, a1, a2, a3, a4;
    a4.add(fr.g5, fr.g5);
    a4.add(fr.g1, fr.g1);
    a4.add(fr.g3, fr.g3);
    a3.add(fr.g5, fr.g6);
    a3.add(fr.g1, fr.g2);
    a3.add(fr.g3, fr.g4);
    a2.add(fr.g6, fr.g6);
    a2.add(2.0 * fr.g5, fr.g7);
    a2.add(fr.g2, fr.g2);
    a2.add(fr.g4, fr.g4);
    a2.add(-fr.g1, fr.g1);
    a2.add(-fr.g3, fr.g3);
    a1.add(fr.g6, fr.g7);
    a1.add(-fr.g1, fr.g2);
    a1.add(-fr.g3, fr.g4);
    a0.add(fr.g7, fr.g7);
    a0.add(-fr.g2, fr.g2);
    a0.add(-fr.g4, fr.g4);
    return {{a0.value(), 2.0 * a1.value(), a2.value(), 2.0 * a3.value(), a4.value()}};
}

/// Sign of sin(theta1') for physically valid (positive-depth) poses:
/// the sign of k3 . b3. Throws SignUndetermined when bearing 3 lies in
/// the plane spanned by bearings 1 and 2.
inline int sign_of_sin_theta1(const IntermediateFrame& fr, const UnitVec3& b3,
                              double eps = SolverOptions{}.degeneracy_eps) {
    const double kb3 = fr.k3.dot(b3);
    if (std::abs(kb3) <= eps)
        throw SignUndetermined("sign_of_sin_theta1: bearing 3 in the span of bearings 1 and 2");
    return kb3 > 0 ? 1 : -1;
}

struct TrigPair {
    double cos_v, sin_v;
};

/// cos/sin of theta3' for a candidate root:
///   [cos, sin] = sin(theta1') (g1 c + g2, g3 c + g4) / (g5 c^2 + g6 c + g7)
/// renormalized to unit length. Returns nullopt (candidate discarded) when
/// the denominator vanishes relative to the g scale or the numerator cannot
/// be normalized (sin(theta1') = 0).
///
/// When the numerator direction degenerates (its norm falls orders of
/// magnitude below the g scale), the same angle is recovered instead from
/// the underlying 2x2 linear system under the unit-circle constraint, which
/// stays conditioned by the f-row norms rather than by the vanishing
/// numerator.
inline std::optional<TrigPair> theta3_from_theta1(const IntermediateFrame& fr, double cos_t1p,
                                                  double sin_t1p) {
    const double den = (fr.g5 * cos_t1p + fr.g6) * cos_t1p + fr.g7;
    const double gmax = std::max({std::abs(fr.g1), std::abs(fr.g2), std::abs(fr.g3),
                                  std::abs(fr.g4), std::abs(fr.g5), std::abs(fr.g6),
                                  std::abs(fr.g7)});
    if (std::abs(den) <= 1e-14 * gmax) return std::nullopt;
    if (!(std::abs(sin_t1p) > 0)) return std::nullopt;

    const double n0x = fr.g1 * cos_t1p + fr.g2;
    const double n0y = fr.g3 * cos_t1p + fr.g4;
    const double nn0 = std::hypot(n0x, n0y);

    if (nn0 > 1e-3 * gmax) {
        const double nx = sin_t1p * n0x;
        const double ny = sin_t1p * n0y;
        const double nn = std::hypot(nx, ny);
        if (!(nn > 0)) return std::nullopt;
        // nx, ny are proportional to den at a root, so this division is benign
        const double scale = 1.0 / (nn * (den < 0 ? -1.0 : 1.0));
        return TrigPair{nx * scale, ny * scale};
    }

    // circle-constrained solve of the two rows
    //   (f11 c) cos + (f15) sin = f13 s1
    //   (f21 c + f24) cos + (f22 c + f25) sin = f23 s1
    const double rows[2][3] = {
        {fr.f11 * cos_t1p, fr.f15, fr.f13 * sin_t1p},
        {fr.f21 * cos_t1p + fr.f24, fr.f22 * cos_t1p + fr.f25, fr.f23 * sin_t1p}};
    const int main_row =
        std::hypot(rows[0][0], rows[0][1]) >= std::hypot(rows[1][0], rows[1][1]) ? 0 : 1;
    const double a1 = rows[main_row][0], a2 = rows[main_row][1], beta = rows[main_row][2];
    const double an2 = a1 * a1 + a2 * a2;
    if (!(an2 > 0)) return std::nullopt;
    const double disc = std::max(0.0, an2 - beta * beta);
    const double tq = std::sqrt(disc);
    const TrigPair cand[2] = {{(beta * a1 - a2 * tq) / an2, (beta * a2 + a1 * tq) / an2},
                              {(beta * a1 + a2 * tq) / an2, (beta * a2 - a1 * tq) / an2}};
    const int other = 1 - main_row;
    const auto other_residual = [&](const TrigPair& tp) {
        return std::abs(rows[other][0] * tp.cos_v + rows[other][1] * tp.sin_v - rows[other][2]);
    };
    return other_residual(cand[0]) <= other_residual(cand[1]) ? cand[0] : cand[1];
}

/// Camera-to-global rotation Cbar * C(e1, theta1') * C(e2, theta3') * Cbarbar
/// with the middle product expanded analytically.
inline RotMat assemble_rotation(const IntermediateFrame& fr, double cos_t1p, double sin_t1p,
                                double cos_t3p, double sin_t3p) {
    const double c1 = cos_t1p, s1 = sin_t1p, c3 = cos_t3p, s3 = sin_t3p;
    const Mat3 mid{{c3, 0, -s3,
                    s1 * s3, c1, s1 * c3,
                    c1 * s3, -s1, c1 * c3}};
    return RotMat(fr.Cbar.matrix() * mid * fr.Cbarbar.matrix(), RotMat::unchecked_tag{});
}

struct PositionDepth {
    Vec3 position;
    double d3;
};

/// Camera position from feature 3 alone: p3 - d3 C b3 with
/// d3 = delta sin(theta1') / (k3 . b3).
inline PositionDepth position_direct(const IntermediateFrame& fr, const RotMat& rotation,
                                     double sin_t1p, const FeatureTriad& t) {
    const double d3 = fr.delta * sin_t1p / fr.k3.dot(t.b3);
    return {t.p3 - rotation * t.b3.vec() * d3, d3};
}

/// Least-squares camera position from all three features: solve the stacked
/// 9x6 system in (d1, d2, d3, p_C) by Householder QR and back-substitution,
/// returning p_C. Throws RankDeficient when the numerical rank drops below 6.
inline Vec3 position_least_squares(const RotMat& rotation, const FeatureTriad& t) {
    double A[9][6] = {};
    double rhs[9];
    const Vec3 rb[3] = {rotation * t.b1.vec(), rotation * t.b2.vec(), rotation * t.b3.vec()};
    const Vec3 ps[3] = {t.p1, t.p2, t.p3};
    for (int i = 0; i < 3; ++i) {
        for (int r = 0; r < 3; ++r) {
            A[3 * i + r][i] = rb[i][r];
            A[3 * i + r][3 + r] = 1.0;
            rhs[3 * i + r] = ps[i][r];
        }
    }

    // Householder QR, overwriting A and rhs
    double diag[6];
    for (int k = 0; k < 6; ++k) {
        double nrm = 0;
        for (int i = k; i < 9; ++i) nrm = std::hypot(nrm, A[i][k]);
        if (A[k][k] < 0) nrm = -nrm;
        if (nrm != 0) {
            for (int i = k; i < 9; ++i) A[i][k] /= nrm;
            A[k][k] += 1.0;
            for (int j = k + 1; j < 6; ++j) {
                double s = 0;
                for (int i = k; i < 9; ++i) s += A[i][k] * A[i][j];
                s /= -A[k][k];
                for (int i = k; i < 9; ++i) A[i][j] += s * A[i][k];
            }
            double s = 0;
            for (int i = k; i < 9; ++i) s += A[i][k] * rhs[i];
            s /= -A[k][k];
            for (int i = k; i < 9; ++i) rhs[i] += s * A[i][k];
        }
        diag[k] = -nrm;
    }

    double dmax = 0;
    for (double v : diag) dmax = std::max(dmax, std::abs(v));
    for (double v : diag)
        if (std::abs(v) <= 1e-12 * dmax)
            throw RankDeficient("position_least_squares: stacked system rank < 6");

    double x[6];
    for (int k = 5; k >= 0; --k) {
        double s = rhs[k];
        for (int j = k + 1; j < 6; ++j) s -= A[k][j] * x[j];
        x[k] = s / diag[k];
    }
    return {x[3], x[4], x[5]};
}

/// Solve the P3P instance: 0 to 4 candidate poses, ordered by ascending
/// cos(theta1'). Candidates with undefined theta3' or non-positive depth are
/// dropped; frame degeneracies and an undetermined sine sign propagate as
/// exceptions.
///
/// sin(theta1') is recovered from the root as |g5 c^2 + g6 c + g7| /
/// |(g1 c + g2, g3 c + g4)| with the sign rule applied. At a root of the
/// quartic this equals sqrt(1 - c^2) exactly, but it does not square the
/// root error when |c| is close to 1, which keeps the poses accurate when
/// bearing 3 approaches the plane of bearings 1 and 2.
inline std::vector<PoseSolution> solve(const FeatureTriad& t, const SolverOptions& opts = {}) {
    const IntermediateFrame fr = build_frame(t, opts.degeneracy_eps);
    const QuarticPoly quartic = quartic_from_frame(fr);
    RealRoots roots = solve_quartic(quartic);
    if (opts.polish_iters > 0) roots = polish_roots(quartic, roots, opts.polish_iters);

    const int sgn = sign_of_sin_theta1(fr, t.b3, opts.degeneracy_eps);

    std::vector<PoseSolution> out;
    out.reserve(roots.size());
    for (double c : roots) {
        const double den = (fr.g5 * c + fr.g6) * c + fr.g7;
        const double nn = std::hypot(fr.g1 * c + fr.g2, fr.g3 * c + fr.g4);
        if (!(nn > 0)) continue;
        double s1 = sgn * std::abs(den) / nn;
        // a genuine root gives c^2 + s1^2 = 1 up to the quartic's residual;
        // roots tangent to the |c| = 1 boundary can overshoot it by the
        // square root of that residual and get projected back, while roots
        // far off the circle are numerical debris. Already-consistent pairs
        // are kept untouched: near a vanishing theta3 numerator the
        // projection would trade root accuracy away exactly where the
        // theta3 direction amplifies it most.
        const double nrm = std::hypot(c, s1);
        if (std::abs(nrm - 1.0) > 1e-3) continue;
        if (std::abs(nrm - 1.0) > 5e-11) {
            c /= nrm;
            s1 /= nrm;
        }

        const auto t3 = theta3_from_theta1(fr, c, s1);
        if (!t3) continue;
        const RotMat rot = assemble_rotation(fr, c, s1, t3->cos_v, t3->sin_v);

        const PositionDepth pd = position_direct(fr, rot, s1, t);
        if (!(pd.d3 > 0)) {
            assert(pd.d3 > 0 && "sign rule should exclude non-positive depths");
            continue;
        }
        // the sign rule fixes d3 > 0 only; algebraic roots can still place
        // feature 1 or 2 behind the camera, so check their implied depths
        if (!((t.p1 - pd.position).dot(rot * t.b1.vec()) > 0) ||
            !((t.p2 - pd.position).dot(rot * t.b2.vec()) > 0))
            continue;
        Vec3 pos = pd.position;
        if (opts.position_method == PositionMethod::least_squares) {
            try {
                pos = position_least_squares(rot, t);
            } catch (const RankDeficient&) {
                continue;
            }
        }
        out.push_back(PoseSolution{rot, pos, c, s1, pd.d3});
    }
    return out;
}

}  // namespace p3p
