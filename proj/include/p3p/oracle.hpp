#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "p3p/core.hpp"
#include "p3p/polyroots.hpp"
#include "p3p/solver.hpp"

namespace p3p {

/// Constraint and reprojection residuals of a candidate pose.
struct ResidualReport {
    double c12, c13, c23;           ///< (p_i - p_j) . C (b_i x b_j)
    std::array<double, 3> reproj;   ///< | normalize(C^T (p_i - p_C)) - b_i |
};

namespace detail {

constexpr int kHqrMaxN = 4;
using SmallMat = std::array<std::array<double, kHqrMaxN>, kHqrMaxN>;

/// Parlett-Reinsch balancing with powers of two (exact similarity scaling).
inline void balance(SmallMat& h, int n) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (int i = 0; i < n; ++i) {
            double rn = 0, cn = 0;
            for (int j = 0; j < n; ++j) {
                if (j != i) {
                    rn += std::abs(h[i][j]);
                    cn += std::abs(h[j][i]);
                }
            }
            if (rn == 0 || cn == 0) continue;
            int exp2 = 0;
            std::frexp(rn / cn, &exp2);
            exp2 /= 2;
            if (exp2 != 0) {
                const double up = std::ldexp(1.0, exp2);
                if (std::ldexp(cn, exp2) + std::ldexp(rn, -exp2) < 0.95 * (cn + rn)) {
                    changed = true;
                    for (int j = 0; j < n; ++j) h[i][j] /= up;
                    for (int j = 0; j < n; ++j) h[j][i] *= up;
                }
            }
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by the implicit double-shift
/// (Francis) QR iteration with deflation and occasional exceptional shifts.
inline std::array<std::complex<double>, kHqrMaxN> hessenberg_eigenvalues(SmallMat h, int n) {
    std::array<std::complex<double>, kHqrMaxN> eig{};
    const double eps = std::numeric_limits<double>::epsilon();
    double anorm = 0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(h[i][j]);

    int nn = n - 1;
    double t = 0;
    int its = 0;
    while (nn >= 0) {
        // locate a negligible subdiagonal entry
        int l = nn;
        for (; l >= 1; --l) {
            double s = std::abs(h[l - 1][l - 1]) + std::abs(h[l][l]);
            if (s == 0) s = anorm;
            if (std::abs(h[l][l - 1]) <= eps * s) {
                h[l][l - 1] = 0;
                break;
            }
        }

        double x = h[nn][nn];
        if (l == nn) {  // single eigenvalue
            eig[nn--] = x + t;
            its = 0;
            continue;
        }
        double y = h[nn - 1][nn - 1];
        double w = h[nn][nn - 1] * h[nn - 1][nn];
        if (l == nn - 1) {  // 2x2 block
            double pp = 0.5 * (y - x);
            double qq = pp * pp + w;
            double zz = std::sqrt(std::abs(qq));
            x += t;
            if (qq >= 0) {
                zz = pp + std::copysign(zz, pp);
                eig[nn - 1] = eig[nn] = x + zz;
                if (zz != 0) eig[nn] = x - w / zz;
            } else {
                eig[nn - 1] = {x + pp, zz};
                eig[nn] = {x + pp, -zz};
            }
            nn -= 2;
            its = 0;
            continue;
        }

        if (its == 30)
            throw Error("hessenberg_eigenvalues: QR iteration failed to converge");
        double pp = 0, qq = 0, rr = 0, zz = 0;
        if (its == 10 || its == 20) {  // exceptional shift
            t += x;
            for (int i = 0; i <= nn; ++i) h[i][i] -= x;
            const double s = std::abs(h[nn][nn - 1]) + std::abs(h[nn - 1][nn - 2]);
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
        }
        ++its;

        int m = nn - 2;
        for (; m >= l; --m) {  // two consecutive small subdiagonals
            zz = h[m][m];
            const double r = x - zz;
            double s = y - zz;
            pp = (r * s - w) / h[m + 1][m] + h[m][m + 1];
            qq = h[m + 1][m + 1] - zz - r - s;
            rr = h[m + 2][m + 1];
            s = std::abs(pp) + std::abs(qq) + std::abs(rr);
            pp /= s;
            qq /= s;
            rr /= s;
            if (m == l) break;
            const double u = std::abs(h[m][m - 1]) * (std::abs(qq) + std::abs(rr));
            const double v = std::abs(pp) * (std::abs(h[m - 1][m - 1]) + std::abs(zz) +
                                             std::abs(h[m + 1][m + 1]));
            if (u <= eps * v) break;
        }
        for (int i = m + 2; i <= nn; ++i) {
            h[i][i - 2] = 0;
            if (i != m + 2) h[i][i - 3] = 0;
        }
        for (int k = m; k <= nn - 1; ++k) {  // double QR step, bulge chasing
            if (k != m) {
                pp = h[k][k - 1];
                qq = h[k + 1][k - 1];
                rr = (k != nn - 1) ? h[k + 2][k - 1] : 0.0;
                x = std::abs(pp) + std::abs(qq) + std::abs(rr);
                if (x != 0) {
                    pp /= x;
                    qq /= x;
                    rr /= x;
                }
            }
            const double s = std::copysign(std::sqrt(pp * pp + qq * qq + rr * rr), pp);
            if (s == 0) continue;
            if (k == m) {
                if (l != m) h[k][k - 1] = -h[k][k - 1];
            } else {
                h[k][k - 1] = -s * x;
            }
            pp += s;
            x = pp / s;
            y = qq / s;
            zz = rr / s;
            qq /= pp;
            rr /= pp;
            for (int j = k; j <= nn; ++j) {
                pp = h[k][j] + qq * h[k + 1][j];
                if (k != nn - 1) {
                    pp += rr * h[k + 2][j];
                    h[k + 2][j] -= pp * zz;
                }
                h[k + 1][j] -= pp * y;
                h[k][j] -= pp * x;
            }
            const int mmin = nn < k + 3 ? nn : k + 3;
            for (int i = l; i <= mmin; ++i) {
                pp = x * h[i][k] + y * h[i][k + 1];
                if (k != nn - 1) {
                    pp += zz * h[i][k + 2];
                    h[i][k + 2] -= pp * rr;
                }
                h[i][k + 1] -= pp * qq;
                h[i][k] -= pp;
            }
        }
    }
    return eig;
}

}  // namespace detail

/// Real roots of the quartic via the eigenvalues of its companion matrix,
/// computed by an in-module shifted-QR iteration. Eigenvalues with
/// |imag| <= 1e-8 count as real. Independent of solve_quartic's Ferrari path.
inline RealRoots companion_roots(const QuarticPoly& p) {
    const auto& al = p.alpha;
    double mx = 0;
    for (double v : al) mx = std::max(mx, std::abs(v));
    if (!(mx > 0) || !std::isfinite(mx) || std::abs(al[4]) <= tol::lead * mx)
        throw InvalidPolynomial("companion_roots: zero leading coefficient");

    detail::SmallMat h{};
    for (int i = 0; i < 4; ++i) h[i][3] = -al[i] / al[4];
    h[1][0] = h[2][1] = h[3][2] = 1.0;

    detail::balance(h, 4);
    const auto eig = detail::hessenberg_eigenvalues(h, 4);

    double buf[4];
    int n = 0;
    for (const auto& e : eig)
        if (std::abs(e.imag()) <= 1e-8) buf[n++] = e.real();
    std::sort(buf, buf + n);
    RealRoots out;
    for (int i = 0; i < n; ++i) out.push(buf[i]);
    return out;
}

/// One solution of the distance-based reference solver.
struct GrunertSolution {
    double d1, d2, d3;
    PoseSolution pose;
};

namespace detail {

/// Frame-angle read-off used to fill the trig pair of reference poses:
/// with Cbar = (k1 | k3'' | k1 x k3'') and Cbarbar = (b1, k3, b1 x k3)^T
/// built from the instance, Cbar^T C Cbarbar^T = C(e1,t1') C(e2,t3').
struct FrameAngles {
    double c1, s1, c3, s3;
};

inline FrameAngles frame_angles(const FeatureTriad& t, const RotMat& c) {
    const UnitVec3 k1 = UnitVec3::normalized(t.p1 - t.p2);
    const UnitVec3 k3 = UnitVec3::normalized(t.b1.cross(t.b2));
    const UnitVec3 k3pp = UnitVec3::normalized((t.p1 - t.p3).cross(k1));
    const Mat3 cbar = Mat3::from_columns(k1, k3pp, k1.cross(k3pp));
    const Mat3 cbb = Mat3::from_rows(t.b1, k3, t.b1.cross(k3));
    const Mat3 m = cbar.transposed() * c.matrix() * cbb.transposed();
    FrameAngles fa{m(1, 1), -m(2, 1), m(0, 0), -m(0, 2)};
    const double n1 = std::hypot(fa.c1, fa.s1);
    const double n3 = std::hypot(fa.c3, fa.s3);
    fa.c1 /= n1;
    fa.s1 /= n1;
    fa.c3 /= n3;
    fa.s3 /= n3;
    return fa;
}

}  // namespace detail

/// Classical distance-first P3P reference: law-of-cosines system in the
/// feature distances, reduced to a quartic in the ratio d3/d1, solved with
/// the closed-form quartic solver; the rotation then comes from aligning the
/// two point triads with a cross-product orthonormal basis (exact for three
/// correspondences) and the position from averaging the per-feature
/// estimates. Deliberately plain: this is verification machinery.
inline std::vector<GrunertSolution> grunert_reference(const FeatureTriad& t) {
    const IntermediateFrame fr = build_frame(t);  // reuses the degeneracy gate
    (void)fr;

    const double a = (t.p2 - t.p3).norm();
    const double b = (t.p1 - t.p3).norm();
    const double c = (t.p1 - t.p2).norm();
    const double cos_a = t.b2.dot(t.b3);  // angle opposite side a, etc.
    const double cos_b = t.b1.dot(t.b3);
    const double cos_g = t.b1.dot(t.b2);

    // with d2 = u d1, d3 = v d1 and Q(v) = 1 + v^2 - 2 v cos_b:
    //   (a^2/b^2) Q = u^2 + v^2 - 2 u v cos_a          (I)
    //   (c^2/b^2) Q = 1 + u^2 - 2 u cos_g              (II)
    // (I) - (II) is linear in u: u = N(v)/D(v); substituting into (II) and
    // clearing D^2 yields the quartic P(v).
    const double s = (a * a - c * c) / (b * b);
    const double cb2 = (c * c) / (b * b);
    const std::array<double, 3> Q{1.0, -2.0 * cos_b, 1.0};          // by power of v
    const std::array<double, 3> N{1.0 + s, -2.0 * s * cos_b, s - 1.0};
    const std::array<double, 2> D{2.0 * cos_g, -2.0 * cos_a};

    std::array<double, 5> P{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) P[i + j] += N[i] * N[j];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) P[i + j] -= 2.0 * cos_g * N[i] * D[j];
    std::array<double, 3> DD{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) DD[i + j] += D[i] * D[j];
    for (int i = 0; i < 3; ++i) P[i] += DD[i];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) P[i + j] -= cb2 * DD[i] * Q[j];

    const QuarticPoly quartic{{P[0], P[1], P[2], P[3], P[4]}};
    RealRoots roots = solve_quartic(quartic);
    roots = polish_roots(quartic, roots, 8);

    const auto eval = [](const auto& poly, double x) {
        double r = 0;
        for (int i = int(poly.size()) - 1; i >= 0; --i) r = r * x + poly[std::size_t(i)];
        return r;
    };

    std::vector<GrunertSolution> out;
    for (double v : roots) {
        if (!(v > 0)) continue;
        const double Qv = eval(Q, v);
        if (!(Qv > 0)) continue;
        const double Dv = eval(D, v);
        double u;
        if (std::abs(Dv) > 1e-9 * (std::abs(D[0]) + std::abs(D[1] * v))) {
            u = eval(N, v) / Dv;
        } else {
            // (I)-(II) is ill-conditioned for u; fall back to (II) and keep
            // the branch that better satisfies (I)
            double cand[2];
            if (detail::monic_quadratic_real(-2.0 * cos_g, 1.0 - cb2 * Qv, 0.0, cand) == 0) continue;
            const auto res1 = [&](double uu) {
                return std::abs(uu * uu + v * v - 2 * uu * v * cos_a - (a * a / (b * b)) * Qv);
            };
            u = res1(cand[0]) <= res1(cand[1]) ? cand[0] : cand[1];
        }
        if (!(u > 0)) continue;
        double d1 = b / std::sqrt(Qv);
        double d2 = u * d1;
        double d3 = v * d1;

        // refine the distance triple on the law-of-cosines system itself;
        // quartic roots near a double root otherwise carry their error into
        // the recovered pose
        const double scale = std::max({a * a, b * b, c * c});
        for (int it = 0; it < 3; ++it) {
            const double f1 = d2 * d2 + d3 * d3 - 2 * d2 * d3 * cos_a - a * a;
            const double f2 = d1 * d1 + d3 * d3 - 2 * d1 * d3 * cos_b - b * b;
            const double f3 = d1 * d1 + d2 * d2 - 2 * d1 * d2 * cos_g - c * c;
            if (std::max({std::abs(f1), std::abs(f2), std::abs(f3)}) <= 1e-14 * scale) break;
            const Mat3 jac{{0.0, 2 * (d2 - d3 * cos_a), 2 * (d3 - d2 * cos_a),
                            2 * (d1 - d3 * cos_b), 0.0, 2 * (d3 - d1 * cos_b),
                            2 * (d1 - d2 * cos_g), 2 * (d2 - d1 * cos_g), 0.0}};
            const double det = jac.determinant();
            if (std::abs(det) < 1e-12 * scale) break;
            // Cramer solve of jac * step = -f
            Mat3 m1 = jac, m2 = jac, m3 = jac;
            for (int rr = 0; rr < 3; ++rr) {
                const double fv = rr == 0 ? f1 : rr == 1 ? f2 : f3;
                m1(rr, 0) = -fv;
                m2(rr, 1) = -fv;
                m3(rr, 2) = -fv;
            }
            d1 += m1.determinant() / det;
            d2 += m2.determinant() / det;
            d3 += m3.determinant() / det;
        }
        if (!(d1 > 0) || !(d2 > 0) || !(d3 > 0)) continue;
        // spurious branch picks fail by a wide margin; true solutions refine
        // to rounding level
        const double r1 = d2 * d2 + d3 * d3 - 2 * d2 * d3 * cos_a - a * a;
        const double r2 = d1 * d1 + d3 * d3 - 2 * d1 * d3 * cos_b - b * b;
        const double r3 = d1 * d1 + d2 * d2 - 2 * d1 * d2 * cos_g - c * c;
        if (std::max({std::abs(r1), std::abs(r2), std::abs(r3)}) > 1e-8 * scale) continue;

        // camera-frame feature positions
        const Vec3 x1 = t.b1.vec() * d1;
        const Vec3 x2 = t.b2.vec() * d2;
        const Vec3 x3 = t.b3.vec() * d3;
        // exact three-point alignment: match orthonormal triads built from
        // the difference vectors on both sides
        const UnitVec3 w1 = UnitVec3::normalized(t.p1 - t.p3);
        const UnitVec3 w2 = UnitVec3::normalized(w1.cross(t.p2 - t.p3));
        const Vec3 w3 = w1.cross(w2);
        const UnitVec3 m1 = UnitVec3::normalized(x1 - x3);
        const UnitVec3 m2 = UnitVec3::normalized(m1.cross(x2 - x3));
        const Vec3 m3 = m1.cross(m2);
        const Mat3 rot = Mat3::from_columns(w1, w2, w3) * Mat3::from_columns(m1, m2, m3).transposed();
        const RotMat rotation(rot, RotMat::unchecked_tag{});

        Vec3 pos{0, 0, 0};
        pos += (t.p1 - rotation * x1);
        pos += (t.p2 - rotation * x2);
        pos += (t.p3 - rotation * x3);
        pos = pos / 3.0;

        const auto fa = detail::frame_angles(t, rotation);
        out.push_back({d1, d2, d3, PoseSolution{rotation, pos, fa.c1, fa.s1, d3}});
    }
    return out;
}

/// Evaluate the three pairwise orthogonality residuals and the per-feature
/// reprojection mismatches of a candidate pose.
inline ResidualReport check_pose(const FeatureTriad& t, const PoseSolution& s) {
    const auto residual = [&](const Vec3& pi, const Vec3& pj, const UnitVec3& bi,
                              const UnitVec3& bj) {
        return (pi - pj).dot(s.rotation * bi.cross(bj));
    };
    const auto reproj = [&](const Vec3& p, const UnitVec3& b) {
        const Vec3 dir = s.rotation.transposed() * (p - s.position);
        return (dir / dir.norm() - b.vec()).norm();
    };
    return {residual(t.p1, t.p2, t.b1, t.b2),
            residual(t.p1, t.p3, t.b1, t.b3),
            residual(t.p2, t.p3, t.b2, t.b3),
            {reproj(t.p1, t.b1), reproj(t.p2, t.b2), reproj(t.p3, t.b3)}};
}

}  // namespace p3p
