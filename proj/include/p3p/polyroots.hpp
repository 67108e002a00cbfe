#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "p3p/core.hpp"

namespace p3p {

/// Polynomial input has no usable coefficients (all zero / non-finite).
struct InvalidPolynomial : Error {
    using Error::Error;
};

namespace tol {
inline constexpr double lead = 1e-12;    ///< relative leading-coefficient cutoff for degree demotion
inline constexpr double imag = 1e-10;    ///< |imag| below which a conjugate pair counts as a real double root
inline constexpr double accept = 1e-8;   ///< relative residual bound a returned root is expected to meet
inline constexpr double deriv = 1e-14;   ///< |p'(r)| below which a Newton step is skipped
inline constexpr double dedup = 1e-10;   ///< roots closer than this are merged to their mean
}  // namespace tol

inline constexpr int kDefaultPolishIters = 2;

/// Quartic alpha_4 x^4 + ... + alpha_0; alpha[j] is the coefficient of x^j.
struct QuarticPoly {
    std::array<double, 5> alpha{};
};

/// Up to four real roots in ascending order.
struct RealRoots {
    std::array<double, 4> values{};
    int count = 0;

    void push(double r) { values[count++] = r; }
    double operator[](int i) const { return values[i]; }
    int size() const { return count; }
    const double* begin() const { return values.data(); }
    const double* end() const { return values.data() + count; }
};

namespace detail {

/// a*b - c*d with one fma-based correction (Kahan); accurate even under
/// heavy cancellation.
inline double diff_of_products(double a, double b, double c, double d) {
    const double w = c * d;
    const double e = std::fma(c, d, -w);
    const double f = std::fma(a, b, -w);
    return f - e;
}

/// Horner evaluation of the quartic.
inline double horner(const QuarticPoly& p, double x) {
    const auto& a = p.alpha;
    return (((a[4] * x + a[3]) * x + a[2]) * x + a[1]) * x + a[0];
}

/// Compensated Horner: evaluates the quartic to roughly eps-relative accuracy
/// of the true value, instead of eps times the magnitude of the intermediate
/// terms. Needed so Newton polishing can converge below the cancellation
/// noise at nearly multiple roots.
inline double horner_compensated(const QuarticPoly& p, double x) {
    const auto& a = p.alpha;
    double s = a[4];
    double comp = 0;
    for (int j = 3; j >= 0; --j) {
        const double prod = s * x;
        const double prod_err = std::fma(s, x, -prod);
        s = prod + a[j];
        // Neumaier correction for the addition
        const double add_err = (std::abs(prod) >= std::abs(a[j]))
                                   ? (prod - s) + a[j]
                                   : (a[j] - s) + prod;
        comp = comp * x + (prod_err + add_err);
    }
    return s + comp;
}

inline double horner_derivative(const QuarticPoly& p, double x) {
    const auto& a = p.alpha;
    return ((4 * a[4] * x + 3 * a[3]) * x + 2 * a[2]) * x + a[1];
}

/// Real roots of the monic quadratic y^2 + b y + c. A conjugate pair with
/// |imag| <= imag_tol collapses to the real double root; otherwise a complex
/// pair yields nothing.
inline int monic_quadratic_real(double b, double c, double imag_tol, double out[2]) {
    const double disc = diff_of_products(b, b, 4.0, c);
    if (disc >= 0) {
        const double sq = std::sqrt(disc);
        const double q = -0.5 * (b + std::copysign(sq, b));
        out[0] = q;
        out[1] = (q != 0) ? c / q : -0.5 * b;
        return 2;
    }
    if (0.5 * std::sqrt(-disc) <= imag_tol) {
        out[0] = out[1] = -0.5 * b;
        return 2;
    }
    return 0;
}

/// Sort, then merge clusters of roots within tol::dedup to their mean.
inline RealRoots dedup_sorted(double* r, int n) {
    std::sort(r, r + n);
    RealRoots out;
    int i = 0;
    while (i < n) {
        int j = i;
        double sum = r[i];
        while (j + 1 < n && r[j + 1] - r[j] <= tol::dedup) {
            ++j;
            sum += r[j];
        }
        out.push(sum / double(j - i + 1));
        i = j + 1;
    }
    return out;
}

}  // namespace detail

/// All real roots of c3 x^3 + c2 x^2 + c1 x + c0, ascending, multiple roots
/// collapsed. Degree-demotes when leading coefficients vanish relative to the
/// coefficient maximum; throws InvalidPolynomial when all coefficients are
/// zero or non-finite.
inline RealRoots solve_cubic_real(double c3, double c2, double c1, double c0) {
    const double mx = std::max({std::abs(c3), std::abs(c2), std::abs(c1), std::abs(c0)});
    if (!(mx > 0) || !std::isfinite(mx))
        throw InvalidPolynomial("solve_cubic_real: zero or non-finite polynomial");

    double buf[3];
    int n = 0;
    if (std::abs(c3) < tol::lead * mx) {
        if (std::abs(c2) < tol::lead * mx) {
            if (std::abs(c1) < tol::lead * mx)
                throw InvalidPolynomial("solve_cubic_real: constant polynomial has no roots");
            buf[n++] = -c0 / c1;
            return detail::dedup_sorted(buf, n);
        }
        // quadratic: c2 x^2 + c1 x + c0
        n = detail::monic_quadratic_real(c1 / c2, c0 / c2, 0.0, buf);
        return detail::dedup_sorted(buf, n);
    }

    // scale x = lam * y so the monic working coefficients are O(1); the
    // depression below would otherwise cancel catastrophically when the
    // coefficient ratios are large
    double lam = std::max({std::abs(c2 / c3), std::sqrt(std::abs(c1 / c3)),
                           std::cbrt(std::abs(c0 / c3))});
    lam = lam > 16.0 ? lam : 1.0;
    const double a = c2 / c3 / lam;
    const double b = c1 / c3 / (lam * lam);
    const double c = c0 / c3 / (lam * lam * lam);
    // depressed cubic t^3 + p t + q, y = t - a/3
    const double p = b - a * a / 3.0;
    const double q = (2.0 * a * a / 9.0 - b) * (a / 3.0) + c;
    const double shift = -a / 3.0;
    const double disc = 0.25 * q * q + p * p * p / 27.0;

    if (disc > 0) {
        const double sq = std::sqrt(disc);
        buf[n++] = std::cbrt(-0.5 * q + sq) + std::cbrt(-0.5 * q - sq) + shift;
    } else if (p == 0 && q == 0) {
        buf[n++] = shift;
    } else {
        // three real roots (Cardano's casus irreducibilis, trigonometric form)
        const double m = 2.0 * std::sqrt(-p / 3.0);
        const double arg = std::min(1.0, std::max(-1.0, 3.0 * q / (p * m)));
        const double theta = std::acos(arg) / 3.0;
        for (int k = 0; k < 3; ++k)
            buf[n++] = m * std::cos(theta - 2.0 * kPi * k / 3.0) + shift;
    }

    // undo the scaling, then one guarded Newton correction per root on the
    // original cubic
    for (int i = 0; i < n; ++i) {
        double r = buf[i] * lam;
        const double f = ((c3 * r + c2) * r + c1) * r + c0;
        const double fp = (3 * c3 * r + 2 * c2) * r + c1;
        if (std::abs(fp) > 0) {
            const double cand = r - f / fp;
            const double fc = ((c3 * cand + c2) * cand + c1) * cand + c0;
            if (std::abs(fc) < std::abs(f)) r = cand;
        }
        buf[i] = r;
    }
    return detail::dedup_sorted(buf, n);
}

/// All real roots of the quartic, ascending, deduplicated. Ferrari's method:
/// depress, solve the resolvent cubic by Cardano, pick the resolvent root
/// that maximizes the square-root argument of the back-substitution, and
/// split into two quadratics. Near-real conjugate pairs within tol::imag
/// collapse to double roots; farther pairs are discarded.
inline RealRoots solve_quartic(const QuarticPoly& poly) {
    const auto& al = poly.alpha;
    double mx = 0;
    for (double v : al) mx = std::max(mx, std::abs(v));
    if (!(mx > 0) || !std::isfinite(mx))
        throw InvalidPolynomial("solve_quartic: zero or non-finite polynomial");
    if (std::abs(al[4]) < tol::lead * mx)
        return solve_cubic_real(al[3], al[2], al[1], al[0]);

    // scale x = lam * y to keep the monic working coefficients O(1);
    // guarded inputs still allow roots up to ~1e3 and the depression would
    // otherwise lose most of their digits. Balanced polynomials keep lam = 1
    // so that the classification tolerances apply verbatim.
    double lam = std::max({std::abs(al[3] / al[4]),
                           std::sqrt(std::abs(al[2] / al[4])),
                           std::cbrt(std::abs(al[1] / al[4])),
                           std::sqrt(std::sqrt(std::abs(al[0] / al[4])))});
    lam = lam > 16.0 ? lam : 1.0;
    const double a = al[3] / al[4] / lam;
    const double b = al[2] / al[4] / (lam * lam);
    const double c = al[1] / al[4] / (lam * lam * lam);
    const double d = al[0] / al[4] / (lam * lam * lam * lam);

    // depressed quartic y^4 + p y^2 + q y + r, x = lam * (y - a/4)
    const double p = b - 0.375 * a * a;
    const double q = c + a * (0.125 * a * a - 0.5 * b);
    const double r = d - 0.25 * a * (c + a * (0.046875 * a * a - 0.25 * b));
    const double shift = -0.25 * a;

    double buf[4];
    int n = 0;

    // resolvent cubic 8 m^3 + 8 p m^2 + (2 p^2 - 8 r) m - q^2 = 0;
    // a root with m >= 0 always exists.
    const double rc1 = 2.0 * p * p - 8.0 * r;
    const double rc0 = -q * q;
    RealRoots ms = solve_cubic_real(8.0, 8.0 * p, rc1, rc0);
    double m = ms.count > 0 ? ms[ms.count - 1] : 0.0;
    // two Newton corrections; the back-substitution is sensitive to m
    for (int it = 0; it < 2; ++it) {
        const double g = ((8 * m + 8 * p) * m + rc1) * m + rc0;
        const double gp = (24 * m + 16 * p) * m + rc1;
        if (std::abs(gp) > 0) {
            const double cand = m - g / gp;
            const double gc = ((8 * cand + 8 * p) * cand + rc1) * cand + rc0;
            if (std::abs(gc) < std::abs(g)) m = cand;
        }
    }

    const double imag_tol = tol::imag / lam;  // classification happens in y-space
    if (!(m > 0) || 2.0 * m <= 1e-14 * std::max({1.0, std::abs(p), std::abs(r)})) {
        // q ~ 0: biquadratic z^2 + p z + r with y = +-sqrt(z)
        double z[2];
        const int nz = detail::monic_quadratic_real(p, r, 0.0, z);
        for (int i = 0; i < nz; ++i) {
            if (z[i] > 0) {
                const double s = std::sqrt(z[i]);
                buf[n++] = s;
                buf[n++] = -s;
            } else if (z[i] > -imag_tol * imag_tol) {
                buf[n++] = 0.0;
                buf[n++] = 0.0;
            }
        }
    } else {
        const double sig = std::sqrt(2.0 * m);
        const double t = 0.5 * q / sig;
        double cplus = 0.5 * p + m + t;
        double cminus = 0.5 * p + m - t;
        // the two constant terms multiply to r exactly; recompute the smaller
        // one from the product to dodge cancellation
        if (std::abs(cplus) >= std::abs(cminus)) {
            if (cplus != 0) cminus = r / cplus;
        } else {
            if (cminus != 0) cplus = r / cminus;
        }
        double y[2];
        int ny = detail::monic_quadratic_real(-sig, cplus, imag_tol, y);
        for (int i = 0; i < ny; ++i) buf[n++] = y[i];
        ny = detail::monic_quadratic_real(sig, cminus, imag_tol, y);
        for (int i = 0; i < ny; ++i) buf[n++] = y[i];
    }

    for (int i = 0; i < n; ++i) buf[i] = (buf[i] + shift) * lam;
    if (lam != 1.0) {
        // the scaled back-substitution leaves small roots with error
        // ~ lam * eps; correct them against the original coefficients
        for (int i = 0; i < n; ++i) {
            for (int it = 0; it < 2; ++it) {
                const double f = detail::horner(poly, buf[i]);
                const double fp = detail::horner_derivative(poly, buf[i]);
                if (std::abs(fp) < tol::deriv) break;
                const double cand = buf[i] - f / fp;
                if (std::abs(detail::horner(poly, cand)) < std::abs(f))
                    buf[i] = cand;
                else
                    break;
            }
        }
    }
    return detail::dedup_sorted(buf, n);
}

/// Newton-polish each root: r <- r - p(r)/p'(r), up to `iters` steps per root.
/// A step is skipped when |p'(r)| < tol::deriv, and a step that would increase
/// |p(r)| is rejected, so the residual never grows. Residuals are evaluated
/// with compensated Horner; without it, Newton cannot resolve roots below the
/// cancellation noise of the plain evaluation.
inline RealRoots polish_roots(const QuarticPoly& p, const RealRoots& roots, int iters) {
    double buf[4];
    int n = 0;
    for (double r : roots) {
        double f = detail::horner_compensated(p, r);
        for (int it = 0; it < iters; ++it) {
            const double fp = detail::horner_derivative(p, r);
            if (std::abs(fp) < tol::deriv) break;
            const double cand = r - f / fp;
            const double fc = detail::horner_compensated(p, cand);
            if (std::abs(fc) <= std::abs(f)) {
                r = cand;
                f = fc;
            } else {
                break;
            }
        }
        buf[n++] = r;
    }
    std::sort(buf, buf + n);
    RealRoots out;
    for (int i = 0; i < n; ++i) out.push(buf[i]);
    return out;
}

}  // namespace p3p
