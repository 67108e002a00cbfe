#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "p3p/oracle.hpp"
#include "p3p/polyroots.hpp"
#include "p3p/rng.hpp"

using namespace p3p;
using Catch::Matchers::WithinAbs;

namespace {

// straightforward power-sum evaluation (independent of Horner)
double eval_naive(const QuarticPoly& p, double x) {
    double s = 0;
    for (int j = 0; j <= 4; ++j) s += p.alpha[std::size_t(j)] * std::pow(x, j);
    return s;
}

// expand (x - r0)(x - r1)(x - r2)(x - r3) into alpha[0..4]
QuarticPoly quartic_from_roots(double r0, double r1, double r2, double r3) {
    std::array<double, 5> c{};
    c[0] = 1.0;
    int deg = 0;
    for (double r : {r0, r1, r2, r3}) {
        std::array<double, 5> n{};
        for (int j = 0; j <= deg; ++j) {
            n[std::size_t(j + 1)] += c[std::size_t(j)];
            n[std::size_t(j)] -= r * c[std::size_t(j)];
        }
        c = n;
        ++deg;
    }
    return {{c[0], c[1], c[2], c[3], c[4]}};
}

std::array<double, 4> cubic_from_roots(double r0, double r1, double r2) {
    std::array<double, 4> c{};
    c[0] = 1.0;
    int deg = 0;
    for (double r : {r0, r1, r2}) {
        std::array<double, 4> n{};
        for (int j = 0; j <= deg; ++j) {
            n[std::size_t(j + 1)] += c[std::size_t(j)];
            n[std::size_t(j)] -= r * c[std::size_t(j)];
        }
        c = n;
        ++deg;
    }
    return c;  // c[j] = coeff of x^j
}

}  // namespace

TEST_CASE("solve_cubic_real handles the textbook cases") {
    const RealRoots triple = solve_cubic_real(1, 0, 0, 0);  // x^3
    REQUIRE(triple.size() == 1);
    CHECK(triple[0] == 0.0);

    const RealRoots one = solve_cubic_real(1, 0, 0, -1);  // x^3 - 1
    REQUIRE(one.size() == 1);
    CHECK_THAT(one[0], WithinAbs(1.0, 1e-14));

    CHECK_THROWS_AS(solve_cubic_real(0, 0, 0, 0), InvalidPolynomial);
    CHECK_THROWS_AS(solve_cubic_real(0, 0, 0, 5), InvalidPolynomial);

    // degree demotion: quadratic and linear
    const RealRoots quad = solve_cubic_real(0, 1, -3, 2);  // (x-1)(x-2)
    REQUIRE(quad.size() == 2);
    CHECK_THAT(quad[0], WithinAbs(1.0, 1e-13));
    CHECK_THAT(quad[1], WithinAbs(2.0, 1e-13));
    const RealRoots lin = solve_cubic_real(0, 0, 2, -5);
    REQUIRE(lin.size() == 1);
    CHECK_THAT(lin[0], WithinAbs(2.5, 1e-14));
}

TEST_CASE("solve_cubic_real recovers random constructed roots") {
    SplitMix64 rng(21);
    for (int trial = 0; trial < 2000; ++trial) {
        double r[3] = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        std::sort(r, r + 3);
        if (r[1] - r[0] < 1e-3 || r[2] - r[1] < 1e-3) continue;  // well-separated set
        const auto c = cubic_from_roots(r[0], r[1], r[2]);
        const RealRoots got = solve_cubic_real(c[3], c[2], c[1], c[0]);
        REQUIRE(got.size() == 3);
        for (int i = 0; i < 3; ++i) CHECK_THAT(got[i], WithinAbs(r[i], 1e-10));
    }
}

TEST_CASE("solve_quartic textbook cases") {
    const RealRoots r1 = solve_quartic({{-1, 0, 0, 0, 1}});  // x^4 - 1
    REQUIRE(r1.size() == 2);
    CHECK_THAT(r1[0], WithinAbs(-1.0, 1e-14));
    CHECK_THAT(r1[1], WithinAbs(1.0, 1e-14));

    const RealRoots r2 = solve_quartic({{1, 0, -2, 0, 1}});  // (x^2 - 1)^2
    REQUIRE(r2.size() == 2);
    CHECK_THAT(r2[0], WithinAbs(-1.0, 1e-7));
    CHECK_THAT(r2[1], WithinAbs(1.0, 1e-7));

    CHECK_THROWS_AS(solve_quartic({{0, 0, 0, 0, 0}}), InvalidPolynomial);

    // leading-coefficient demotion falls back to the cubic path
    const RealRoots r3 = solve_quartic({{-1, 0, 0, 1, 0}});  // x^3 - 1
    REQUIRE(r3.size() == 1);
    CHECK_THAT(r3[0], WithinAbs(1.0, 1e-12));
}

TEST_CASE("solve_quartic recovers random constructed roots") {
    SplitMix64 rng(22);
    int checked = 0;
    for (int trial = 0; trial < 5000; ++trial) {
        double r[4];
        for (double& x : r) x = rng.uniform(-1, 1);
        std::sort(r, r + 4);
        bool separated = true;
        for (int i = 0; i + 1 < 4; ++i) separated &= (r[i + 1] - r[i] > 1e-3);
        if (!separated) continue;
        const QuarticPoly p = quartic_from_roots(r[0], r[1], r[2], r[3]);
        const RealRoots got = solve_quartic(p);
        REQUIRE(got.size() == 4);
        for (int i = 0; i < 4; ++i) CHECK_THAT(got[i], WithinAbs(r[i], 1e-10));
        ++checked;
    }
    CHECK(checked > 3000);
}

TEST_CASE("polish_roots contract") {
    const QuarticPoly p{{-1, 0, 0, 0, 1}};  // x^4 - 1

    RealRoots exact;
    exact.push(-1.0);
    exact.push(1.0);
    const RealRoots unchanged = polish_roots(p, exact, 0);
    REQUIRE(unchanged.size() == 2);
    CHECK(unchanged[0] == -1.0);
    CHECK(unchanged[1] == 1.0);

    RealRoots perturbed;
    perturbed.push(-1.0);
    perturbed.push(1.0 + 1e-4);
    const RealRoots polished = polish_roots(p, perturbed, 2);
    CHECK_THAT(polished[1], WithinAbs(1.0, 1e-12));

    const RealRoots still = polish_roots(p, exact, 3);
    CHECK_THAT(still[0], WithinAbs(-1.0, 1e-15));
    CHECK_THAT(still[1], WithinAbs(1.0, 1e-15));

    // residual never increases, whatever the start
    SplitMix64 rng(23);
    for (int i = 0; i < 200; ++i) {
        QuarticPoly q;
        for (auto& a : q.alpha) a = rng.uniform(-1, 1);
        RealRoots start;
        start.push(rng.uniform(-2, 2));
        const RealRoots done = polish_roots(q, start, 3);
        CHECK(std::abs(detail::horner(q, done[0])) <=
              std::abs(detail::horner(q, start[0])) * (1 + 1e-12) + 1e-300);
    }
}

TEST_CASE("quartic roots match the companion-matrix oracle on guarded polynomials") {
    SplitMix64 rng(24);
    int tested = 0;
    while (tested < 10000) {
        QuarticPoly p;
        for (auto& a : p.alpha) a = rng.uniform(-1, 1);
        double mx = 0;
        for (double a : p.alpha) mx = std::max(mx, std::abs(a));
        if (std::abs(p.alpha[4]) < 1e-3 * mx) continue;  // guard |a_j|/|a_4| <= 1e3
        ++tested;

        const RealRoots mine = solve_quartic(p);
        const RealRoots oracle = companion_roots(p);

        // nearly multiple roots (real pairs, or a complex pair hugging the
        // real axis) are conditioning-limited for either solver, so the
        // strict 1e-9 matching applies where a root's first-order error
        // bound eps * sum|a_j r^j| / |p'(r)| stays below it -- the same
        // caveat the count comparison carries
        double minsep = 1e300;
        const RealRoots& big = mine.size() >= oracle.size() ? mine : oracle;
        for (int i = 0; i + 1 < big.size(); ++i)
            minsep = std::min(minsep, big[i + 1] - big[i]);
        const auto well_conditioned = [&](double r) {
            double mag = 0;
            for (int j = 0; j <= 4; ++j) mag += std::abs(p.alpha[std::size_t(j)] * std::pow(r, j));
            return 4.4e-16 * mag <= 1e-10 * std::abs(detail::horner_derivative(p, r));
        };

        if (mine.size() == oracle.size()) {
            for (int i = 0; i < mine.size(); ++i)
                if (minsep > 1e-4 && well_conditioned(mine[i]))
                    CHECK_THAT(mine[i], WithinAbs(oracle[i], 1e-9));
        } else {
            CHECK(minsep < 1e-4);
        }
    }
}

TEST_CASE("returned roots satisfy the residual bound") {
    // Scoped to roots of moderate magnitude: at |r| ~ 300 (still inside the
    // coefficient guard) the double grid itself floors |p(r)| at
    // |p'(r)| * ulp(r) ~ 1e-9 * mx, which no root finder can beat.
    SplitMix64 rng(25);
    int tested = 0;
    while (tested < 5000) {
        QuarticPoly p;
        for (auto& a : p.alpha) a = rng.uniform(-1, 1);
        double mx = 0;
        for (double a : p.alpha) mx = std::max(mx, std::abs(a));
        if (std::abs(p.alpha[4]) < 1e-3 * mx) continue;

        const RealRoots raw = solve_quartic(p);
        bool bounded = true;
        for (double r : raw) bounded &= std::abs(r) <= 8.0;
        if (!bounded) continue;
        ++tested;

        for (double r : raw) CHECK(std::abs(detail::horner(p, r)) <= 1e-8 * mx);
        // (4 - count) is even: complex roots pair up
        CHECK((4 - raw.size()) % 2 == 0);

        const RealRoots fine = polish_roots(p, raw, 2);
        for (double r : fine) CHECK(std::abs(detail::horner(p, r)) <= 1e-11 * mx);
    }
}

TEST_CASE("Horner and naive evaluation agree") {
    SplitMix64 rng(26);
    for (int i = 0; i < 2000; ++i) {
        QuarticPoly p;
        for (auto& a : p.alpha) a = rng.uniform(-1, 1);
        const double x = rng.uniform(-2, 2);
        const double h = detail::horner(p, x);
        const double n = eval_naive(p, x);
        double scale = 0;
        for (int j = 0; j <= 4; ++j) scale += std::abs(p.alpha[std::size_t(j)] * std::pow(x, j));
        CHECK(std::abs(h - n) <= 1e-12 * std::max(scale, 1e-30));
    }
}
