#include <catch2/catch_amalgamated.hpp>

#include "p3p/core.hpp"
#include "p3p/rng.hpp"
#include "support/test_support.hpp"

using namespace p3p;
using p3p::test::e1;
using p3p::test::e2;
using p3p::test::e3;
using Catch::Matchers::WithinAbs;

TEST_CASE("skew matches the cross product") {
    CHECK((skew(e3().vec()) * e1().vec() - e2().vec()).norm() == 0.0);

    SplitMix64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const Vec3 a{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const Vec3 b{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        CHECK((skew(a) * a).norm() == 0.0);
        CHECK((skew(a) * b - a.cross(b)).norm() == 0.0);
        CHECK((skew(a) * b + skew(b) * a).norm() == 0.0);
        // skew(v)^T == -skew(v)
        CHECK((skew(a).transposed() + skew(a)).max_abs_diff(Mat3::zero()) == 0.0);
    }
}

TEST_CASE("rodrigues basics") {
    SplitMix64 rng(12);
    for (int i = 0; i < 100; ++i) {
        const UnitVec3 k = p3p::test::random_unit(rng);
        CHECK(rodrigues(k, 0.0).matrix().max_abs_diff(Mat3::identity()) == 0.0);
        const double th = rng.uniform(-3 * kPi, 3 * kPi);
        const RotMat c = rodrigues(k, th);
        CHECK(c.is_valid());
        // the axis is a fixed point
        CHECK((c * k.vec() - k.vec()).norm() < 1e-15);
    }
    // left-hand rule: rotating e1 about e3 by +pi/2 gives -e2
    const RotMat q = rodrigues(e3(), kPi / 2);
    CHECK((q * e1().vec() + e2().vec()).norm() < 1e-15);
}

TEST_CASE("rodrigues composition and conjugation") {
    SplitMix64 rng(13);
    for (int i = 0; i < 300; ++i) {
        const UnitVec3 k = p3p::test::random_unit(rng);
        const double a = rng.uniform(-kPi, kPi);
        const double b = rng.uniform(-kPi, kPi);
        const Mat3 lhs = (rodrigues(k, a) * rodrigues(k, b)).matrix();
        CHECK(lhs.max_abs_diff(rodrigues(k, a + b).matrix()) < 1e-12);

        const UnitVec3 k2 = p3p::test::random_unit(rng);
        const RotMat c1 = rodrigues(k, a);
        const RotMat c2 = rodrigues(k2, b);
        const Mat3 conj = (c1 * c2 * c1.transposed()).matrix();
        const Mat3 direct = rodrigues(UnitVec3::normalized(c1 * k2.vec()), b).matrix();
        CHECK(conj.max_abs_diff(direct) < 1e-12);
    }
}

TEST_CASE("skew identities for unit and general vectors") {
    SplitMix64 rng(14);
    for (int i = 0; i < 300; ++i) {
        const UnitVec3 k = p3p::test::random_unit(rng);
        const Vec3 a{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const Vec3 b{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};

        const Mat3 k2 = skew(k.vec()) * skew(k.vec());
        CHECK(k2.max_abs_diff(Mat3::outer(k.vec(), k.vec()) - Mat3::identity()) < 1e-14);

        const Mat3 ab = skew(a) * skew(b);
        CHECK(ab.max_abs_diff(Mat3::outer(b, a) - Mat3::identity() * a.dot(b)) < 1e-14 * 16);

        const Mat3 aXb = skew(a.cross(b));
        CHECK(aXb.max_abs_diff(Mat3::outer(b, a) - Mat3::outer(a, b)) < 1e-14 * 16);
    }
}

TEST_CASE("rotate_linear_form agrees with the full rotation") {
    // v along the axis: pure constant term
    const auto axis = rotate_linear_form(e3(), e3().vec());
    CHECK(axis.a.norm() == 0.0);
    CHECK(axis.b.norm() == 0.0);
    CHECK((axis.c - e3().vec()).norm() == 0.0);

    // k = e3, v = e1: a = e1, b = -e2, c = 0
    const auto perp = rotate_linear_form(e3(), e1().vec());
    CHECK((perp.a - e1().vec()).norm() == 0.0);
    CHECK((perp.b + e2().vec()).norm() == 0.0);
    CHECK(perp.c.norm() == 0.0);

    SplitMix64 rng(15);
    for (int i = 0; i < 300; ++i) {
        const UnitVec3 k = p3p::test::random_unit(rng);
        const Vec3 v{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const double th = rng.uniform(-kPi, kPi);
        const auto lf = rotate_linear_form(k, v);
        const Vec3 lin = lf.a * std::cos(th) + lf.b * std::sin(th) + lf.c;
        CHECK((lin - rodrigues(k, th) * v).norm() < 1e-14);
    }
}

TEST_CASE("rotation_angle_error") {
    const RotMat id = RotMat::from_matrix(Mat3::identity());
    CHECK(rotation_angle_error(id, id) == 0.0);

    const RotMat half = rodrigues(e1(), kPi);
    CHECK_THAT(rotation_angle_error(half, id), WithinAbs(kPi, 1e-15));

    SplitMix64 rng(16);
    for (int i = 0; i < 300; ++i) {
        const UnitVec3 k = p3p::test::random_unit(rng);
        const double th = rng.uniform(-kPi + 1e-6, kPi - 1e-6);
        CHECK_THAT(rotation_angle_error(rodrigues(k, th), id), WithinAbs(std::abs(th), 1e-12));
    }

    // same-rotation comparisons stay at the noise floor even after products
    SplitMix64 rng2(17);
    for (int i = 0; i < 100; ++i) {
        const RotMat a = p3p::test::random_rotation(rng2);
        const RotMat b = p3p::test::random_rotation(rng2);
        CHECK(rotation_angle_error(a * b, a * b) < 1e-12);
    }
}

TEST_CASE("unit vector and rotation type invariants") {
    CHECK_THROWS_AS(UnitVec3(1.0, 1.0, 0.0), InvalidInput);
    CHECK_THROWS_AS(UnitVec3::normalized(Vec3{0, 0, 0}), InvalidInput);
    CHECK_NOTHROW(UnitVec3(1.0, 0.0, 0.0));

    Mat3 notrot = Mat3::identity();
    notrot(0, 0) = 2.0;
    CHECK_THROWS_AS(RotMat::from_matrix(notrot), InvalidInput);
    // reflection: orthonormal but det -1
    Mat3 refl = Mat3::identity();
    refl(2, 2) = -1.0;
    CHECK_THROWS_AS(RotMat::from_matrix(refl), InvalidInput);
}

TEST_CASE("core types instantiate for float") {
    const Vec3T<float> v{1.f, 2.f, 2.f};
    CHECK(v.norm() == 3.f);
    const auto k = UnitVec3T<float>::normalized(v);
    const auto c = rodrigues(k, 0.5f);
    CHECK((c * k.vec() - k.vec()).norm() < 1e-6f);
}
