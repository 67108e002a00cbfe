#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>

#include "p3p/core.hpp"
#include "p3p/rng.hpp"
#include "p3p/solver.hpp"

namespace p3p {

/// A generator could not produce a valid instance within its attempt budget.
struct GeneratorExhausted : Error {
    using Error::Error;
};

enum class Scenario { nominal, collinear, coincident };

inline const char* to_string(Scenario s) {
    switch (s) {
        case Scenario::nominal: return "nominal";
        case Scenario::collinear: return "collinear";
        case Scenario::coincident: return "coincident";
    }
    return "?";
}

struct ScenarioConfig {
    Scenario scenario = Scenario::nominal;
    std::uint64_t seed = 1;
    double perturbation = 0.05;
    std::array<double, 3> cuboid{0.4, 0.3, 0.4};  ///< full extents, centered at the origin
};

/// A generated instance together with the pose that produced its bearings.
struct GroundTruthInstance {
    FeatureTriad triad;
    RotMat true_rotation;  ///< camera-to-global
    Vec3 true_position;
};

namespace detail {

inline constexpr int kMaxGenAttempts = 1000;

inline void validate(const ScenarioConfig& cfg) {
    if (!(cfg.perturbation >= 0))
        throw InvalidInput("ScenarioConfig: perturbation must be >= 0");
    if (!(cfg.cuboid[0] > 0) || !(cfg.cuboid[1] > 0) || !(cfg.cuboid[2] > 0))
        throw InvalidInput("ScenarioConfig: cuboid extents must be > 0");
}

/// Fixed camera truth: position e3, world-to-camera rotation C(e1, pi).
inline RotMat truth_rotation() {
    return rodrigues(unit_x<double>(), kPi).transposed();
}

inline Vec3 draw_in_cuboid(SplitMix64& rng, const std::array<double, 3>& cuboid) {
    return {rng.uniform(-0.5 * cuboid[0], 0.5 * cuboid[0]),
            rng.uniform(-0.5 * cuboid[1], 0.5 * cuboid[1]),
            rng.uniform(-0.5 * cuboid[2], 0.5 * cuboid[2])};
}

inline GroundTruthInstance make_instance(const Vec3& p1, const Vec3& p2, const Vec3& p3) {
    const RotMat rot = truth_rotation();
    const Vec3 pos{0, 0, 1};
    const RotMat world_to_cam = rot.transposed();
    const auto bearing = [&](const Vec3& p) { return UnitVec3::normalized(world_to_cam * (p - pos)); };
    return {FeatureTriad{p1, p2, p3, bearing(p1), bearing(p2), bearing(p3)}, rot, pos};
}

inline bool distinct(const Vec3& a, const Vec3& b, double eps) { return (a - b).norm() > eps; }

}  // namespace detail

/// Noiseless nominal instance: three points uniform in the centered cuboid,
/// bearings computed exactly from the fixed truth pose. Deterministic in
/// (cfg.seed, index); draws violating the frame preconditions are rejected
/// and redrawn.
inline GroundTruthInstance gen_nominal(const ScenarioConfig& cfg, std::uint64_t index) {
    detail::validate(cfg);
    SplitMix64 rng(mix64(cfg.seed, index));
    for (int attempt = 0; attempt < detail::kMaxGenAttempts; ++attempt) {
        const Vec3 p1 = detail::draw_in_cuboid(rng, cfg.cuboid);
        const Vec3 p2 = detail::draw_in_cuboid(rng, cfg.cuboid);
        const Vec3 p3 = detail::draw_in_cuboid(rng, cfg.cuboid);
        const double eps = SolverOptions{}.degeneracy_eps;
        if (!detail::distinct(p1, p2, eps) || !detail::distinct(p1, p3, eps) ||
            !detail::distinct(p2, p3, eps))
            continue;
        GroundTruthInstance inst = detail::make_instance(p1, p2, p3);
        if (classify_triad(inst.triad, eps) != Degeneracy::none) continue;
        return inst;
    }
    throw GeneratorExhausted("gen_nominal: no valid draw in 1000 attempts");
}

/// Near-collinear instance: three points on a random segment through the
/// cuboid, every coordinate of all three then perturbed uniformly in
/// [-perturbation, +perturbation]. With perturbation 0 the instance is
/// exactly collinear and build_frame rejects it.
inline GroundTruthInstance gen_collinear(const ScenarioConfig& cfg, std::uint64_t index) {
    detail::validate(cfg);
    SplitMix64 rng(mix64(cfg.seed, index));
    for (int attempt = 0; attempt < detail::kMaxGenAttempts; ++attempt) {
        const Vec3 a = detail::draw_in_cuboid(rng, cfg.cuboid);
        const Vec3 b = detail::draw_in_cuboid(rng, cfg.cuboid);
        if ((a - b).norm() < 0.1) continue;
        double tpar[3] = {rng.uniform01(), rng.uniform01(), rng.uniform01()};
        if (std::abs(tpar[0] - tpar[1]) < 0.05 || std::abs(tpar[0] - tpar[2]) < 0.05 ||
            std::abs(tpar[1] - tpar[2]) < 0.05)
            continue;
        // feature 2 takes the middle parameter, so it stays between the
        // other two along the segment
        if ((tpar[1] < tpar[0]) == (tpar[1] < tpar[2])) {
            int mid = (tpar[0] < tpar[1]) != (tpar[0] < tpar[2]) ? 0 : 2;
            std::swap(tpar[1], tpar[mid]);
        }
        Vec3 pts[3];
        for (int i = 0; i < 3; ++i) pts[i] = a + (b - a) * tpar[i];
        for (auto& p : pts)
            for (int c = 0; c < 3; ++c)
                p[c] += rng.uniform(-cfg.perturbation, cfg.perturbation);
        return detail::make_instance(pts[0], pts[1], pts[2]);
    }
    throw GeneratorExhausted("gen_collinear: no valid draw in 1000 attempts");
}

/// Near-coincident-bearing instance: the second point starts on the camera's
/// line of sight to the first (so their true bearings coincide), then every
/// coordinate of all three points is perturbed uniformly in
/// [-perturbation, +perturbation]; the third point is free in the cuboid.
/// With perturbation 0 build_frame rejects the instance.
inline GroundTruthInstance gen_coincident(const ScenarioConfig& cfg, std::uint64_t index) {
    detail::validate(cfg);
    SplitMix64 rng(mix64(cfg.seed, index));
    const Vec3 cam{0, 0, 1};
    for (int attempt = 0; attempt < detail::kMaxGenAttempts; ++attempt) {
        Vec3 pts[3];
        pts[0] = detail::draw_in_cuboid(rng, cfg.cuboid);
        const double s = rng.uniform(0.8, 1.2);
        pts[1] = cam + (pts[0] - cam) * s;
        pts[2] = detail::draw_in_cuboid(rng, cfg.cuboid);
        for (auto& p : pts)
            for (int c = 0; c < 3; ++c)
                p[c] += rng.uniform(-cfg.perturbation, cfg.perturbation);
        const double eps = SolverOptions{}.degeneracy_eps;
        if (!detail::distinct(pts[0], pts[1], eps) || !detail::distinct(pts[0], pts[2], eps) ||
            !detail::distinct(pts[1], pts[2], eps))
            continue;
        return detail::make_instance(pts[0], pts[1], pts[2]);
    }
    throw GeneratorExhausted("gen_coincident: no valid draw in 1000 attempts");
}

/// Dispatch on cfg.scenario.
inline GroundTruthInstance gen_instance(const ScenarioConfig& cfg, std::uint64_t index) {
    switch (cfg.scenario) {
        case Scenario::collinear: return gen_collinear(cfg, index);
        case Scenario::coincident: return gen_coincident(cfg, index);
        case Scenario::nominal: break;
    }
    return gen_nominal(cfg, index);
}

}  // namespace p3p
