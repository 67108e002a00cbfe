#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "p3p/core.hpp"
#include "p3p/oracle.hpp"
#include "p3p/scenegen.hpp"
#include "p3p/solver.hpp"

namespace p3p {

/// Invalid experiment configuration (zero trials, unknown scenario, ...).
struct ConfigError : Error {
    using Error::Error;
};
/// File I/O failure; the message carries the offending path.
struct IoError : Error {
    using Error::Error;
};

/// Reported when a trial yields no solutions.
inline constexpr double kErrSentinel = std::numeric_limits<double>::max();

struct TrialRecord {
    std::int64_t index;
    int n_solutions;
    double pos_err;  ///< scene units; kErrSentinel when n_solutions == 0
    double rot_err;  ///< radians;     kErrSentinel when n_solutions == 0
    std::int64_t solve_ns;
};

/// Error histograms: bucket 0 holds values below 1e-18, buckets 1..18 the
/// decades [1e-18, 1e-17) .. [1e-1, 1), bucket 19 everything >= 1.
inline constexpr int kHistBuckets = 20;

inline int histogram_bucket(double x) {
    if (!(x >= 1e-18)) return 0;
    if (x >= 1.0) return kHistBuckets - 1;
    return 19 + int(std::floor(std::log10(x)));
}

struct SummaryReport {
    std::string scenario;
    std::int64_t trials = 0;
    std::uint64_t seed = 0;
    double mean_pos_err = 0, median_pos_err = 0, max_pos_err = 0;
    double mean_rot_err = 0, median_rot_err = 0, max_rot_err = 0;
    std::array<std::int64_t, kHistBuckets> pos_hist{};
    std::array<std::int64_t, kHistBuckets> rot_hist{};
    double mean_solve_ns = 0;  ///< machine-dependent; excluded from determinism
    int polish_iters = 0;
    std::string position_method;
    double degeneracy_eps = 0;
};

inline void to_json(nlohmann::json& j, const SummaryReport& r) {
    j = nlohmann::json{{"scenario", r.scenario},
                       {"trials", r.trials},
                       {"seed", r.seed},
                       {"mean_pos_err", r.mean_pos_err},
                       {"median_pos_err", r.median_pos_err},
                       {"max_pos_err", r.max_pos_err},
                       {"mean_rot_err", r.mean_rot_err},
                       {"median_rot_err", r.median_rot_err},
                       {"max_rot_err", r.max_rot_err},
                       {"pos_hist", r.pos_hist},
                       {"rot_hist", r.rot_hist},
                       {"mean_solve_ns", r.mean_solve_ns},
                       {"polish_iters", r.polish_iters},
                       {"position_method", r.position_method},
                       {"degeneracy_eps", r.degeneracy_eps}};
}

inline void from_json(const nlohmann::json& j, SummaryReport& r) {
    j.at("scenario").get_to(r.scenario);
    j.at("trials").get_to(r.trials);
    j.at("seed").get_to(r.seed);
    j.at("mean_pos_err").get_to(r.mean_pos_err);
    j.at("median_pos_err").get_to(r.median_pos_err);
    j.at("max_pos_err").get_to(r.max_pos_err);
    j.at("mean_rot_err").get_to(r.mean_rot_err);
    j.at("median_rot_err").get_to(r.median_rot_err);
    j.at("max_rot_err").get_to(r.max_rot_err);
    j.at("pos_hist").get_to(r.pos_hist);
    j.at("rot_hist").get_to(r.rot_hist);
    j.at("mean_solve_ns").get_to(r.mean_solve_ns);
    j.at("polish_iters").get_to(r.polish_iters);
    j.at("position_method").get_to(r.position_method);
    j.at("degeneracy_eps").get_to(r.degeneracy_eps);
}

/// Errors of the solution closest to the truth: position error |p - p_true|
/// and the relative rotation angle, taken from the single solution that
/// minimizes their sum. An empty solution set reports the sentinel pair.
inline std::pair<double, double> error_metrics(const std::vector<PoseSolution>& solutions,
                                               const GroundTruthInstance& truth) {
    double best = std::numeric_limits<double>::infinity();
    std::pair<double, double> out{kErrSentinel, kErrSentinel};
    for (const auto& s : solutions) {
        const double pe = (s.position - truth.true_position).norm();
        const double re = rotation_angle_error(s.rotation, truth.true_rotation);
        if (pe + re < best) {
            best = pe + re;
            out = {pe, re};
        }
    }
    return out;
}

struct ExperimentResult {
    SummaryReport summary;
    std::vector<TrialRecord> records;  ///< ordered by trial index
};

namespace detail {

inline unsigned experiment_threads(std::int64_t trials) {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("P3P_BENCH_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) n = std::min<unsigned>(n, unsigned(v));
    }
    return unsigned(std::min<std::int64_t>(n, trials));
}

inline TrialRecord run_trial(const ScenarioConfig& cfg, std::int64_t index,
                             const SolverOptions& opts) {
    const GroundTruthInstance inst = gen_instance(cfg, std::uint64_t(index));
    std::vector<PoseSolution> sols;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        sols = solve(inst.triad, opts);
    } catch (const Error&) {
        // degenerate instance; recorded as an empty trial
    }
    const auto t1 = std::chrono::steady_clock::now();
    const auto [pe, re] = error_metrics(sols, inst);
    return {index, int(sols.size()), pe, re,
            std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()};
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + long(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + long(mid) - 1, v.begin() + long(mid));
        return 0.5 * (v[mid - 1] + hi);
    }
    return hi;
}

}  // namespace detail

/// Run `trials` seeded instances of the configured scenario, solving each and
/// recording per-trial metrics. All non-timing output is a pure function of
/// (cfg, trials, opts). Trials run in parallel across threads (capped by the
/// P3P_BENCH_THREADS environment variable); records stay ordered by index.
inline ExperimentResult run_experiment(const ScenarioConfig& cfg, std::int64_t trials,
                                       const SolverOptions& opts = {}) {
    if (trials < 1) throw ConfigError("run_experiment: trials must be >= 1");

    std::vector<TrialRecord> records(static_cast<std::size_t>(trials));
    const unsigned nthreads = detail::experiment_threads(trials);
    if (nthreads <= 1) {
        for (std::int64_t i = 0; i < trials; ++i)
            records[std::size_t(i)] = detail::run_trial(cfg, i, opts);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        const std::int64_t chunk = (trials + nthreads - 1) / nthreads;
        for (unsigned w = 0; w < nthreads; ++w) {
            const std::int64_t lo = std::int64_t(w) * chunk;
            const std::int64_t hi = std::min<std::int64_t>(lo + chunk, trials);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi] {
                for (std::int64_t i = lo; i < hi; ++i)
                    records[std::size_t(i)] = detail::run_trial(cfg, i, opts);
            });
        }
        for (auto& th : pool) th.join();
    }

    SummaryReport s;
    s.scenario = to_string(cfg.scenario);
    s.trials = trials;
    s.seed = cfg.seed;
    s.polish_iters = opts.polish_iters;
    s.position_method = opts.position_method == PositionMethod::direct ? "direct" : "lsq";
    s.degeneracy_eps = opts.degeneracy_eps;

    std::vector<double> pe, re;
    pe.reserve(records.size());
    re.reserve(records.size());
    double ns = 0;
    for (const auto& r : records) {
        pe.push_back(r.pos_err);
        re.push_back(r.rot_err);
        s.mean_pos_err += r.pos_err / double(trials);
        s.mean_rot_err += r.rot_err / double(trials);
        s.max_pos_err = std::max(s.max_pos_err, r.pos_err);
        s.max_rot_err = std::max(s.max_rot_err, r.rot_err);
        ++s.pos_hist[std::size_t(histogram_bucket(r.pos_err))];
        ++s.rot_hist[std::size_t(histogram_bucket(r.rot_err))];
        ns += double(r.solve_ns);
    }
    s.median_pos_err = detail::median_of(std::move(pe));
    s.median_rot_err = detail::median_of(std::move(re));
    s.mean_solve_ns = ns / double(trials);
    return {std::move(s), std::move(records)};
}

/// Mean wall time per solve, in nanoseconds, over `trials` pre-generated
/// instances. Instance generation happens before the timed region, a fresh
/// instance is solved each iteration, and a 1000-solve warm-up precedes the
/// measurement. Single-threaded.
inline double time_batch(const ScenarioConfig& cfg, std::int64_t trials,
                         const SolverOptions& opts = {}) {
    if (trials < 1000) throw ConfigError("time_batch: trials must be >= 1000");

    std::vector<GroundTruthInstance> instances;
    instances.reserve(std::size_t(trials));
    for (std::int64_t i = 0; i < trials; ++i) instances.push_back(gen_instance(cfg, std::uint64_t(i)));

    volatile double sink = 0;
    for (std::int64_t i = 0; i < 1000; ++i) {
        for (const auto& s : solve(instances[std::size_t(i % trials)].triad, opts)) sink = sink + s.d3;
    }

    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& inst : instances) {
        for (const auto& s : solve(inst.triad, opts)) sink = sink + s.d3;
    }
    const auto t1 = std::chrono::steady_clock::now();
    (void)sink;
    const double total_ns = double(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
    return total_ns / double(trials);
}

enum class ReportFormat { csv, json };

/// Write the experiment output to `path`: the per-trial CSV stream
/// (index,n_solutions,pos_err,rot_err,solve_ns) or the JSON summary object.
/// Floating-point values carry 17 significant digits.
inline void emit_report(const ExperimentResult& result, ReportFormat format,
                        const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("emit_report: cannot open '" + path + "' for writing");

    if (format == ReportFormat::csv) {
        out << "index,n_solutions,pos_err,rot_err,solve_ns\n";
        char line[160];
        for (const auto& r : result.records) {
            std::snprintf(line, sizeof line, "%lld,%d,%.17g,%.17g,%lld\n",
                          static_cast<long long>(r.index), r.n_solutions, r.pos_err, r.rot_err,
                          static_cast<long long>(r.solve_ns));
            out << line;
        }
    } else {
        const nlohmann::json j = result.summary;
        out << j.dump(2) << '\n';
    }
    out.flush();
    if (!out) throw IoError("emit_report: write to '" + path + "' failed");
}

}  // namespace p3p
