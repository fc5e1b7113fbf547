#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dualdiv/csv.hpp"
#include "dualdiv/errors.hpp"
#include "dualdiv/levy_model.hpp"
#include "dualdiv/philox.hpp"
#include "dualdiv/scale_function.hpp"

namespace dualdiv {

/// Discounted: weight e^{-qt} up to t_max. ExponentialKilling: no weight, each
/// path stops at an independent Exp(q) time (capped at t_max); same expectation.
enum class Horizon { Discounted, ExponentialKilling };

struct SimConfig {
    long n_paths = 200000;
    double dt = 1e-3;
    double t_max = 0.0;  // 0 selects 20/q
    std::uint64_t seed = 20240101;
    bool antithetic = false;
    Horizon horizon = Horizon::ExponentialKilling;
    int threads = 1;
    std::ostream* trace = nullptr;  // per-path CSV rows when set
};

struct SimEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::pair<double, double> ci95{0.0, 0.0};
    long n_paths = 0;
    double dt = 0.0;
    double truncation_bound = 0.0;
    double mean_dividends = 0.0;
    double mean_injections = 0.0;

    double z_score(double reference) const {
        return std_error > 0.0 ? (mean - reference) / std_error
                               : (mean == reference ? 0.0 : std::numeric_limits<double>::infinity());
    }
};

namespace detail {

/// Welford accumulator; merge() is Chan's pairwise update.
struct RunningStats {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double v) {
        ++n;
        const double d = v - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (v - mean);
    }
    void merge(const RunningStats& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double total = static_cast<double>(n + o.n);
        const double d = o.mean - mean;
        mean += d * static_cast<double>(o.n) / total;
        m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) / total;
        n += o.n;
    }
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
};

/// Exact phase-type sampler: walks the absorbing Markov chain.
class JumpSampler {
public:
    explicit JumpSampler(const PhaseType& pt) {
        const int m = pt.phases();
        double acc = 0.0;
        for (int i = 0; i < m; ++i) {
            acc += pt.alpha()(i);
            init_cdf_.push_back(acc);
        }
        for (int i = 0; i < m; ++i) {
            const double r = -pt.T()(i, i);
            rate_.push_back(r);
            std::vector<double> cdf;
            double c = 0.0;
            for (int j = 0; j < m; ++j) {
                if (j != i) c += pt.T()(i, j) / r;
                cdf.push_back(c);
            }
            next_cdf_.push_back(std::move(cdf));
        }
    }

    double operator()(PathRng& rng) const {
        int state = pick(init_cdf_, rng.uniform());
        double z = 0.0;
        while (true) {
            z += rng.exponential(rate_[state]);
            const double u = rng.uniform();
            const auto& cdf = next_cdf_[state];
            if (u >= cdf.back()) return z;
            state = pick(cdf, u);
        }
    }

private:
    static int pick(const std::vector<double>& cdf, double u) {
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), cdf.size() - 1));
    }

    std::vector<double> init_cdf_;
    std::vector<double> rate_;
    std::vector<std::vector<double>> next_cdf_;
};

struct PathOutcome {
    double dividends = 0.0;
    double injections = 0.0;
    double ruin_time = std::numeric_limits<double>::infinity();
};

struct Control {
    bool inject = false;  // reflect at 0 instead of stopping at ruin
    double barrier = 0.0;
    double x0 = 0.0;
};

class PathSimulator {
public:
    PathSimulator(const LevyModel& model, double q, const SimConfig& cfg, const Control& ctl)
        : model_(model), q_(q), cfg_(cfg), ctl_(ctl), sampler_(model.jumps()) {}

    PathOutcome run(std::uint64_t unit, bool flip) const {
        PathRng diffusion(cfg_.seed, unit, 0, flip);
        PathRng jumps(cfg_.seed, unit, 1, flip);
        PathRng clock(cfg_.seed, unit, 2, flip);
        const double horizon = cfg_.horizon == Horizon::ExponentialKilling
                                   ? std::min(clock.exponential(q_), cfg_.t_max)
                                   : cfg_.t_max;
        return model_.sigma() > 0.0 ? diffusive(diffusion, jumps, horizon)
                                    : piecewise(jumps, horizon);
    }

private:
    double disc(double t) const {
        return cfg_.horizon == Horizon::Discounted ? std::exp(-q_ * t) : 1.0;
    }
    /// int_{t0}^{t1} disc(s) ds
    double disc_integral(double t0, double t1) const {
        if (cfg_.horizon == Horizon::ExponentialKilling) return t1 - t0;
        return std::exp(-q_ * t0) * -std::expm1(-q_ * (t1 - t0)) / q_;
    }

    void skim(PathOutcome& out, double& x, double t) const {
        if (x > ctl_.barrier) {
            out.dividends += (x - ctl_.barrier) * disc(t);
            x = ctl_.barrier;
        }
    }

    /// sigma = 0: linear decrease at rate d between exact jump times.
    PathOutcome piecewise(PathRng& jumps, double horizon) const {
        const double d = model_.drift_d();
        PathOutcome out;
        double x = ctl_.x0;
        double t = 0.0;
        skim(out, x, t);
        if (!ctl_.inject && x <= 0.0) {
            out.ruin_time = 0.0;
            return out;
        }
        while (true) {
            const double tau = t + jumps.exponential(model_.lambda());
            const double end = std::min(tau, horizon);
            const double t_zero = t + x / d;
            if (t_zero < end) {
                if (!ctl_.inject) {
                    out.ruin_time = t_zero;
                    return out;
                }
                out.injections += d * disc_integral(t_zero, end);
                x = 0.0;
            } else {
                x -= d * (end - t);
            }
            t = end;
            if (tau >= horizon) return out;
            x += sampler_(jumps);
            skim(out, x, t);
        }
    }

    /// sigma > 0: Euler steps of at most dt, cut at exact jump times; projection
    /// onto [0, barrier] with increments discounted at the left endpoint.
    PathOutcome diffusive(PathRng& diffusion, PathRng& jumps, double horizon) const {
        const double d = model_.drift_d();
        const double sigma = model_.sigma();
        const double dt = cfg_.dt;
        const double sq_dt = std::sqrt(dt);
        PathOutcome out;
        double x = ctl_.x0;
        double t = 0.0;
        skim(out, x, t);
        if (!ctl_.inject && x <= 0.0) {
            out.ruin_time = 0.0;
            return out;
        }
        double tau = jumps.exponential(model_.lambda());
        while (true) {
            const double end = std::min(tau, horizon);
            const bool last = end - t <= dt;
            const double h = last ? end - t : dt;
            x += -d * h + sigma * (last ? std::sqrt(h) : sq_dt) * diffusion.normal();
            if (x < 0.0) {
                if (!ctl_.inject) {
                    out.ruin_time = t + h;
                    return out;
                }
                out.injections += -x * disc(t);
                x = 0.0;
            }
            skim(out, x, t);
            t = last ? end : t + dt;
            if (!last) continue;
            if (tau >= horizon) return out;
            x += sampler_(jumps);
            skim(out, x, t);
            tau = t + jumps.exponential(model_.lambda());
        }
    }

    const LevyModel& model_;
    double q_;
    const SimConfig& cfg_;
    Control ctl_;
    JumpSampler sampler_;
};

struct BlockResult {
    RunningStats payoff;
    RunningStats dividends;
    RunningStats injections;
    std::string trace;
};

inline void validate_sim(const LevyModel& model, double q, SimConfig& cfg) {
    if (!(q > 0.0)) throw ConfigError("simulation requires q > 0");
    if (cfg.t_max == 0.0) cfg.t_max = 20.0 / q;
    if (!(q * cfg.t_max >= 18.0)) throw ConfigError("simulation requires q * t_max >= 18");
    if (!(cfg.dt > 0.0)) throw ConfigError("simulation requires dt > 0");
    if (model.sigma() > 0.0 && cfg.dt > 1e-3) throw ConfigError("simulation requires dt <= 1e-3 when sigma > 0");
    if (cfg.n_paths < 2) throw ConfigError("simulation requires at least 2 paths");
    if (cfg.antithetic && cfg.n_paths % 2 != 0) throw ConfigError("antithetic sampling requires an even path count");
    if (cfg.threads < 1) throw ConfigError("simulation requires at least 1 thread");
}

/// Runs all sampling units in fixed-size blocks; blocks are merged in index
/// order, so the estimate does not depend on the thread count.
inline SimEstimate run_paths(const PathSimulator& sim, const SimConfig& cfg, double phi_cost) {
    const bool pairs = cfg.antithetic;
    const long units = pairs ? cfg.n_paths / 2 : cfg.n_paths;
    constexpr long block = 4096;
    const long n_blocks = (units + block - 1) / block;
    std::vector<BlockResult> results(static_cast<std::size_t>(n_blocks));

    auto work = [&](long b) {
        BlockResult& r = results[static_cast<std::size_t>(b)];
        std::ostringstream rows;
        const long lo = b * block;
        const long hi = std::min(units, lo + block);
        for (long u = lo; u < hi; ++u) {
            double pay = 0.0, div = 0.0, inj = 0.0;
            const int members = pairs ? 2 : 1;
            for (int k = 0; k < members; ++k) {
                const PathOutcome o = sim.run(static_cast<std::uint64_t>(u), k == 1);
                pay += o.dividends - phi_cost * o.injections;
                div += o.dividends;
                inj += o.injections;
                if (cfg.trace) {
                    rows << (pairs ? 2 * u + k : u) << ',' << fmt17(o.ruin_time) << ','
                         << fmt17(o.dividends) << ',' << fmt17(o.injections) << '\n';
                }
            }
            r.payoff.add(pay / members);
            r.dividends.add(div / members);
            r.injections.add(inj / members);
        }
        r.trace = rows.str();
    };

    const int n_threads = static_cast<int>(std::min<long>(cfg.threads, std::max<long>(n_blocks, 1)));
    if (n_threads <= 1) {
        for (long b = 0; b < n_blocks; ++b) work(b);
    } else {
        std::atomic<long> next{0};
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) {
            pool.emplace_back([&] {
                for (long b = next++; b < n_blocks; b = next++) work(b);
            });
        }
        for (auto& th : pool) th.join();
    }

    BlockResult total;
    if (cfg.trace) *cfg.trace << "path_id,ruin_time,discounted_dividends,discounted_injections\n";
    for (const auto& r : results) {
        total.payoff.merge(r.payoff);
        total.dividends.merge(r.dividends);
        total.injections.merge(r.injections);
        if (cfg.trace) *cfg.trace << r.trace;
    }
    SimEstimate est;
    est.mean = total.payoff.mean;
    est.std_error = std::sqrt(total.payoff.variance() / static_cast<double>(total.payoff.n));
    est.ci95 = {est.mean - 1.96 * est.std_error, est.mean + 1.96 * est.std_error};
    est.n_paths = cfg.n_paths;
    est.dt = cfg.dt;
    est.mean_dividends = total.dividends.mean;
    est.mean_injections = total.injections.mean;
    return est;
}

}  // namespace detail

/// Expected discounted dividends until ruin under the barrier strategy at
/// level a, started from x0. A start above a pays x0 - a at once.
inline SimEstimate simulate_dividend(const LevyModel& model, double q, double a, double x0,
                                     SimConfig cfg = {}) {
    detail::validate_sim(model, q, cfg);
    if (!(a >= 0.0)) throw ConfigError("dividend barrier must be >= 0");
    if (!(x0 >= 0.0)) throw ConfigError("initial surplus must be >= 0");
    const detail::PathSimulator sim(model, q, cfg, {false, a, x0});
    SimEstimate est = detail::run_paths(sim, cfg, 0.0);
    const double bound = std::max(a, x0) + 1.0 / phi(model, q) + std::max(drift_mu(model), 0.0) / q;
    est.truncation_bound = std::exp(-q * cfg.t_max) * bound;
    return est;
}

/// Expected discounted dividends minus phi times discounted injections for
/// the process reflected at 0 (injections) and at b (dividends).
inline SimEstimate simulate_injection(const LevyModel& model, double q, double b, double phi_cost,
                                      double x0, SimConfig cfg = {}) {
    detail::validate_sim(model, q, cfg);
    if (!(b > 0.0)) throw ConfigError("injection barrier must be > 0");
    if (!(phi_cost > 1.0)) throw InvalidCost("injection cost phi must exceed 1");
    if (!(x0 >= 0.0)) throw ConfigError("initial surplus must be >= 0");
    const detail::PathSimulator sim(model, q, cfg, {true, b, x0});
    SimEstimate est = detail::run_paths(sim, cfg, phi_cost);
    const ScaleFunction sf = build_scale(model, q);
    const double bound = std::max(b, x0) + 1.0 / sf.phi() + std::abs(drift_mu(model)) / q +
                         phi_cost * sf.Z(b) / (q * sf.W(b));
    est.truncation_bound = std::exp(-q * cfg.t_max) * bound;
    return est;
}

}  // namespace dualdiv
