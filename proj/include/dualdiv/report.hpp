#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualdiv/csv.hpp"
#include "dualdiv/dividend.hpp"
#include "dualdiv/errors.hpp"
#include "dualdiv/generator.hpp"
#include "dualdiv/injection.hpp"
#include "dualdiv/levy_model.hpp"
#include "dualdiv/montecarlo.hpp"
#include "dualdiv/scale_function.hpp"

#ifndef DUALDIV_DATA_DIR
#define DUALDIV_DATA_DIR "data"
#endif

namespace dualdiv {

enum class Mode { SolveDividend, SolveInjection, Verify, Simulate, Figure1, Figure2 };
enum class ProblemSet { Dividend, Injection, Both };

inline const char* mode_name(Mode m) {
    switch (m) {
        case Mode::SolveDividend: return "solve-dividend";
        case Mode::SolveInjection: return "solve-injection";
        case Mode::Verify: return "verify";
        case Mode::Simulate: return "simulate";
        case Mode::Figure1: return "figure1";
        case Mode::Figure2: return "figure2";
    }
    return "";
}

inline const std::vector<double>& figure1_drifts() {
    static const std::vector<double> v{2.0, 2.33, 2.67, 3.0};
    return v;
}
inline const std::vector<double>& figure2_costs() {
    static const std::vector<double> v{1.001, 1.5, 2.0, 5.0};
    return v;
}

inline std::string default_phase_type_file() {
    return std::string(DUALDIV_DATA_DIR) + "/phase_type_abs_normal6.json";
}

struct GridConfig {
    double x_min = 0.0;
    double x_max = 15.0;
    int points = 301;
};

struct VerifyConfig {
    double tolerance = 1e-6;
    int points = 200;
    int negative_points = 10;
    bool cross_check = false;
};

struct SimulateConfig {
    SimConfig sim;
    bool trace = false;
    std::vector<double> x0;  // empty: start at the barrier
};

struct RunConfig {
    Mode mode = Mode::SolveDividend;
    ModelSpec model;
    std::string phase_type_source;
    double q = 0.05;
    double phi = 2.0;
    std::vector<double> sigmas;
    std::vector<double> drift_sweep;
    std::vector<double> phi_sweep;
    ProblemSet problems = ProblemSet::Both;
    GridConfig grid;
    VerifyConfig verify;
    SimulateConfig simulate;
    std::string output_dir = ".";
};

/// Command-line values that take precedence over the config file.
struct CliOverrides {
    std::optional<double> sigma;
    std::optional<double> drift;
    std::optional<double> q;
    std::optional<double> phi;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<long> paths;
    std::optional<double> dt;
};

namespace detail {

using nlohmann::json;

inline std::string line_context(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline void reject_unknown(const json& obj, const std::string& where,
                           std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ParseError(where + ": expected an object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& item : obj.items()) {
        if (!keys.count(item.key())) throw ParseError("unknown key '" + where + item.key() + "'");
    }
}

inline double get_number(const json& obj, const char* key, const std::string& where, double fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ParseError("field '" + where + key + "': expected a number");
    return v.get<double>();
}

inline long get_integer(const json& obj, const char* key, const std::string& where, long fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) throw ParseError("field '" + where + key + "': expected an integer");
    return v.get<long>();
}

inline bool get_bool(const json& obj, const char* key, const std::string& where, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_boolean()) throw ParseError("field '" + where + key + "': expected true or false");
    return v.get<bool>();
}

inline std::string get_string(const json& obj, const char* key, const std::string& where,
                              const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_string()) throw ParseError("field '" + where + key + "': expected a string");
    return v.get<std::string>();
}

inline std::vector<double> get_vector(const json& v, const std::string& field) {
    if (!v.is_array()) throw ParseError("field '" + field + "': expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ParseError("field '" + field + "': expected an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

inline std::vector<std::vector<double>> get_matrix(const json& v, const std::string& field) {
    if (!v.is_array()) throw ParseError("field '" + field + "': expected an array of arrays");
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(get_vector(v[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": malformed JSON at " + line_context(text, e.byte));
    }
}

}  // namespace detail

/// Reads alpha and T from a phase-type data file; alpha is rescaled to sum 1.
inline void load_phase_type_file(const std::string& path, ModelSpec& spec) {
    const auto doc = detail::read_json_file(path);
    detail::reject_unknown(doc, "", {"description", "alpha", "T"});
    if (!doc.contains("alpha") || !doc.contains("T")) throw ParseError(path + ": needs both 'alpha' and 'T'");
    spec.alpha = detail::get_vector(doc.at("alpha"), "alpha");
    spec.T = detail::get_matrix(doc.at("T"), "T");
    double total = 0.0;
    for (double a : spec.alpha) total += a;
    if (!(total > 0.0)) throw InvalidPhaseType(path + ": alpha must have a positive sum");
    for (double& a : spec.alpha) a /= total;
}

/// Reference model: lambda = 3.5 with the bundled 6-phase fit to |N(0,1)|.
inline ModelSpec paper_model(double drift_d, double sigma) {
    ModelSpec spec{drift_d, sigma, 3.5, {}, {}};
    load_phase_type_file(default_phase_type_file(), spec);
    return spec;
}

/// Builds a RunConfig from a parsed document. Every key is optional; defaults
/// are the reference model with drift 2.33, sigma 0 and q = 0.05.
inline RunConfig parse_config(const nlohmann::json& doc, Mode mode) {
    using detail::get_number;
    detail::reject_unknown(doc, "", {"model", "q", "phi", "sigmas", "drift_sweep", "phi_sweep", "problems",
                                     "grid", "verify", "simulation", "output_dir"});
    RunConfig cfg;
    cfg.mode = mode;
    cfg.model = ModelSpec{2.33, 0.0, 3.5, {}, {}};

    const auto model = doc.value("model", nlohmann::json::object());
    detail::reject_unknown(model, "model.", {"drift_d", "sigma", "lambda", "alpha", "T", "phase_type_file"});
    cfg.model.drift_d = get_number(model, "drift_d", "model.", cfg.model.drift_d);
    cfg.model.sigma = get_number(model, "sigma", "model.", cfg.model.sigma);
    cfg.model.lambda = get_number(model, "lambda", "model.", cfg.model.lambda);
    const bool inline_pt = model.contains("alpha") || model.contains("T");
    if (inline_pt) {
        if (!model.contains("alpha") || !model.contains("T"))
            throw ParseError("model: 'alpha' and 'T' must be given together");
        if (model.contains("phase_type_file"))
            throw ParseError("model: give either 'alpha'/'T' or 'phase_type_file', not both");
        cfg.model.alpha = detail::get_vector(model.at("alpha"), "model.alpha");
        cfg.model.T = detail::get_matrix(model.at("T"), "model.T");
        cfg.phase_type_source = "inline";
    } else {
        cfg.phase_type_source = detail::get_string(model, "phase_type_file", "model.", default_phase_type_file());
        load_phase_type_file(cfg.phase_type_source, cfg.model);
    }

    cfg.q = get_number(doc, "q", "", cfg.q);
    cfg.phi = get_number(doc, "phi", "", cfg.phi);
    if (doc.contains("sigmas")) cfg.sigmas = detail::get_vector(doc.at("sigmas"), "sigmas");
    if (doc.contains("drift_sweep")) cfg.drift_sweep = detail::get_vector(doc.at("drift_sweep"), "drift_sweep");
    if (doc.contains("phi_sweep")) cfg.phi_sweep = detail::get_vector(doc.at("phi_sweep"), "phi_sweep");

    const std::string problems = detail::get_string(doc, "problems", "", "both");
    if (problems == "dividend") cfg.problems = ProblemSet::Dividend;
    else if (problems == "injection") cfg.problems = ProblemSet::Injection;
    else if (problems == "both") cfg.problems = ProblemSet::Both;
    else throw ParseError("field 'problems': expected dividend, injection or both");

    const auto grid = doc.value("grid", nlohmann::json::object());
    detail::reject_unknown(grid, "grid.", {"x_min", "x_max", "points"});
    cfg.grid.x_min = get_number(grid, "x_min", "grid.", cfg.grid.x_min);
    cfg.grid.x_max = get_number(grid, "x_max", "grid.", cfg.grid.x_max);
    cfg.grid.points = static_cast<int>(detail::get_integer(grid, "points", "grid.", cfg.grid.points));

    const auto verify = doc.value("verify", nlohmann::json::object());
    detail::reject_unknown(verify, "verify.", {"tolerance", "points", "negative_points", "cross_check"});
    cfg.verify.tolerance = get_number(verify, "tolerance", "verify.", cfg.verify.tolerance);
    cfg.verify.points = static_cast<int>(detail::get_integer(verify, "points", "verify.", cfg.verify.points));
    cfg.verify.negative_points =
        static_cast<int>(detail::get_integer(verify, "negative_points", "verify.", cfg.verify.negative_points));
    cfg.verify.cross_check = detail::get_bool(verify, "cross_check", "verify.", cfg.verify.cross_check);

    const auto sim = doc.value("simulation", nlohmann::json::object());
    detail::reject_unknown(sim, "simulation.",
                           {"paths", "dt", "t_max", "seed", "antithetic", "horizon", "threads", "trace", "x0"});
    auto& s = cfg.simulate.sim;
    s.n_paths = detail::get_integer(sim, "paths", "simulation.", s.n_paths);
    s.dt = get_number(sim, "dt", "simulation.", s.dt);
    s.t_max = get_number(sim, "t_max", "simulation.", s.t_max);
    if (sim.contains("seed")) {
        if (!sim.at("seed").is_number_unsigned()) throw ParseError("field 'simulation.seed': expected an unsigned integer");
        s.seed = sim.at("seed").get<std::uint64_t>();
    }
    s.antithetic = detail::get_bool(sim, "antithetic", "simulation.", s.antithetic);
    const std::string horizon = detail::get_string(sim, "horizon", "simulation.", "killing");
    if (horizon == "killing") s.horizon = Horizon::ExponentialKilling;
    else if (horizon == "discounted") s.horizon = Horizon::Discounted;
    else throw ParseError("field 'simulation.horizon': expected killing or discounted");
    s.threads = static_cast<int>(detail::get_integer(sim, "threads", "simulation.", s.threads));
    cfg.simulate.trace = detail::get_bool(sim, "trace", "simulation.", false);
    if (sim.contains("x0")) cfg.simulate.x0 = detail::get_vector(sim.at("x0"), "simulation.x0");

    cfg.output_dir = detail::get_string(doc, "output_dir", "", cfg.output_dir);
    return cfg;
}

inline RunConfig parse_config_text(const std::string& text, Mode mode) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("malformed JSON at " + detail::line_context(text, e.byte));
    }
    return parse_config(doc, mode);
}

inline RunConfig parse_config_file(const std::string& path, Mode mode) {
    return parse_config(detail::read_json_file(path), mode);
}

/// Applies command-line overrides, fills mode defaults and checks every
/// invariant; the model itself is checked through validate_model.
inline void finalize_config(RunConfig& cfg, const CliOverrides& cli = {}) {
    if (cli.drift) cfg.model.drift_d = *cli.drift;
    if (cli.q) cfg.q = *cli.q;
    if (cli.phi) cfg.phi = *cli.phi;
    if (cli.out) cfg.output_dir = *cli.out;
    if (cli.seed) cfg.simulate.sim.seed = *cli.seed;
    if (cli.paths) cfg.simulate.sim.n_paths = *cli.paths;
    if (cli.dt) cfg.simulate.sim.dt = *cli.dt;
    if (cli.sigma) cfg.sigmas = {*cli.sigma};
    if (cli.sigma) cfg.model.sigma = *cli.sigma;

    const bool figure = cfg.mode == Mode::Figure1 || cfg.mode == Mode::Figure2;
    if (cfg.sigmas.empty()) cfg.sigmas = figure ? std::vector<double>{0.0, 1.0} : std::vector<double>{cfg.model.sigma};
    if (cfg.drift_sweep.empty())
        cfg.drift_sweep = cfg.mode == Mode::Figure1 ? figure1_drifts() : std::vector<double>{cfg.model.drift_d};
    if (cfg.phi_sweep.empty())
        cfg.phi_sweep = cfg.mode == Mode::Figure2 ? figure2_costs() : std::vector<double>{cfg.phi};
    if (cfg.mode == Mode::Figure1 || cfg.mode == Mode::SolveDividend) cfg.problems = ProblemSet::Dividend;
    if (cfg.mode == Mode::Figure2 || cfg.mode == Mode::SolveInjection) cfg.problems = ProblemSet::Injection;

    auto sorted_unique = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    sorted_unique(cfg.sigmas);
    sorted_unique(cfg.drift_sweep);
    sorted_unique(cfg.phi_sweep);

    if (!(cfg.q > 0.0)) throw ValidationError("q must be > 0");
    for (double d : cfg.drift_sweep)
        if (!(d > 0.0)) throw ValidationError("drift sweep values must be > 0");
    for (double p : cfg.phi_sweep) {
        if (!(p > 0.0)) throw ValidationError("phi sweep values must be > 0");
        if (!(p > 1.0)) throw InvalidCost("injection cost phi must exceed 1");
    }
    if (cfg.grid.points < 2) throw ValidationError("grid.points must be >= 2");
    if (!(cfg.grid.x_max > cfg.grid.x_min) || cfg.grid.x_min < 0.0)
        throw ValidationError("grid must satisfy 0 <= x_min < x_max");
    if (cfg.verify.points < 2) throw ValidationError("verify.points must be >= 2");
    if (cfg.verify.negative_points < 0) throw ValidationError("verify.negative_points must be >= 0");
    if (!(cfg.verify.tolerance > 0.0)) throw ValidationError("verify.tolerance must be > 0");
    for (double x : cfg.simulate.x0)
        if (!(x >= 0.0)) throw ValidationError("simulation.x0 values must be >= 0");

    for (double sigma : cfg.sigmas)
        for (double d : cfg.drift_sweep) {
            ModelSpec spec = cfg.model;
            spec.sigma = sigma;
            spec.drift_d = d;
            validate_model(spec);
        }
    if (cfg.simulate.sim.t_max == 0.0) cfg.simulate.sim.t_max = 20.0 / cfg.q;
    if (cfg.mode == Mode::Simulate) {
        for (double sigma : cfg.sigmas) {
            ModelSpec spec = cfg.model;
            spec.sigma = sigma;
            SimConfig probe = cfg.simulate.sim;
            detail::validate_sim(validate_model(spec), cfg.q, probe);
        }
    }
}

/// The resolved configuration as it is embedded in every CSV header.
inline nlohmann::json resolved_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["mode"] = mode_name(cfg.mode);
    j["model"] = {{"drift_d", cfg.model.drift_d}, {"lambda", cfg.model.lambda}, {"alpha", cfg.model.alpha},
                  {"T", cfg.model.T}, {"phase_type_source", cfg.phase_type_source}};
    j["q"] = cfg.q;
    j["sigmas"] = cfg.sigmas;
    const char* problems[] = {"dividend", "injection", "both"};
    j["problems"] = problems[static_cast<int>(cfg.problems)];
    if (cfg.problems != ProblemSet::Injection) j["drift_sweep"] = cfg.drift_sweep;
    if (cfg.problems != ProblemSet::Dividend) j["phi_sweep"] = cfg.phi_sweep;
    if (cfg.mode == Mode::Verify) {
        j["verify"] = {{"tolerance", cfg.verify.tolerance}, {"points", cfg.verify.points},
                       {"negative_points", cfg.verify.negative_points}, {"cross_check", cfg.verify.cross_check}};
    } else if (cfg.mode == Mode::Simulate) {
        const auto& s = cfg.simulate.sim;
        j["simulation"] = {{"paths", s.n_paths},
                           {"dt", s.dt},
                           {"t_max", s.t_max},
                           {"seed", s.seed},
                           {"antithetic", s.antithetic},
                           {"horizon", s.horizon == Horizon::Discounted ? "discounted" : "killing"},
                           {"x0", cfg.simulate.x0}};
    } else {
        j["grid"] = {{"x_min", cfg.grid.x_min}, {"x_max", cfg.grid.x_max}, {"points", cfg.grid.points}};
    }
    return j;
}

namespace detail {

class CsvFile {
public:
    CsvFile(const std::filesystem::path& path, const std::string& header_comment, const std::string& columns)
        : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw Error("cannot write '" + path.string() + "'");
        out_ << "# " << header_comment << '\n' << columns << '\n';
    }
    template <class... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }
    const std::filesystem::path& path() const { return path_; }

private:
    static std::string cell(double v) { return fmt17(v); }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(int v) { return std::to_string(v); }

    std::filesystem::path path_;
    std::ofstream out_;
};

/// Short label for file names (%g).
inline std::string sigma_tag(double sigma) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", sigma);
    return buf;
}

inline std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) xs[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    return xs;
}

}  // namespace detail

struct RunOutcome {
    int exit_code = 0;
    std::vector<std::string> files;
};

/// Executes the configured pipeline and writes its CSV artifacts into
/// cfg.output_dir. exit_code is 1 when a VI check fails or a Monte Carlo
/// z-score exceeds 4, and 0 otherwise.
inline RunOutcome run(const RunConfig& cfg, std::ostream& log) {
    namespace fs = std::filesystem;
    using detail::CsvFile;
    RunOutcome outcome;
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    const std::string header = std::string("dualdiv ") + mode_name(cfg.mode) + " " + resolved_json(cfg).dump();
    const std::string stem = cfg.mode == Mode::SolveDividend    ? "dividend"
                             : cfg.mode == Mode::SolveInjection ? "injection"
                                                                : mode_name(cfg.mode);
    const bool do_div = cfg.problems != ProblemSet::Injection;
    const bool do_inj = cfg.problems != ProblemSet::Dividend;
    const auto xs = detail::linspace(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.points);

    auto model_at = [&](double sigma, double drift) {
        ModelSpec spec = cfg.model;
        spec.sigma = sigma;
        spec.drift_d = drift;
        return validate_model(spec);
    };

    if (cfg.mode == Mode::SolveDividend || cfg.mode == Mode::SolveInjection || cfg.mode == Mode::Figure1 ||
        cfg.mode == Mode::Figure2) {
        CsvFile summary(dir / (stem + "_summary.csv"), header,
                        "problem,sigma,sweep_key,barrier,value_at_barrier,mu,phi_q");
        for (double sigma : cfg.sigmas) {
            CsvFile data(dir / (stem + "_sigma" + detail::sigma_tag(sigma) + ".csv"), header,
                         "sweep_key,x,value,derivative,barrier,mu,phi_q");
            if (do_div) {
                for (double d : cfg.drift_sweep) {
                    const auto sol = optimal_barrier_a(model_at(sigma, d), cfg.q);
                    for (double x : xs)
                        data.row(d, x, value_dividend_opt(sol, x), value_derivatives(sol, sol.a_star, x).first,
                                 sol.a_star, sol.mu, sol.sf.phi());
                    summary.row("dividend", sigma, d, sol.a_star, sol.value_at_barrier, sol.mu, sol.sf.phi());
                }
            }
            if (do_inj) {
                const auto sf = build_scale(model_at(sigma, cfg.model.drift_d), cfg.q);
                for (double p : cfg.phi_sweep) {
                    const auto sol = optimal_barrier_b(sf, p);
                    for (double x : xs)
                        data.row(p, x, value_injection_opt(sol, x), injection_derivatives(sol, sol.b_star, x).first,
                                 sol.b_star, sol.mu, sf.phi());
                    summary.row("injection", sigma, p, sol.b_star, value_injection_opt(sol, sol.b_star), sol.mu,
                                sf.phi());
                }
            }
            outcome.files.push_back(data.path().string());
        }
        outcome.files.push_back(summary.path().string());
    } else if (cfg.mode == Mode::Verify) {
        CsvFile summary(dir / "verify_summary.csv", header,
                        "problem,sigma,sweep_key,barrier,max_violation,tolerance,route_discrepancy,pass");
        GridSpec grid;
        grid.points = cfg.verify.points;
        grid.tolerance = cfg.verify.tolerance;
        grid.cross_check = cfg.verify.cross_check;
        auto record = [&](const char* problem, double sigma, double key, double barrier, const VIReport& rep) {
            const double disc = rep.route_discrepancy ? *rep.route_discrepancy : 0.0;
            summary.row(problem, sigma, key, barrier, rep.max_violation, rep.tolerance, disc,
                        rep.pass ? "true" : "false");
            log << problem << " sigma=" << fmt17(sigma) << " key=" << fmt17(key)
                << " max_violation=" << fmt17(rep.max_violation) << (rep.pass ? " PASS" : " FAIL") << '\n';
            if (!rep.pass) outcome.exit_code = 1;
        };
        for (double sigma : cfg.sigmas) {
            const std::string tag = detail::sigma_tag(sigma);
            if (do_div) {
                CsvFile rows(dir / ("verify_dividend_sigma" + tag + ".csv"), header,
                             "sweep_key,x,gen_value,deriv_value,margin");
                for (double d : cfg.drift_sweep) {
                    const auto sol = optimal_barrier_a(model_at(sigma, d), cfg.q);
                    const auto rep = check_vi_dividend(sol, grid);
                    for (const auto& r : rep.rows) rows.row(d, r.x, r.gen_value, r.deriv_value, r.margin);
                    record("dividend", sigma, d, sol.a_star, rep);
                }
                outcome.files.push_back(rows.path().string());
            }
            if (do_inj) {
                CsvFile rows(dir / ("verify_injection_sigma" + tag + ".csv"), header,
                             "sweep_key,x,gen_value,deriv_value,margin");
                GridSpec g = grid;
                g.negative_points = cfg.verify.negative_points;
                const auto sf = build_scale(model_at(sigma, cfg.model.drift_d), cfg.q);
                for (double p : cfg.phi_sweep) {
                    const auto sol = optimal_barrier_b(sf, p);
                    const auto rep = check_vi_injection(sol, g);
                    for (const auto& r : rep.rows) rows.row(p, r.x, r.gen_value, r.deriv_value, r.margin);
                    record("injection", sigma, p, sol.b_star, rep);
                }
                outcome.files.push_back(rows.path().string());
            }
        }
        outcome.files.push_back(summary.path().string());
    } else {
        CsvFile summary(dir / "simulate_summary.csv", header,
                        "problem,sigma,sweep_key,barrier,x0,mean,std_error,ci_lo,ci_hi,closed_form,z_score,"
                        "n_paths,dt,truncation_bound");
        auto starts = [&](double barrier) {
            return cfg.simulate.x0.empty() ? std::vector<double>{barrier} : cfg.simulate.x0;
        };
        auto report = [&](const char* problem, double sigma, double key, double barrier, double x0,
                          const SimEstimate& est, double closed) {
            const double z = est.z_score(closed);
            summary.row(problem, sigma, key, barrier, x0, est.mean, est.std_error, est.ci95.first, est.ci95.second,
                        closed, z, est.n_paths, est.dt, est.truncation_bound);
            log << problem << " sigma=" << fmt17(sigma) << " key=" << fmt17(key) << " x0=" << fmt17(x0)
                << " mean=" << fmt17(est.mean) << " closed_form=" << fmt17(closed) << " z=" << fmt17(z) << '\n';
            if (!(std::abs(z) <= 4.0)) outcome.exit_code = 1;
        };
        auto with_trace = [&](const std::string& name, auto&& body) {
            SimConfig sim = cfg.simulate.sim;
            std::ofstream trace;
            if (cfg.simulate.trace) {
                const fs::path p = dir / name;
                trace.open(p, std::ios::binary);
                if (!trace) throw Error("cannot write '" + p.string() + "'");
                trace << "# " << header << '\n';
                sim.trace = &trace;
                outcome.files.push_back(p.string());
            }
            body(sim);
        };
        for (double sigma : cfg.sigmas) {
            const std::string tag = detail::sigma_tag(sigma);
            if (do_div) {
                for (double d : cfg.drift_sweep) {
                    const auto model = model_at(sigma, d);
                    const auto sol = optimal_barrier_a(model, cfg.q);
                    for (double x0 : starts(sol.a_star)) {
                        with_trace("simulate_trace_dividend_sigma" + tag + "_" + detail::sigma_tag(d) + "_x" + detail::sigma_tag(x0) + ".csv",
                                   [&](const SimConfig& sim) {
                                       const auto est = simulate_dividend(model, cfg.q, sol.a_star, x0, sim);
                                       report("dividend", sigma, d, sol.a_star, x0, est, value_dividend_opt(sol, x0));
                                   });
                    }
                }
            }
            if (do_inj) {
                const auto model = model_at(sigma, cfg.model.drift_d);
                const auto sf = build_scale(model, cfg.q);
                for (double p : cfg.phi_sweep) {
                    const auto sol = optimal_barrier_b(sf, p);
                    for (double x0 : starts(sol.b_star)) {
                        with_trace("simulate_trace_injection_sigma" + tag + "_" + detail::sigma_tag(p) + "_x" + detail::sigma_tag(x0) + ".csv",
                                   [&](const SimConfig& sim) {
                                       const auto est = simulate_injection(model, cfg.q, sol.b_star, p, x0, sim);
                                       report("injection", sigma, p, sol.b_star, x0, est, value_injection_opt(sol, x0));
                                   });
                    }
                }
            }
        }
        outcome.files.push_back(summary.path().string());
    }
    return outcome;
}

}  // namespace dualdiv
