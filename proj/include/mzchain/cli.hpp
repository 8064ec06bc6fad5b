#pragma once

// Command-line front end. Every subcommand writes CSV with a header row, a comma
// separator, '\n' line endings and 12 significant digits.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mzchain/analysis.hpp"
#include "mzchain/core.hpp"
#include "mzchain/estimation.hpp"
#include "mzchain/format.hpp"
#include "mzchain/imaging.hpp"

namespace mzchain::cli {

enum ExitCode : int { success = 0, failure = 1, usage_error = 2, domain_error = 3 };

/// Flags of every subcommand; only those of the selected one are meaningful.
struct RunConfig {
    std::string subcommand;
    std::string output;  // empty: standard output

    int n_steps = 0;
    std::optional<double> phi;
    bool pi_over_n = false;
    bool allow_degenerate = false;
    double eta = 1.0;
    double theta = 0.0;
    int points = analysis::default_grid_points;

    int n_min = 2;
    int n_max = 0;
    double target = 0.0;

    double true_eta = 1.0;
    double sigma_r = 0.0;
    int rounds = 1;
    std::uint64_t seed = 0;
    double target_uncertainty = 0.0;
    int n_cap = 500;

    std::string map_path;
    std::string map_format;  // empty: from the file extension
    std::string dose_path;
    double band = imaging::default_band;
};

namespace detail {

inline void row(std::ostream& out, std::initializer_list<std::string> cells) {
    bool first = true;
    for (const auto& cell : cells) {
        if (!first) out << ',';
        out << cell;
        first = false;
    }
    out << '\n';
}

inline std::string num(double v) { return format_number(v); }
inline std::string num(int v) { return std::to_string(v); }

inline ChainConfig chain_from(const RunConfig& rc) {
    if (rc.pi_over_n) return ChainConfig::pi_over_n(rc.n_steps);
    return ChainConfig(*rc.phi, rc.n_steps, 1.0, rc.allow_degenerate ? Degenerate::allow : Degenerate::reject);
}

inline void propagate(const RunConfig& rc, std::ostream& out) {
    const ChainConfig config = chain_from(rc);
    const ObjectModel object(rc.eta, rc.theta);
    const ModePair result = propagate_iterative(config, object);
    row(out, {"alpha_re", "alpha_im", "beta_re", "beta_im", "r"});
    row(out, {num(result.alpha.real()), num(result.alpha.imag()), num(result.beta.real()),
              num(result.beta.imag()), num(absorbed_fraction(config, object))});
}

inline void curve(const RunConfig& rc, std::ostream& out) {
    const auto profile = analysis::absorption_curve(chain_from(rc), rc.points);
    row(out, {"eta", "r"});
    for (const auto& s : profile.samples) row(out, {num(s.eta), num(s.r)});
}

inline void peaks(const RunConfig& rc, std::ostream& out) {
    row(out, {"N", "eta_max", "r_max", "eta_av", "fwhm", "rms"});
    for (const auto& [n, p] : analysis::peak_table(rc.n_min, rc.n_max, rc.points))
        row(out, {num(n), num(p.eta_max), num(p.r_max), num(p.eta_av), num(p.fwhm), num(p.rms_width)});
}

inline void tune(const RunConfig& rc, std::ostream& out) {
    const auto t = analysis::tune_for_target(rc.target, rc.n_max, rc.points);
    row(out, {"N", "phi", "achieved", "residual"});
    row(out, {num(t.n_steps), num(t.phi), num(t.achieved_eta_max), num(t.residual)});
}

inline void estimate(const RunConfig& rc, std::ostream& out) {
    estimation::FeedbackOptions options;
    options.n_cap = rc.n_cap;
    const auto trace = estimation::feedback_estimate(rc.true_eta, {rc.sigma_r, rc.seed}, rc.rounds,
                                                     rc.target_uncertainty, options);
    row(out, {"round", "N", "phi", "r_measured", "eta_estimate", "eta_uncertainty", "dose", "cumulative_dose",
              "flagged"});
    double cumulative = 0.0;
    for (const auto& r : trace.rounds) {
        cumulative += r.dose;
        row(out, {num(r.round), num(r.n_steps), num(r.phi), num(r.r_measured), num(r.eta_estimate),
                  num(r.eta_uncertainty), num(r.dose), num(cumulative), r.flagged ? "1" : "0"});
    }
}

inline void irradiate(const RunConfig& rc, std::ostream& err) {
    const imaging::TransmissivityMap map =
        rc.map_format.empty()
            ? imaging::load_map(rc.map_path)
            : imaging::load_map(rc.map_path, rc.map_format == "pgm" ? imaging::MapFormat::pgm
                                                                     : imaging::MapFormat::csv);
    const auto plan = imaging::selective_plan(map, rc.target, rc.n_max, rc.band, rc.points);

    std::ofstream file(rc.dose_path, std::ios::binary);
    if (!file) throw Error("cannot open output file '" + rc.dose_path + "'");
    if (imaging::format_from_path(rc.dose_path) == imaging::MapFormat::pgm)
        imaging::write_dose_pgm(file, plan.dose);
    else
        imaging::write_dose_csv(file, plan.dose);
    if (!file) throw Error("failed writing '" + rc.dose_path + "'");

    err << "selectivity=" << num(plan.selectivity) << " direct_selectivity=" << num(plan.direct_selectivity)
        << " N=" << plan.tune.n_steps << " phi=" << num(plan.tune.phi)
        << " achieved=" << num(plan.tune.achieved_eta_max) << " residual=" << num(plan.tune.residual) << '\n';
}

}  // namespace detail

/// Builds the argument grammar, binding every flag into `rc`.
inline std::unique_ptr<CLI::App> make_app(RunConfig& rc) {
    auto app = std::make_unique<CLI::App>("Absorption tuning with a chain of Mach-Zehnder interferometers",
                                          "mzchain");
    app->require_subcommand(1);

    auto output = [&](CLI::App* sub) { sub->add_option("-o,--output", rc.output, "CSV output path (default stdout)"); };
    auto points = [&](CLI::App* sub) {
        sub->add_option("--points", rc.points, "eta grid points")->check(CLI::Range(3, 10000000))->capture_default_str();
    };

    auto* prop = app->add_subcommand("propagate", "amplitudes and r for one configuration");
    prop->add_option("--n", rc.n_steps, "number of interferometers N")->required();
    prop->add_option("--phi", rc.phi, "interferometer phase in radians")->required();
    prop->add_option("--eta", rc.eta, "object transmissivity")->required();
    prop->add_option("--theta", rc.theta, "object phase in radians");
    prop->add_flag("--allow-degenerate", rc.allow_degenerate, "accept phi = 0");
    output(prop);

    auto* curve = app->add_subcommand("curve", "r(eta) on a uniform grid");
    curve->add_option("--n", rc.n_steps, "number of interferometers N")->required();
    auto* phi_opt = curve->add_option("--phi", rc.phi, "interferometer phase in radians");
    auto* pin_opt = curve->add_flag("--pi-over-n", rc.pi_over_n, "use phi = pi/N");
    phi_opt->excludes(pin_opt);
    pin_opt->excludes(phi_opt);
    curve->add_flag("--allow-degenerate", rc.allow_degenerate, "accept phi = 0");
    points(curve);
    output(curve);

    auto* peaks = app->add_subcommand("peaks", "peak position and widths for phi = pi/N");
    peaks->add_option("--n-min", rc.n_min, "smallest N")->required();
    peaks->add_option("--n-max", rc.n_max, "largest N")->required();
    points(peaks);
    output(peaks);

    auto* tune = app->add_subcommand("tune", "choose N so the absorption peak sits at a target eta");
    tune->add_option("--target", rc.target, "target transmissivity")->required();
    tune->add_option("--n-max", rc.n_max, "largest admissible N")->required();
    points(tune);
    output(tune);

    auto* est = app->add_subcommand("estimate", "simulate the feedback estimation of eta");
    est->add_option("--true-eta", rc.true_eta, "true transmissivity")->required();
    est->add_option("--sigma-r", rc.sigma_r, "standard deviation of the noise on r")->required();
    est->add_option("--rounds", rc.rounds, "total rounds, the direct pass included")->required();
    est->add_option("--seed", rc.seed, "random seed")->required();
    est->add_option("--target-uncertainty", rc.target_uncertainty, "stop once the uncertainty drops below");
    est->add_option("--n-cap", rc.n_cap, "largest N considered per round")->capture_default_str();
    output(est);

    auto* irr = app->add_subcommand("irradiate", "dose map of a tuned chain over a transmissivity map");
    irr->add_option("--map", rc.map_path, "transmissivity map (.csv or .pgm)")->required();
    irr->add_option("--map-format", rc.map_format, "override the map format")
        ->check(CLI::IsMember({"csv", "pgm"}));
    irr->add_option("--target", rc.target, "transmissivity of the region to irradiate")->required();
    irr->add_option("--n-max", rc.n_max, "largest admissible N")->required();
    irr->add_option("--out", rc.dose_path, "dose map output (.csv, or .pgm for an 8-bit preview)")->required();
    irr->add_option("--band", rc.band, "half-width of the target band")->capture_default_str();
    points(irr);

    return app;
}

/// Parses and executes one invocation. Returns the process exit code.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig rc;
    auto app = make_app(rc);
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app->parse(reversed);
        rc.subcommand = app->get_subcommands().front()->get_name();
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app->exit(e, out, err);
            return success;
        }
        err << "usage error: " << e.what() << '\n';
        return usage_error;
    }

    if (rc.subcommand == "curve" && !rc.pi_over_n && !rc.phi) {
        err << "usage error: curve needs --phi or --pi-over-n\n";
        return usage_error;
    }

    try {
        std::ofstream file;
        if (!rc.output.empty()) {
            file.open(rc.output, std::ios::binary);
            if (!file) throw Error("cannot open output file '" + rc.output + "'");
        }
        std::ostream& sink = rc.output.empty() ? out : file;

        if (rc.subcommand == "propagate") detail::propagate(rc, sink);
        else if (rc.subcommand == "curve") detail::curve(rc, sink);
        else if (rc.subcommand == "peaks") detail::peaks(rc, sink);
        else if (rc.subcommand == "tune") detail::tune(rc, sink);
        else if (rc.subcommand == "estimate") detail::estimate(rc, sink);
        else if (rc.subcommand == "irradiate") detail::irradiate(rc, err);
        sink.flush();
        if (!sink) throw Error("failed writing output");
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return domain_error;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return failure;
    }
    return success;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace mzchain::cli
