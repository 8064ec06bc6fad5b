#pragma once

// Feedback estimation of the transmissivity: a rough direct-pass measurement, then
// rounds that re-tune the chain so r(eta) is steep around the current estimate and
// invert a fresh noisy measurement of r on a monotone branch.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mzchain/analysis.hpp"
#include "mzchain/core.hpp"

namespace mzchain::estimation {

/// Additive Gaussian noise on r, clamped to [0,1].
struct MeasurementModel {
    double sigma_r = 0.0;
    std::uint64_t seed = 0;
};

/// splitmix64 finaliser; gives each Monte Carlo replica its own stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t replica) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (replica + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stateful detector: successive calls consume successive draws of the seeded stream.
class NoisyDetector {
public:
    explicit NoisyDetector(MeasurementModel model) : model_(model), engine_(make_engine(model.seed)) {
        if (!(model.sigma_r >= 0.0) || !std::isfinite(model.sigma_r))
            throw DomainError("sigma_r must be finite and >= 0");
    }

    double measure(double true_eta, const ChainConfig& config) {
        const double r_true = absorbed_fraction(config, true_eta);
        const double g = normal_(engine_);
        return std::clamp(r_true + g * model_.sigma_r, 0.0, 1.0);
    }

    const MeasurementModel& model() const noexcept { return model_; }

private:
    static std::mt19937_64 make_engine(std::uint64_t seed) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
        return std::mt19937_64(seq);
    }

    MeasurementModel model_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Single measurement using the first draw of the model's stream.
inline double simulate_measurement(double true_eta, const ChainConfig& config, const MeasurementModel& model) {
    NoisyDetector detector(model);
    return detector.measure(true_eta, config);
}

inline constexpr double slope_step = 1e-6;

/// dr/deta by central difference, one-sided within slope_step of 0 or 1.
inline double local_slope(const ChainConfig& config, double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("local_slope needs eta in [0,1]");
    const double h = slope_step;
    if (eta - h < 0.0) return (absorbed_fraction(config, eta + h) - absorbed_fraction(config, eta)) / h;
    if (eta + h > 1.0) return (absorbed_fraction(config, eta) - absorbed_fraction(config, eta - h)) / h;
    return (absorbed_fraction(config, eta + h) - absorbed_fraction(config, eta - h)) / (2.0 * h);
}

struct Branch {
    double lo = 0.0;
    double hi = 1.0;
};

inline constexpr double inversion_tolerance = 1e-10;
inline constexpr int monotonicity_samples = 257;

/// Solves r(eta) = r_measured on a branch where r is monotone, by bisection.
/// r_measured is first clamped into the branch's range of r.
inline double invert_on_branch(const ChainConfig& config, double r_measured, Branch branch) {
    if (!(branch.lo >= 0.0 && branch.hi <= 1.0 && branch.lo <= branch.hi))
        throw DomainError("branch must satisfy 0 <= lo <= hi <= 1");
    if (branch.lo == branch.hi) return branch.lo;

    auto r = [&](double eta) { return absorbed_fraction(config, eta); };
    const double r_lo = r(branch.lo);
    const double r_hi = r(branch.hi);
    if (r_lo == r_hi) throw BranchError("r takes equal values at both branch ends; not monotone");
    const bool rising = r_hi > r_lo;

    double previous = r_lo;
    for (int k = 1; k < monotonicity_samples; ++k) {
        const double eta = k + 1 == monotonicity_samples
                               ? branch.hi
                               : branch.lo + (branch.hi - branch.lo) * k / (monotonicity_samples - 1);
        const double current = r(eta);
        if (rising ? current < previous : current > previous)
            throw BranchError("r(eta) changes direction inside [" + std::to_string(branch.lo) + ", " +
                              std::to_string(branch.hi) + "]");
        previous = current;
    }

    const double target = std::clamp(r_measured, std::min(r_lo, r_hi), std::max(r_lo, r_hi));
    double lo = branch.lo, hi = branch.hi;
    while (hi - lo > 0.5 * inversion_tolerance) {
        const double mid = 0.5 * (lo + hi);
        if ((r(mid) < target) == rising)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Interior local extrema of r(eta) for every phi = pi/N chain with N in [2, n_cap].
/// Consecutive extrema delimit the monotone branches.
class BranchAtlas {
public:
    explicit BranchAtlas(int n_cap, int grid_points = analysis::default_grid_points) : n_cap_(n_cap) {
        if (n_cap < 2) throw DomainError("n_cap must be >= 2");
        extrema_.resize(static_cast<std::size_t>(n_cap + 1));
        for (int n = 2; n <= n_cap; ++n) extrema_[std::size_t(n)] = locate_extrema(n, grid_points);
    }

    int n_cap() const noexcept { return n_cap_; }

    const std::vector<double>& extrema(int n) const { return extrema_.at(std::size_t(n)); }

    /// Monotone branch of chain N that contains [lo, hi], if no extremum lies strictly inside.
    std::optional<Branch> enclosing_branch(int n, double lo, double hi) const {
        Branch branch{0.0, 1.0};
        for (double x : extrema(n)) {
            if (x > lo && x < hi) return std::nullopt;
            if (x <= lo) branch.lo = std::max(branch.lo, x);
            if (x >= hi) branch.hi = std::min(branch.hi, x);
        }
        return branch;
    }

private:
    static std::vector<double> locate_extrema(int n, int grid_points) {
        const auto profile = analysis::absorption_curve(ChainConfig::pi_over_n(n), grid_points);
        const auto& s = profile.samples;
        const ChainConfig config = ChainConfig::pi_over_n(n);
        std::vector<double> found;
        for (std::size_t i = 1; i + 1 < s.size(); ++i) {
            const double left = s[i].r - s[i - 1].r;
            const double right = s[i + 1].r - s[i].r;
            const bool maximum = left > 0.0 && right <= 0.0;
            const bool minimum = left < 0.0 && right >= 0.0;
            if (maximum || minimum) found.push_back(refine(config, s[i - 1].eta, s[i + 1].eta, maximum));
        }
        return found;
    }

    // Golden-section search for the extremum bracketed by [a, b].
    static double refine(const ChainConfig& config, double a, double b, bool maximum) {
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        auto score = [&](double eta) {
            const double r = absorbed_fraction(config, eta);
            return maximum ? r : -r;
        };
        double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
        double f1 = score(x1), f2 = score(x2);
        while (b - a > 1e-12) {
            if (f1 < f2) {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + inv_phi * (b - a);
                f2 = score(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - inv_phi * (b - a);
                f1 = score(x1);
            }
        }
        return 0.5 * (a + b);
    }

    int n_cap_;
    std::vector<std::vector<double>> extrema_;
};

struct FeedbackOptions {
    int n_cap = 500;
    double window_sigmas = 3.0;
    /// Samples of |slope| across the window when checking the uncertainty guard.
    int guard_samples = 17;
    /// Required ratio between the worst-case slope in the window and sigma_r / sigma_prev.
    double guard_margin = 1.05;
};

struct RoundRecord {
    int round = 0;
    int n_steps = 1;
    double phi = pi;
    double r_measured = 0.0;
    double eta_estimate = 0.0;
    double eta_uncertainty = 0.0;
    double dose = 0.0;
    /// No configuration kept the identifiability window on one monotone branch
    /// while guaranteeing a smaller uncertainty.
    bool flagged = false;
};

struct EstimationTrace {
    std::vector<RoundRecord> rounds;
    double total_dose = 0.0;

    const RoundRecord& final_round() const { return rounds.back(); }
};

/// Runs the feedback protocol. The atlas is built once and reused across calls.
///
/// Round 0 is a direct pass (N = 1, phi = pi): estimate 1 - r, uncertainty sigma_r.
/// Each later round picks the phi = pi/N chain that is steepest at the current
/// estimate, among those that are monotone over estimate +- window_sigmas * sigma and
/// whose slope over that window is large enough that the new uncertainty
/// sigma_r / |slope| cannot exceed the previous one. The new measurement is inverted
/// on that window. If no chain qualifies the round is flagged: the steepest chain is
/// used on the monotone part of the window around the estimate, and the previous
/// estimate is kept if the new one would be less certain.
class FeedbackEstimator {
public:
    explicit FeedbackEstimator(FeedbackOptions options = {})
        : options_(options), atlas_(options.n_cap) {
        if (!(options.window_sigmas >= 0.0)) throw DomainError("window_sigmas must be >= 0");
        if (options.guard_samples < 2) throw DomainError("guard_samples must be >= 2");
    }

    const FeedbackOptions& options() const noexcept { return options_; }
    const BranchAtlas& atlas() const noexcept { return atlas_; }

    EstimationTrace run(double true_eta, const MeasurementModel& model, int max_rounds,
                        double target_uncertainty = 0.0) const {
        if (!(true_eta > 0.0 && true_eta <= 1.0)) throw DomainError("true_eta must lie in (0,1]");
        if (max_rounds < 1) throw DomainError("max_rounds must be >= 1");

        NoisyDetector detector(model);
        const double sigma_r = model.sigma_r;
        EstimationTrace trace;

        const ChainConfig direct(pi, 1);
        RoundRecord first;
        first.r_measured = detector.measure(true_eta, direct);
        first.eta_estimate = std::clamp(1.0 - first.r_measured, 0.0, 1.0);
        first.eta_uncertainty = sigma_r;
        first.dose = absorbed_fraction(direct, true_eta);
        record(trace, first);

        for (int k = 1; k < max_rounds && !(trace.final_round().eta_uncertainty < target_uncertainty); ++k)
            record(trace, next_round(k, trace.final_round(), true_eta, sigma_r, detector));
        return trace;
    }

private:
    static void record(EstimationTrace& trace, const RoundRecord& row) {
        trace.rounds.push_back(row);
        trace.total_dose += row.dose;
    }

    struct Candidate {
        int n;
        double slope;
    };

    RoundRecord next_round(int k, const RoundRecord& prev, double true_eta, double sigma_r,
                           NoisyDetector& detector) const {
        const double estimate = prev.eta_estimate;
        const double sigma = prev.eta_uncertainty;
        const double w_lo = std::max(0.0, estimate - options_.window_sigmas * sigma);
        const double w_hi = std::min(1.0, estimate + options_.window_sigmas * sigma);

        std::vector<Candidate> admissible;
        for (int n = 2; n <= atlas_.n_cap(); ++n)
            if (atlas_.enclosing_branch(n, w_lo, w_hi))
                admissible.push_back({n, std::abs(local_slope(ChainConfig::pi_over_n(n), estimate))});
        std::stable_sort(admissible.begin(), admissible.end(),
                         [](const Candidate& a, const Candidate& b) { return a.slope > b.slope; });

        const double required = sigma_r > 0.0 ? options_.guard_margin * sigma_r / sigma : 0.0;
        for (const Candidate& c : admissible) {
            const ChainConfig config = ChainConfig::pi_over_n(c.n);
            if (worst_slope(config, w_lo, w_hi) < required) continue;
            return measure_and_invert(k, config, Branch{w_lo, w_hi}, true_eta, sigma_r, detector, false, prev);
        }
        return flagged_round(k, prev, w_lo, w_hi, true_eta, sigma_r, detector);
    }

    double worst_slope(const ChainConfig& config, double lo, double hi) const {
        double worst = std::numeric_limits<double>::infinity();
        const int m = options_.guard_samples;
        for (int i = 0; i < m; ++i) {
            const double eta = i + 1 == m ? hi : lo + (hi - lo) * i / (m - 1);
            worst = std::min(worst, std::abs(local_slope(config, eta)));
        }
        return worst;
    }

    RoundRecord flagged_round(int k, const RoundRecord& prev, double w_lo, double w_hi, double true_eta,
                              double sigma_r, NoisyDetector& detector) const {
        const double estimate = prev.eta_estimate;
        int best_n = 2;
        double best_slope = -1.0;
        for (int n = 2; n <= atlas_.n_cap(); ++n) {
            const double slope = std::abs(local_slope(ChainConfig::pi_over_n(n), estimate));
            if (slope > best_slope) {
                best_slope = slope;
                best_n = n;
            }
        }
        // Largest monotone piece of the window that still contains the estimate.
        Branch branch{w_lo, w_hi};
        for (double x : atlas_.extrema(best_n)) {
            if (x > w_lo && x <= estimate) branch.lo = std::max(branch.lo, x);
            if (x < w_hi && x >= estimate) branch.hi = std::min(branch.hi, x);
        }
        return measure_and_invert(k, ChainConfig::pi_over_n(best_n), branch, true_eta, sigma_r, detector,
                                  true, prev);
    }

    RoundRecord measure_and_invert(int k, const ChainConfig& config, Branch branch, double true_eta,
                                   double sigma_r, NoisyDetector& detector, bool flagged,
                                   const RoundRecord& prev) const {
        RoundRecord row;
        row.round = k;
        row.n_steps = config.n_steps();
        row.phi = config.phi();
        row.flagged = flagged;
        row.r_measured = detector.measure(true_eta, config);
        row.dose = absorbed_fraction(config, true_eta);
        row.eta_estimate = std::clamp(invert_on_branch(config, row.r_measured, branch), 0.0, 1.0);
        row.eta_uncertainty =
            sigma_r > 0.0 ? sigma_r / std::abs(local_slope(config, row.eta_estimate)) : 0.0;
        if (flagged && !(row.eta_uncertainty <= prev.eta_uncertainty)) {
            row.eta_estimate = prev.eta_estimate;
            row.eta_uncertainty = prev.eta_uncertainty;
        }
        return row;
    }

    FeedbackOptions options_;
    BranchAtlas atlas_;
};

/// One-shot convenience wrapper; builds a fresh atlas.
inline EstimationTrace feedback_estimate(double true_eta, const MeasurementModel& model, int max_rounds,
                                         double target_uncertainty = 0.0, FeedbackOptions options = {}) {
    return FeedbackEstimator(options).run(true_eta, model, max_rounds, target_uncertainty);
}

}  // namespace mzchain::estimation
