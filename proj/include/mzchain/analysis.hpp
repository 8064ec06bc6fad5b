#pragma once

// Shape of the r(eta) curve at fixed (phi, N) and the inverse tuning problem:
// choose N (with phi = pi/N) so the absorption peak lands on a target transmissivity.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "mzchain/core.hpp"

namespace mzchain::analysis {

inline constexpr int default_grid_points = 2001;

struct ProfileSample {
    double eta = 0.0;
    double r = 0.0;
};

/// r(eta) sampled on a uniform grid over [0, 1], endpoints included.
struct AbsorptionProfile {
    double phi = 0.0;
    int n_steps = 0;
    std::vector<ProfileSample> samples;

    double spacing() const { return samples.size() < 2 ? 0.0 : 1.0 / double(samples.size() - 1); }
};

inline double grid_eta(std::size_t i, std::size_t points) {
    return i + 1 == points ? 1.0 : double(i) / double(points - 1);
}

inline AbsorptionProfile absorption_curve(const ChainConfig& config, int grid_points = default_grid_points) {
    if (grid_points < 3) throw DomainError("an absorption profile needs at least 3 grid points");
    AbsorptionProfile profile{config.phi(), config.n_steps(), {}};
    const auto points = static_cast<std::size_t>(grid_points);
    profile.samples.resize(points);
    for (std::size_t i = 0; i < points; ++i) {
        const double eta = grid_eta(i, points);
        profile.samples[i] = {eta, absorbed_fraction(config, eta)};
    }
    return profile;
}

inline AbsorptionProfile absorption_curve(double phi, int n_steps, int grid_points = default_grid_points) {
    return absorption_curve(ChainConfig(phi, n_steps), grid_points);
}

struct PeakSummary {
    double eta_max = 0.0;
    double r_max = 0.0;
    double eta_av = 0.0;
    double fwhm = 0.0;
    double rms_width = 0.0;
};

namespace detail {

struct Vertex {
    double x;
    double y;
};

// Vertex of the parabola through (x-h, y0), (x, y1), (x+h, y2).
inline Vertex parabolic_vertex(double x, double h, double y0, double y1, double y2) {
    const double curvature = y0 - 2.0 * y1 + y2;
    if (!(curvature < 0.0)) return {x, y1};
    const double offset = std::clamp(0.5 * (y0 - y2) / curvature, -1.0, 1.0);
    return {x + offset * h, y1 - 0.25 * (y0 - y2) * offset};
}

// eta at which the segment (a, b) reaches `level`; a.r and b.r bracket it.
inline double crossing(const ProfileSample& a, const ProfileSample& b, double level) {
    if (b.r == a.r) return a.eta;
    return a.eta + (level - a.r) * (b.eta - a.eta) / (b.r - a.r);
}

}  // namespace detail

/// Peak position (grid argmax refined by a parabola), r-weighted centroid,
/// full width at half maximum and RMS width of a profile.
///
/// Half-maximum crossings are the outermost ones; an edge of [0,1] stands in
/// for a crossing the curve never reaches.
inline PeakSummary peak_summary(const AbsorptionProfile& profile) {
    const auto& s = profile.samples;
    if (s.size() < 3) throw DomainError("peak_summary needs at least 3 samples");

    double weight = 0.0, first = 0.0, second = 0.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        weight += s[i].r;
        first += s[i].eta * s[i].r;
        second += s[i].eta * s[i].eta * s[i].r;
        if (s[i].r > s[arg].r) arg = i;
    }
    if (!(weight > 0.0)) throw EmptyPeakError("absorption profile is identically zero");

    PeakSummary out;
    out.eta_max = s[arg].eta;
    out.r_max = s[arg].r;
    if (arg > 0 && arg + 1 < s.size()) {
        const auto v = detail::parabolic_vertex(s[arg].eta, profile.spacing(), s[arg - 1].r, s[arg].r,
                                                s[arg + 1].r);
        out.eta_max = std::clamp(v.x, 0.0, 1.0);
        out.r_max = std::max(v.y, s[arg].r);
    }

    out.eta_av = first / weight;
    out.rms_width = std::sqrt(std::max(0.0, second / weight - out.eta_av * out.eta_av));

    const double half = 0.5 * out.r_max;
    std::size_t lo = 0;
    while (s[lo].r < half) ++lo;
    std::size_t hi = s.size() - 1;
    while (s[hi].r < half) --hi;
    const double left = lo == 0 ? s.front().eta : detail::crossing(s[lo - 1], s[lo], half);
    const double right = hi + 1 == s.size() ? s.back().eta : detail::crossing(s[hi], s[hi + 1], half);
    out.fwhm = std::max(0.0, right - left);
    return out;
}

struct PeakRow {
    int n_steps;
    PeakSummary summary;
};

/// Peak summaries of the phi = pi/N profiles for N = n_min..n_max, ordered by N.
inline std::vector<PeakRow> peak_table(int n_min, int n_max, int grid_points = default_grid_points) {
    if (n_min < 2 || n_max < n_min)
        throw DomainError("peak_table needs 2 <= n_min <= n_max, got " + std::to_string(n_min) + ".." +
                          std::to_string(n_max));
    std::vector<PeakRow> rows;
    rows.reserve(static_cast<std::size_t>(n_max - n_min + 1));
    for (int n = n_min; n <= n_max; ++n)
        rows.push_back({n, peak_summary(absorption_curve(ChainConfig::pi_over_n(n), grid_points))});
    return rows;
}

/// Peak position predicted by the empirical interpolation ((N-1)/N)^4.
inline double interpolated_peak(int n_steps) {
    const double ratio = double(n_steps - 1) / double(n_steps);
    return ratio * ratio * ratio * ratio;
}

struct TuneResult {
    int n_steps = 0;
    double phi = 0.0;
    double achieved_eta_max = 0.0;
    double residual = 0.0;
};

/// Picks N in [2, n_max] (phi = pi/N) whose peak is closest to eta_target.
///
/// Starts from the inverted interpolation N0 = round(1/(1 - target^{1/4})) and walks
/// neighbouring N, relying on the peak position growing with N. Only discrete peak
/// positions exist, so the residual can be large for low targets; it is reported as is.
inline TuneResult tune_for_target(double eta_target, int n_max, int grid_points = default_grid_points) {
    if (!(eta_target > 0.0 && eta_target < 1.0))
        throw DomainError("target transmissivity must lie in (0,1), got " + std::to_string(eta_target));
    if (n_max < 2) throw DomainError("tune_for_target needs n_max >= 2");

    std::map<int, double> cache;
    auto peak = [&](int n) {
        auto it = cache.find(n);
        if (it == cache.end()) {
            const double eta_max =
                peak_summary(absorption_curve(ChainConfig::pi_over_n(n), grid_points)).eta_max;
            it = cache.emplace(n, eta_max).first;
        }
        return it->second;
    };

    const double top = peak(n_max);
    if (eta_target > top) throw UnreachableTargetError(eta_target, n_max, top);

    const double guess = 1.0 / (1.0 - std::pow(eta_target, 0.25));
    int n = static_cast<int>(std::clamp(std::round(guess), 2.0, double(n_max)));
    while (n < n_max && peak(n) < eta_target) ++n;
    while (n > 2 && peak(n - 1) >= eta_target) --n;

    int best = n;
    if (n > 2 && std::abs(peak(n - 1) - eta_target) < std::abs(peak(n) - eta_target)) best = n - 1;
    return {best, pi / best, peak(best), std::abs(peak(best) - eta_target)};
}

}  // namespace mzchain::analysis
