#pragma once

// Forward model of the N-stage Mach-Zehnder chain with a lossy object in the R arm.

#include <algorithm>
#include <cmath>
#include <complex>

#include "mzchain/types.hpp"

namespace mzchain {

/// One stage of the chain: the interferometer followed by the object on the R output,
///
///   e^{i phi/2} [[cos(phi/2),            i sin(phi/2)          ],
///                [i q sin(phi/2),        q cos(phi/2)          ]],   q = sqrt(eta) e^{i theta}.
///
/// Compensating a known object phase is left to the caller (use phi - theta).
inline StepMatrix step_matrix(double phi, const ObjectModel& object) {
    if (!std::isfinite(phi)) throw DomainError("phi must be finite");
    const Complex prefactor = std::polar(1.0, 0.5 * phi);
    const double c = std::cos(0.5 * phi);
    const double s = std::sin(0.5 * phi);
    const Complex i{0.0, 1.0};
    const Complex q = object.amplitude_factor();
    return {prefactor * c, prefactor * i * s, prefactor * i * q * s, prefactor * q * c};
}

inline ModePair input_pair(const ChainConfig& config) { return {config.input_amplitude(), 0.0}; }

/// (alpha_N, beta_N) by N successive matrix-vector products.
inline ModePair propagate_iterative(const ChainConfig& config, const ObjectModel& object) {
    const StepMatrix step = step_matrix(config.phi(), object);
    ModePair state = input_pair(config);
    for (int n = 0; n < config.n_steps(); ++n) state = step * state;
    return state;
}

namespace detail {

inline Complex int_pow(Complex base, int exponent) {
    Complex result{1.0, 0.0};
    while (exponent > 0) {
        if (exponent & 1) result *= base;
        base *= base;
        exponent >>= 1;
    }
    return result;
}

// Spectral coefficients of M^k for eigenvalues l1,2 = m +- delta:
//   mean    = (l1^k + l2^k) / 2
//   divided = (l1^k - l2^k) / (l1 - l2)
struct PowerCoefficients {
    Complex mean;
    Complex divided;
};

// Close eigenvalues: with t = delta/m, (1 +- t)^k = (1 - t^2)^{k/2} e^{+-k atanh t}, so
//   mean = m^k (1 - t^2)^{k/2} cosh(k atanh t),  divided = m^{k-1} (1 - t^2)^{k/2} sinh(k atanh t) / t,
// which avoids the cancellation of the naive difference quotient.
inline PowerCoefficients power_coefficients_close(Complex m, Complex delta, int k) {
    const Complex t = delta / m;
    const Complex envelope = std::exp(0.5 * k * std::log(1.0 - t * t));
    const Complex angle = static_cast<double>(k) * std::atanh(t);
    const Complex m_pow = int_pow(m, k - 1);
    return {m_pow * m * envelope * std::cosh(angle), m_pow * envelope * std::sinh(angle) / t};
}

inline PowerCoefficients power_coefficients_far(Complex l1, Complex l2, int k) {
    const Complex p1 = int_pow(l1, k), p2 = int_pow(l2, k);
    return {0.5 * (p1 + p2), (p1 - p2) / (l1 - l2)};
}

}  // namespace detail

/// Relative eigenvalue gap below which the spectral route defers to repeated multiplication.
inline constexpr double spectral_gap_tolerance = 1e-8;

struct StepEigenvalues {
    Complex larger;   // |larger| >= |smaller|
    Complex smaller;
    Complex mean;     // (larger + smaller) / 2
    Complex half_gap; // (larger - smaller) / 2

    /// True when the 2x2 eigendecomposition is too ill-conditioned to use.
    bool near_degenerate() const {
        const double scale = std::abs(larger);
        return scale == 0.0 || std::abs(larger - smaller) < spectral_gap_tolerance * scale;
    }
};

/// Roots of lambda^2 - tr lambda + det = 0; the small root comes from det/large to avoid cancellation.
inline StepEigenvalues eigenvalues(const StepMatrix& m) {
    const Complex mean = 0.5 * m.trace();
    const Complex det = m.determinant();
    // mean^2 - det rewritten without the cancellation between two O(1) terms.
    const Complex half_diff = 0.5 * (m.m00 - m.m11);
    Complex delta = std::sqrt(half_diff * half_diff + m.m01 * m.m10);
    if (std::abs(mean + delta) < std::abs(mean - delta)) delta = -delta;
    const Complex larger = mean + delta;
    const Complex smaller = larger == Complex{} ? Complex{} : det / larger;
    return {larger, smaller, mean, delta};
}

struct SpectralPower {
    StepMatrix matrix;
    bool used_fallback = false;
};

/// M^N from the eigendecomposition, written with the spectral projectors as
///   M^N = (l1^N + l2^N)/2 I + (l1^N - l2^N)/(l1 - l2) (M - m I),   m = (l1 + l2)/2.
/// Falls back to repeated multiplication when the eigenvalues (nearly) coincide.
inline SpectralPower matrix_power_spectral(const StepMatrix& m, int n) {
    if (n < 0) throw DomainError("matrix power needs a non-negative exponent");
    if (n == 0) return {StepMatrix::identity(), false};

    const StepEigenvalues ev = eigenvalues(m);
    if (ev.near_degenerate()) {
        StepMatrix result = StepMatrix::identity();
        for (int k = 0; k < n; ++k) result = m * result;
        return {result, true};
    }

    // The hyperbolic form needs |t| < 1; keep well inside.
    const bool close = std::abs(ev.half_gap) < 0.25 * std::abs(ev.mean);
    const detail::PowerCoefficients c = close ? detail::power_coefficients_close(ev.mean, ev.half_gap, n)
                                              : detail::power_coefficients_far(ev.larger, ev.smaller, n);
    return {{c.mean + c.divided * (m.m00 - ev.mean), c.divided * m.m01, c.divided * m.m10,
             c.mean + c.divided * (m.m11 - ev.mean)},
            false};
}

/// Same result as propagate_iterative, from the eigendecomposition of S(eta).
inline ModePair propagate_spectral(const ChainConfig& config, const ObjectModel& object) {
    const StepMatrix step = step_matrix(config.phi(), object);
    if (eigenvalues(step).near_degenerate()) return propagate_iterative(config, object);
    return matrix_power_spectral(step, config.n_steps()).matrix * input_pair(config);
}

/// Effective absorption r = 1 - (|alpha_N|^2 + |beta_N|^2)/|alpha_0|^2, clamped to [0,1].
///
/// Evaluated on the normalised input (alpha_0 = 1), so r does not depend on alpha_0.
inline double absorbed_fraction(const ChainConfig& config, const ObjectModel& object) {
    const StepMatrix power =
        matrix_power_spectral(step_matrix(config.phi(), object), config.n_steps()).matrix;
    const double transmitted = std::norm(power.m00) + std::norm(power.m10);
    return std::clamp(1.0 - transmitted, 0.0, 1.0);
}

inline double absorbed_fraction(const ChainConfig& config, double eta) {
    return absorbed_fraction(config, ObjectModel(eta));
}

/// Closed form at eta = 1: alpha_N = a0 e^{iN phi/2} cos(N phi/2), beta_N = i a0 e^{iN phi/2} sin(N phi/2).
inline ModePair closed_form_transparent(const ChainConfig& config) {
    const double half_total = 0.5 * config.n_steps() * config.phi();
    const Complex carrier = config.input_amplitude() * std::polar(1.0, half_total);
    return {carrier * std::cos(half_total), Complex{0.0, 1.0} * carrier * std::sin(half_total)};
}

/// Closed form at eta = 0: alpha_N = a0 e^{iN phi/2} cos^N(phi/2), beta_N = 0.
inline ModePair closed_form_opaque(const ChainConfig& config) {
    const int n = config.n_steps();
    const double phi = config.phi();
    const Complex carrier = config.input_amplitude() * std::polar(1.0, 0.5 * n * phi);
    return {carrier * std::pow(std::cos(0.5 * phi), n), 0.0};
}

}  // namespace mzchain
