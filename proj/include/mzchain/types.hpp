#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "mzchain/errors.hpp"

namespace mzchain {

using Complex = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Coherent amplitudes of the L (alpha) and R (beta) beams at one stage of the chain.
struct ModePair {
    Complex alpha{};
    Complex beta{};

    double intensity() const { return std::norm(alpha) + std::norm(beta); }

    friend bool operator==(const ModePair&, const ModePair&) = default;
};

/// Opt-in for phi = 0, where the chain degenerates to a plain attenuator.
enum class Degenerate { reject, allow };

/// Interferometer parameters shared by all N stages.
///
/// The phase is reduced into [0, 2pi). A reduced phase of exactly zero is rejected
/// unless `Degenerate::allow` is passed. Reduction by 2pi flips the global sign of
/// the e^{i phi/2} prefactor, which leaves every intensity unchanged.
class ChainConfig {
public:
    ChainConfig(double phi, int n_steps, Complex input_amplitude = 1.0,
                Degenerate degenerate = Degenerate::reject)
        : phi_(reduce(phi)), n_steps_(n_steps), input_amplitude_(input_amplitude) {
        if (n_steps < 1) throw DomainError("n_steps must be >= 1, got " + std::to_string(n_steps));
        if (phi_ == 0.0 && degenerate == Degenerate::reject)
            throw DomainError("phi = 0 disables the interferometer; pass Degenerate::allow to use it");
        if (!std::isfinite(input_amplitude.real()) || !std::isfinite(input_amplitude.imag()) ||
            input_amplitude == Complex{})
            throw DomainError("input amplitude must be finite and nonzero");
    }

    /// The canonical phi = pi/N setting.
    static ChainConfig pi_over_n(int n_steps, Complex input_amplitude = 1.0) {
        if (n_steps < 1) throw DomainError("n_steps must be >= 1, got " + std::to_string(n_steps));
        return ChainConfig(pi / n_steps, n_steps, input_amplitude);
    }

    double phi() const noexcept { return phi_; }
    int n_steps() const noexcept { return n_steps_; }
    Complex input_amplitude() const noexcept { return input_amplitude_; }
    double input_intensity() const { return std::norm(input_amplitude_); }

    ChainConfig with_steps(int n_steps) const {
        return ChainConfig(phi_, n_steps, input_amplitude_, Degenerate::allow);
    }
    ChainConfig with_amplitude(Complex input_amplitude) const {
        return ChainConfig(phi_, n_steps_, input_amplitude, Degenerate::allow);
    }

    friend bool operator==(const ChainConfig&, const ChainConfig&) = default;

private:
    static double reduce(double phi) {
        if (!std::isfinite(phi)) throw DomainError("phi must be finite");
        double reduced = std::fmod(phi, two_pi);
        if (reduced < 0.0) reduced += two_pi;
        if (reduced >= two_pi) reduced = 0.0;
        return reduced;
    }

    double phi_;
    int n_steps_;
    Complex input_amplitude_;
};

/// Partially transmitting object in the R arm.
class ObjectModel {
public:
    explicit ObjectModel(double eta, double theta = 0.0) : eta_(eta), theta_(theta) {
        if (!(eta >= 0.0 && eta <= 1.0))
            throw DomainError("transmissivity eta must lie in [0,1], got " + std::to_string(eta));
        if (!std::isfinite(theta)) throw DomainError("object phase theta must be finite");
    }

    double eta() const noexcept { return eta_; }
    double theta() const noexcept { return theta_; }

    /// Amplitude factor sqrt(eta) e^{i theta} applied to the R beam.
    Complex amplitude_factor() const { return std::polar(std::sqrt(eta_), theta_); }

    friend bool operator==(const ObjectModel&, const ObjectModel&) = default;

private:
    double eta_;
    double theta_;
};

/// 2x2 complex matrix acting on (alpha, beta), row-major.
struct StepMatrix {
    Complex m00{}, m01{}, m10{}, m11{};

    static StepMatrix identity() { return {1.0, 0.0, 0.0, 1.0}; }

    ModePair operator*(const ModePair& v) const {
        return {m00 * v.alpha + m01 * v.beta, m10 * v.alpha + m11 * v.beta};
    }

    StepMatrix operator*(const StepMatrix& o) const {
        return {m00 * o.m00 + m01 * o.m10, m00 * o.m01 + m01 * o.m11,
                m10 * o.m00 + m11 * o.m10, m10 * o.m01 + m11 * o.m11};
    }

    Complex trace() const { return m00 + m11; }
    Complex determinant() const { return m00 * m11 - m01 * m10; }

    /// Largest singular value, from the eigenvalues of M^H M.
    double spectral_norm() const {
        const double a = std::norm(m00) + std::norm(m10);
        const double d = std::norm(m01) + std::norm(m11);
        const double b = std::abs(std::conj(m00) * m01 + std::conj(m10) * m11);
        const double half_gap = std::hypot(0.5 * (a - d), b);
        return std::sqrt(0.5 * (a + d) + half_gap);
    }

    double max_abs_diff(const StepMatrix& o) const {
        return std::max({std::abs(m00 - o.m00), std::abs(m01 - o.m01), std::abs(m10 - o.m10),
                         std::abs(m11 - o.m11)});
    }
};

inline double max_abs_diff(const ModePair& a, const ModePair& b) {
    return std::max(std::abs(a.alpha - b.alpha), std::abs(a.beta - b.beta));
}

}  // namespace mzchain
