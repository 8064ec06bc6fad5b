#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mzchain {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter lies outside its physical domain (eta not in [0,1], N < 1, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// The absorption profile is identically zero, so no peak exists.
class EmptyPeakError : public Error {
public:
    using Error::Error;
};

/// No phi = pi/N configuration with N <= n_max puts the peak at the target.
class UnreachableTargetError : public Error {
public:
    UnreachableTargetError(double target, int best_n, double best_eta_max)
        : Error("target transmissivity " + std::to_string(target) +
                " is above the largest reachable peak " + std::to_string(best_eta_max) +
                " (N=" + std::to_string(best_n) + ")"),
          target_(target), best_n_(best_n), best_eta_max_(best_eta_max) {}

    double target() const noexcept { return target_; }
    int best_n() const noexcept { return best_n_; }
    double best_eta_max() const noexcept { return best_eta_max_; }

private:
    double target_;
    int best_n_;
    double best_eta_max_;
};

/// r(eta) is not monotone on the interval handed to an inversion.
class BranchError : public Error {
public:
    using Error::Error;
};

/// Malformed transmissivity map. Row and column are 1-based; 0 means "not applicable".
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
        : Error(compose(what, row, column)), row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string compose(const std::string& what, std::size_t row, std::size_t column) {
        if (row == 0) return what;
        std::string where = " at row " + std::to_string(row);
        if (column != 0) where += ", column " + std::to_string(column);
        return what + where;
    }

    std::size_t row_;
    std::size_t column_;
};

/// The selectivity partition (target band vs. background) has an empty side.
class BandError : public Error {
public:
    using Error::Error;
};

}  // namespace mzchain
