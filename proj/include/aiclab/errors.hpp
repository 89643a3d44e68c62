#ifndef AICLAB_ERRORS_HPP
#define AICLAB_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aiclab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(const std::string& what, std::size_t expected, std::size_t got)
        : Error(what + ": expected dimension " + std::to_string(expected) + ", got " +
                std::to_string(got)),
          expected_(expected), got_(got) {}

    std::size_t expected() const noexcept { return expected_; }
    std::size_t got() const noexcept { return got_; }

private:
    std::size_t expected_;
    std::size_t got_;
};

/// Raised when a matrix that must be symmetric is not, carrying the measured asymmetry.
class AsymmetryError : public Error {
public:
    AsymmetryError(double asymmetry, double tolerance)
        : Error("matrix is not symmetric: max |A[i,j]-A[j,i]| = " + std::to_string(asymmetry) +
                " exceeds " + std::to_string(tolerance)),
          asymmetry_(asymmetry) {}

    double asymmetry() const noexcept { return asymmetry_; }

private:
    double asymmetry_;
};

class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// Projector is not a spectral projector of the matrix it is paired with.
class NotSpectralError : public Error {
public:
    NotSpectralError(double commutator, double tolerance)
        : Error("projector does not commute with matrix: ||FP - PF|| = " +
                std::to_string(commutator) + " > " + std::to_string(tolerance)),
          commutator_(commutator) {}

    double commutator() const noexcept { return commutator_; }

private:
    double commutator_;
};

/// A construction request that cannot be met; names the violated constraint.
class InfeasibleParams : public Error {
public:
    InfeasibleParams(std::string constraint, const std::string& detail)
        : Error("infeasible parameters [" + constraint + "]: " + detail),
          constraint_(std::move(constraint)) {}

    const std::string& constraint() const noexcept { return constraint_; }

private:
    std::string constraint_;
};

/// Zero reference probability where a log is required.
class SupportError : public Error {
public:
    SupportError(std::size_t context, std::size_t outcome)
        : Error("reference distribution has zero probability at context " +
                std::to_string(context) + ", outcome " + std::to_string(outcome)),
          context_(context), outcome_(outcome) {}

    std::size_t context() const noexcept { return context_; }
    std::size_t outcome() const noexcept { return outcome_; }

private:
    std::size_t context_;
    std::size_t outcome_;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class IntegrationFault : public Error {
public:
    explicit IntegrationFault(double last_valid_time)
        : Error("non-finite state encountered; last valid time " +
                std::to_string(last_valid_time)),
          last_valid_time_(last_valid_time) {}

    double last_valid_time() const noexcept { return last_valid_time_; }

private:
    double last_valid_time_;
};

/// Two artifacts built against different random projections.
class SeedMismatch : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace aiclab

#endif  // AICLAB_ERRORS_HPP
