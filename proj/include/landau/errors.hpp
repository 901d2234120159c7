#pragma once

#include <stdexcept>
#include <string>

namespace landau {

/// Base class of every error raised by the library.
///
/// The two intermediate classes decide the CLI exit code: a
/// ValidationError maps to 2, a SolverError to 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

// --- model / configuration -------------------------------------------------

class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t position)
        : ValidationError(what + " (at offset " + std::to_string(position) + ")"),
          position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NonDegeneracyViolation : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class MetricNotSPD : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class FieldEvaluationError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ResolutionTooCoarse : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// --- predictor --------------------------------------------------------------

class DegenerateField : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class EmptyRegion : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// --- discretization ----------------------------------------------------------

class FluxNotQuantized : public ValidationError {
public:
    FluxNotQuantized(const std::string& what, double p, double flux, long nearest_p)
        : ValidationError(what), p_(p), flux_(flux), nearest_p_(nearest_p) {}
    double p() const noexcept { return p_; }
    double flux() const noexcept { return flux_; }
    /// Closest tensor power for which p * flux / 2pi is an integer.
    long nearest_admissible_p() const noexcept { return nearest_p_; }

private:
    double p_;
    double flux_;
    long nearest_p_;
};

class UnsupportedGeometry : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class IoError : public Error {
public:
    using Error::Error;
};

// --- spectral ------------------------------------------------------------------

class ShiftTooClose : public SolverError {
public:
    ShiftTooClose(const std::string& what, double shift)
        : SolverError(what), shift_(shift) {}
    double shift() const noexcept { return shift_; }

private:
    double shift_;
};

class FactorizationFailure : public SolverError {
public:
    using SolverError::SolverError;
};

class ConvergenceFailure : public SolverError {
public:
    ConvergenceFailure(const std::string& what, int iterations, double worst_residual)
        : SolverError(what), iterations_(iterations), worst_residual_(worst_residual) {}
    int iterations() const noexcept { return iterations_; }
    double worst_residual() const noexcept { return worst_residual_; }

private:
    int iterations_;
    double worst_residual_;
};

class DegenerateFit : public SolverError {
public:
    using SolverError::SolverError;
};

} // namespace landau
