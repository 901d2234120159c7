#pragma once

#include <span>

namespace landau {

/// Ordinary least squares y = intercept + slope x.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double slope_stderr = 0.0;
    double intercept_stderr = 0.0;
    int points = 0;
};

/// Needs at least two distinct x values; fewer yields a zero fit with
/// points set.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Two-sided Student t critical value: P(|T| <= t) = confidence.
double student_t_quantile(double confidence, int dof);

} // namespace landau
