#pragma once

#include "consub/types.hpp"

namespace consub {

/// Cubic Hermite value on [t0, t1] from endpoint values and derivatives.
inline double hermite_value(double t0, double t1, double y0, double y1,
                            double d0, double d1, double t) {
    const double h = t1 - t0;
    const double s = (t - t0) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 +
           (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1;
}

/// Derivative of the cubic Hermite interpolant at t.
inline double hermite_derivative(double t0, double t1, double y0, double y1,
                                 double d0, double d1, double t) {
    const double h = t1 - t0;
    const double s = (t - t0) / h;
    const double s2 = s * s;
    return ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * h * d0 +
            (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * h * d1) / h;
}

/**
 * Monotone shape-preserving piecewise cubic (Fritsch-Carlson slope limiter).
 *
 * Node abscissae must be strictly monotone, increasing or decreasing; the
 * interpolant never overshoots monotone data. Evaluation outside the node
 * range extends the boundary cubic (callers guard domains themselves).
 */
class Pchip {
public:
    Pchip() = default;
    Pchip(Vec x, Vec y);

    double operator()(double x) const;
    double derivative(double x) const;

    bool empty() const { return x_.size() == 0; }
    double x_min() const { return x_[0]; }
    double x_max() const { return x_[x_.size() - 1]; }
    Index size() const { return x_.size(); }

private:
    Index locate(double x) const;

    Vec x_, y_, slope_;  // ascending in x_
};

} // namespace consub
