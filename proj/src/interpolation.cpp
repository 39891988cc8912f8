#include "consub/interpolation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace consub {

namespace {

// MATLAB-style shape-preserving endpoint slope (three-point, clamped).
double endpoint_slope(double h0, double h1, double d0, double d1) {
    double s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s * d0 <= 0.0) return 0.0;
    if (d0 * d1 < 0.0 && std::abs(s) > 3.0 * std::abs(d0)) return 3.0 * d0;
    return s;
}

} // namespace

Pchip::Pchip(Vec x, Vec y) {
    const Index n = x.size();
    if (n != y.size()) throw std::invalid_argument("Pchip: size mismatch");
    if (n < 4) throw std::invalid_argument("Pchip: need at least four nodes");

    bool increasing = x[1] > x[0];
    if (!increasing) {
        x.reverseInPlace();
        y.reverseInPlace();
    }
    for (Index k = 0; k + 1 < n; ++k) {
        if (!(x[k + 1] > x[k]))
            throw std::invalid_argument("Pchip: abscissae not strictly monotone");
    }

    Vec h(n - 1), d(n - 1);
    for (Index k = 0; k + 1 < n; ++k) {
        h[k] = x[k + 1] - x[k];
        d[k] = (y[k + 1] - y[k]) / h[k];
    }

    Vec s(n);
    for (Index k = 1; k + 1 < n; ++k) {
        if (d[k - 1] == 0.0 || d[k] == 0.0 || d[k - 1] * d[k] < 0.0) {
            s[k] = 0.0;
        } else {
            // Weighted harmonic mean keeps the cubic monotone on each interval.
            const double w1 = 2 * h[k] + h[k - 1];
            const double w2 = h[k] + 2 * h[k - 1];
            s[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
        }
    }
    s[0] = endpoint_slope(h[0], h[1], d[0], d[1]);
    s[n - 1] = endpoint_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);

    x_ = std::move(x);
    y_ = std::move(y);
    slope_ = std::move(s);
}

Index Pchip::locate(double x) const {
    const double* begin = x_.data();
    const double* end = begin + x_.size();
    Index k = static_cast<Index>(std::upper_bound(begin, end, x) - begin) - 1;
    return std::clamp<Index>(k, 0, x_.size() - 2);
}

double Pchip::operator()(double x) const {
    const Index k = locate(x);
    return hermite_value(x_[k], x_[k + 1], y_[k], y_[k + 1], slope_[k], slope_[k + 1], x);
}

double Pchip::derivative(double x) const {
    const Index k = locate(x);
    return hermite_derivative(x_[k], x_[k + 1], y_[k], y_[k + 1], slope_[k], slope_[k + 1], x);
}

} // namespace consub
