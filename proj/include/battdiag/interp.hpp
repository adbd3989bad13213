#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "battdiag/common.hpp"

namespace battdiag {

// Shape-preserving piecewise-cubic interpolant (Fritsch-Carlson tangent
// limiting). Where the data are monotone the interpolant is monotone too;
// on non-monotone data it behaves like a clamped Hermite spline without
// overshoot between knots. Outside the knot range it extrapolates linearly
// with the boundary segment slope, clamped so that a globally monotone data
// set stays monotone under extrapolation.
class MonotoneCubic {
public:
    MonotoneCubic() = default;

    MonotoneCubic(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n)
            throw InvalidArgument("MonotoneCubic: need >= 2 points, matched lengths");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1]))
                throw InvalidArgument("MonotoneCubic: x must be strictly increasing");

        std::vector<double> d(n - 1);  // secant slopes
        for (std::size_t i = 0; i + 1 < n; ++i)
            d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);

        m_.assign(n, 0.0);
        m_[0] = d[0];
        m_[n - 1] = d[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i)
            m_[i] = (d[i - 1] * d[i] <= 0.0) ? 0.0 : 0.5 * (d[i - 1] + d[i]);

        // Limit tangents so no interval overshoots its secant.
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (d[i] == 0.0) {
                m_[i] = 0.0;
                m_[i + 1] = 0.0;
                continue;
            }
            double a = m_[i] / d[i];
            double b = m_[i + 1] / d[i];
            if (a < 0.0) { m_[i] = 0.0; a = 0.0; }
            if (b < 0.0) { m_[i + 1] = 0.0; b = 0.0; }
            const double s = a * a + b * b;
            if (s > 9.0) {
                const double t = 3.0 / std::sqrt(s);
                m_[i] = t * a * d[i];
                m_[i + 1] = t * b * d[i];
            }
        }

        // Boundary extrapolation slopes: the outermost segment slope, clamped
        // to zero if it would break a globally monotone data set.
        bool nonincreasing = true, nondecreasing = true;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (d[i] > 0.0) nonincreasing = false;
            if (d[i] < 0.0) nondecreasing = false;
        }
        slope_lo_ = d[0];
        slope_hi_ = d[n - 2];
        if (nonincreasing && !nondecreasing) {
            slope_lo_ = std::min(slope_lo_, 0.0);
            slope_hi_ = std::min(slope_hi_, 0.0);
        } else if (nondecreasing && !nonincreasing) {
            slope_lo_ = std::max(slope_lo_, 0.0);
            slope_hi_ = std::max(slope_hi_, 0.0);
        }
    }

    double operator()(double t) const {
        const std::size_t n = x_.size();
        if (t <= x_.front()) return y_.front() + (t - x_.front()) * slope_lo_;
        if (t >= x_.back()) return y_.back() + (t - x_.back()) * slope_hi_;

        // Rightmost interval whose left knot is <= t.
        std::size_t i =
            static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) -
                                     x_.begin()) - 1;
        if (i >= n - 1) i = n - 2;

        const double h = x_[i + 1] - x_[i];
        const double u = (t - x_[i]) / h;
        const double u2 = u * u;
        const double u3 = u2 * u;
        const double h00 = 2 * u3 - 3 * u2 + 1;
        const double h10 = u3 - 2 * u2 + u;
        const double h01 = -2 * u3 + 3 * u2;
        const double h11 = u3 - u2;
        return h00 * y_[i] + h10 * h * m_[i] + h01 * y_[i + 1] + h11 * h * m_[i + 1];
    }

    const std::vector<double>& x() const { return x_; }
    const std::vector<double>& y() const { return y_; }

private:
    std::vector<double> x_, y_, m_;
    double slope_lo_ = 0.0, slope_hi_ = 0.0;
};

}  // namespace battdiag
