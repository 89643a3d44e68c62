#ifndef AICLAB_SCALING_HPP
#define AICLAB_SCALING_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "aiclab/errors.hpp"

namespace aiclab {

struct SeriesPoint {
    double t;
    double value;
};

using Series = std::vector<SeriesPoint>;

struct ScalingFit {
    double exponent = 0.0;
    double log_coefficient = 0.0;
    double r_squared = 0.0;
    double t_min = 0.0;  // requested window
    double t_max = 0.0;
    std::size_t points = 0;

    double coefficient() const { return std::exp(log_coefficient); }
};

inline constexpr std::size_t kMinFitPoints = 8;

/// Least-squares line through (log t, log y) over points with t in [t_min, t_max].
inline ScalingFit fit_power_law(const Series& series, double t_min, double t_max) {
    std::vector<double> xs, ys;
    for (const auto& p : series) {
        if (p.t < t_min || p.t > t_max || p.t <= 0.0) continue;
        if (!(p.value > 0.0))
            throw InsufficientData("non-positive series value " + std::to_string(p.value) +
                                   " at t = " + std::to_string(p.t));
        xs.push_back(std::log(p.t));
        ys.push_back(std::log(p.value));
    }
    if (xs.size() < kMinFitPoints)
        throw InsufficientData("power-law fit needs at least " + std::to_string(kMinFitPoints) +
                               " points in [" + std::to_string(t_min) + ", " +
                               std::to_string(t_max) + "], got " + std::to_string(xs.size()));

    const double m = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0) throw InsufficientData("power-law fit needs distinct times");

    ScalingFit fit;
    fit.exponent = sxy / sxx;
    fit.log_coefficient = my - fit.exponent * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (fit.log_coefficient + fit.exponent * xs[i]);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    fit.t_min = t_min;
    fit.t_max = t_max;
    fit.points = xs.size();
    return fit;
}

}  // namespace aiclab

#endif  // AICLAB_SCALING_HPP
