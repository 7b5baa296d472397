#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace multipair {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw std::invalid_argument("linear_fit: need at least two matching points");
    }
    const double n = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw std::invalid_argument("linear_fit: degenerate x values");
    LinearFit fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0.0, ss_tot = 0.0;
    const double mean_y = sy / n;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double pred = fit.intercept + fit.slope * xs[i];
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
    }
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

namespace detail {

inline std::vector<double> log_all(const std::vector<double>& v, const char* what) {
    std::vector<double> out;
    out.reserve(v.size());
    for (double x : v) {
        if (x <= 0.0) throw std::invalid_argument(std::string(what) + ": non-positive value");
        out.push_back(std::log(x));
    }
    return out;
}

}  // namespace detail

/// Power-law fit y ~ c x^slope via least squares in log-log coordinates.
inline LinearFit loglog_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    return linear_fit(detail::log_all(xs, "loglog_fit x"), detail::log_all(ys, "loglog_fit y"));
}

/// Exponential fit y ~ c exp(slope x) via least squares of log y against x.
inline LinearFit exp_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    return linear_fit(xs, detail::log_all(ys, "exp_fit y"));
}

}  // namespace multipair
