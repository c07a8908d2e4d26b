#include "hts/series.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>
#include <fmt/core.h>

#include "hts/errors.hpp"
#include "hts/log.hpp"

namespace hts {

TimeSeries::TimeSeries(std::vector<double> values, int period, std::string start)
    : values_(std::move(values)), period_(period), start_(std::move(start)) {
    if (period_ < 1) throw data_error("InvalidPeriod", fmt::format("period must be >= 1, got {}", period_));
}

TimeSeries TimeSeries::with_values(std::vector<double> values) const {
    return TimeSeries(std::move(values), period_, start_);
}

TimeSeries TimeSeries::slice(std::size_t first, std::size_t count) const {
    if (first + count > values_.size())
        throw data_error("SeriesTooShort",
                         fmt::format("slice [{}, {}) exceeds series of length {}", first, first + count,
                                     values_.size()));
    return with_values(std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(first),
                                           values_.begin() + static_cast<std::ptrdiff_t>(first + count)));
}

double box_cox_value(double y, double lambda) {
    if (lambda == 0.0) return std::log(y);
    return (std::pow(y, lambda) - 1.0) / lambda;
}

double inv_box_cox_value(double z, double lambda) {
    if (lambda == 0.0) return std::exp(z);
    return std::pow(lambda * z + 1.0, 1.0 / lambda);
}

TimeSeries box_cox(const TimeSeries& y, BoxCoxParam lam) {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(y[i] > 0.0))
            throw data_error("NonPositiveValue",
                             fmt::format("Box-Cox needs strictly positive data; value {} at index {}", y[i], i));
        out[i] = box_cox_value(y[i], lam.lambda);
    }
    return y.with_values(std::move(out));
}

TimeSeries inv_box_cox(const TimeSeries& z, BoxCoxParam lam) {
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (lam.lambda != 0.0 && !(lam.lambda * z[i] + 1.0 > 0.0))
            throw numerical_error("DomainViolation",
                                  fmt::format("inverse Box-Cox undefined: lambda*z+1 = {} at index {}",
                                              lam.lambda * z[i] + 1.0, i));
        out[i] = inv_box_cox_value(z[i], lam.lambda);
    }
    return z.with_values(std::move(out));
}

double mean(std::span<const double> y) {
    if (y.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
}

double stddev(std::span<const double> y) {
    if (y.size() < 2) return 0.0;
    const double m = mean(y);
    double ss = 0.0;
    for (double v : y) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(y.size() - 1));
}

BoxCoxParam select_lambda(const TimeSeries& y) {
    for (std::size_t i = 0; i < y.size(); ++i)
        if (!(y[i] > 0.0))
            throw data_error("NonPositiveValue",
                             fmt::format("lambda selection needs strictly positive data; value {} at index {}",
                                         y[i], i));

    std::size_t block = static_cast<std::size_t>(std::max(2, y.period()));
    if (y.size() < 2 * block) {
        warn(fmt::format("select_lambda: {} observations cover fewer than two seasons of {}; using blocks of 2",
                         y.size(), block));
        block = 2;
    }
    if (y.size() < 2 * block) {
        warn("select_lambda: series too short for lambda selection; using lambda = 1");
        return {1.0};
    }

    // Use the most recent complete blocks.
    const std::size_t nblocks = y.size() / block;
    const std::size_t offset = y.size() - nblocks * block;
    std::vector<double> block_mean(nblocks), block_sd(nblocks);
    for (std::size_t b = 0; b < nblocks; ++b) {
        auto part = y.values().subspan(offset + b * block, block);
        block_mean[b] = mean(part);
        block_sd[b] = stddev(part);
    }

    // The sd-mean relation is only identifiable when block levels differ by
    // more than within-block noise explains (one-way ANOVA F test at 5%).
    if (nblocks >= 2) {
        double within = 0.0;
        for (double sd : block_sd) within += sd * sd;
        within /= static_cast<double>(nblocks);
        const double between = stddev(block_mean) * stddev(block_mean) * static_cast<double>(block);
        const double df1 = static_cast<double>(nblocks - 1);
        const double df2 = static_cast<double>(nblocks * (block - 1));
        if (within > 0.0 && between / within < boost::math::quantile(boost::math::fisher_f(df1, df2), 0.95)) {
            warn("select_lambda: block levels show no significant variation; using lambda = 1");
            return {1.0};
        }
    }

    constexpr double kTiny = 1e-12;
    double best_lambda = 1.0;
    double best_cv = std::numeric_limits<double>::infinity();
    bool any_dispersion = false;
    std::vector<double> ratio(nblocks);
    for (int step = 0; step <= 30; ++step) {
        const double lambda = -1.0 + 0.1 * step;
        for (std::size_t b = 0; b < nblocks; ++b) ratio[b] = block_sd[b] / std::pow(block_mean[b], 1.0 - lambda);
        const double m = mean(ratio);
        if (!(m > kTiny)) continue;
        any_dispersion = true;
        const double cv = stddev(ratio) / m;
        if (cv < best_cv - kTiny) {
            best_cv = cv;
            best_lambda = lambda;
        }
    }
    if (!any_dispersion) {
        warn("select_lambda: series has no within-season dispersion; using lambda = 1");
        return {1.0};
    }
    // Snap grid values such as -1 + 0.1*10 to their decimal representation.
    return {std::round(best_lambda * 10.0) / 10.0};
}

std::vector<double> differencing_polynomial(int lag, int order) {
    // Expand (1 - x^lag)^order as 1 - sum c_k x^k.
    std::vector<double> poly{1.0};
    for (int o = 0; o < order; ++o) {
        std::vector<double> next(poly.size() + static_cast<std::size_t>(lag), 0.0);
        for (std::size_t k = 0; k < poly.size(); ++k) {
            next[k] += poly[k];
            next[k + static_cast<std::size_t>(lag)] -= poly[k];
        }
        poly = std::move(next);
    }
    std::vector<double> c(poly.size() - 1);
    for (std::size_t k = 1; k < poly.size(); ++k) c[k - 1] = -poly[k];
    return c;
}

Differenced difference(const TimeSeries& y, int lag, int order) {
    if (lag < 1 || order < 0)
        throw data_error("InvalidDifference", fmt::format("lag {} / order {} invalid", lag, order));
    const std::size_t span = static_cast<std::size_t>(lag) * static_cast<std::size_t>(order);
    if (y.size() <= span)
        throw data_error("SeriesTooShort",
                         fmt::format("differencing with lag {} order {} needs more than {} points, got {}", lag,
                                     order, span, y.size()));
    std::vector<double> cur = y.data();
    for (int o = 0; o < order; ++o) {
        std::vector<double> next(cur.size() - static_cast<std::size_t>(lag));
        for (std::size_t t = 0; t < next.size(); ++t) next[t] = cur[t + static_cast<std::size_t>(lag)] - cur[t];
        cur = std::move(next);
    }
    DifferenceSpec spec{lag, order, std::vector<double>(y.data().begin(), y.data().begin() + static_cast<std::ptrdiff_t>(span))};
    return {y.with_values(std::move(cur)), std::move(spec)};
}

TimeSeries integrate(const TimeSeries& z, const DifferenceSpec& spec) {
    const std::size_t span = static_cast<std::size_t>(spec.lag) * static_cast<std::size_t>(spec.order);
    if (spec.lag < 1 || spec.order < 0 || spec.initial_values.size() != span)
        throw data_error("SpecMismatch", fmt::format("difference spec expects {} initial values, has {}", span,
                                                     spec.initial_values.size()));
    const auto c = differencing_polynomial(spec.lag, spec.order);
    std::vector<double> y(span + z.size());
    std::copy(spec.initial_values.begin(), spec.initial_values.end(), y.begin());
    for (std::size_t t = span; t < y.size(); ++t) {
        double v = z[t - span];
        for (std::size_t k = 1; k <= c.size(); ++k)
            if (c[k - 1] != 0.0) v += c[k - 1] * y[t - k];
        y[t] = v;
    }
    return z.with_values(std::move(y));
}

std::vector<double> acf(std::span<const double> y, std::size_t max_lag) {
    if (max_lag < 1 || y.size() <= max_lag)
        throw data_error("SeriesTooShort",
                         fmt::format("acf up to lag {} needs more than {} points, got {}", max_lag, max_lag,
                                     y.size()));
    const double m = mean(y);
    const auto n = y.size();
    double c0 = 0.0;
    for (double v : y) c0 += (v - m) * (v - m);
    std::vector<double> r(max_lag + 1, 0.0);
    r[0] = 1.0;
    if (c0 == 0.0) return r;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double ck = 0.0;
        for (std::size_t t = k; t < n; ++t) ck += (y[t] - m) * (y[t - k] - m);
        r[k] = ck / c0;
    }
    return r;
}

std::vector<double> durbin_levinson(std::span<const double> r) {
    const std::size_t max_lag = r.empty() ? 0 : r.size() - 1;
    std::vector<double> out(max_lag + 1, 0.0);
    out[0] = 1.0;
    if (max_lag == 0) return out;
    std::vector<double> phi(max_lag + 1, 0.0), prev(max_lag + 1, 0.0);
    double v = 1.0;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double num = r[k];
        for (std::size_t j = 1; j < k; ++j) num -= prev[j] * r[k - j];
        const double kappa = v > 0.0 ? num / v : 0.0;
        phi[k] = kappa;
        for (std::size_t j = 1; j < k; ++j) phi[j] = prev[j] - kappa * prev[k - j];
        v *= (1.0 - kappa * kappa);
        out[k] = kappa;
        prev = phi;
    }
    return out;
}

std::vector<double> pacf(std::span<const double> y, std::size_t max_lag) {
    return durbin_levinson(acf(y, max_lag));
}

}  // namespace hts
